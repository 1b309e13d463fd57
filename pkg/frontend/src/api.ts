import type {
  FrameName,
  LogRecord,
  MessageReply,
  SessionInfo,
  StateDoc,
  WorldDoc,
} from './types';

export interface CreateSessionOptions {
  world?: string;
  engine?: 'rules' | 'llm';
  seed?: number;
  default_frame?: FrameName;
  manual?: boolean;
  time_scale?: number | null;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = 'unknown_error';
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    const detail = body.detail ?? body;
    if (detail && typeof detail === 'object') {
      code = detail.code ?? code;
      message = detail.message ?? message;
    }
  } catch {
    /* non-JSON error body */
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { 'content-type': 'application/json' },
      ...init,
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  listWorlds(): Promise<{ worlds: string[] }> {
    return this.request('/worlds');
  }

  createSession(options: CreateSessionOptions = {}): Promise<SessionInfo> {
    return this.request('/sessions', { method: 'POST', body: JSON.stringify(options) });
  }

  postMessage(sessionId: string, text: string, at?: number): Promise<MessageReply> {
    return this.request(`/sessions/${sessionId}/message`, {
      method: 'POST',
      body: JSON.stringify(at === undefined ? { text } : { text, at }),
    });
  }

  switchFrame(sessionId: string, frame: FrameName): Promise<{ frame: FrameName; seq: number }> {
    return this.request(`/sessions/${sessionId}/frame`, {
      method: 'POST',
      body: JSON.stringify({ frame }),
    });
  }

  getState(sessionId: string): Promise<StateDoc> {
    return this.request(`/sessions/${sessionId}/state`);
  }

  getWorld(sessionId: string): Promise<WorldDoc> {
    return this.request(`/sessions/${sessionId}/world`);
  }

  getLog(sessionId: string): Promise<{ records: LogRecord[] }> {
    return this.request(`/sessions/${sessionId}/log`);
  }

  advance(sessionId: string, to: number): Promise<{ t: number; seq: number }> {
    return this.request(`/sessions/${sessionId}/advance`, {
      method: 'POST',
      body: JSON.stringify({ to }),
    });
  }

  closeSession(sessionId: string): Promise<{ status: string }> {
    return this.request(`/sessions/${sessionId}/close`, { method: 'POST' });
  }
}
