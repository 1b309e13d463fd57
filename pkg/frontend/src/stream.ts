import type { StreamMessage } from './types';

// Minimal WebSocket surface so node tests can inject the `ws` package.
export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export type ConnectionStatus = 'connecting' | 'open' | 'closed' | 'ended';

export interface StreamOptions {
  wsFactory?: WebSocketFactory;
  reconnectDelayMs?: number;
  maxReconnects?: number;
}

const defaultFactory: WebSocketFactory = (url) =>
  new WebSocket(url) as unknown as WebSocketLike;

/** Ordered record feed with seq-resume reconnect.
 *
 * Records are delivered to the handler strictly once and in seq order; on
 * reconnect the client resumes from the next unseen seq, so server-side
 * at-least-once delivery appears exactly-once here.
 */
export class StreamClient {
  private socket: WebSocketLike | null = null;
  private nextSeq = 0;
  private reconnects = 0;
  private stopped = false;
  private sessionEnded = false;

  constructor(
    private wsBaseUrl: string,
    private sessionId: string,
    private onMessage: (message: StreamMessage) => void,
    private onStatus: (status: ConnectionStatus) => void = () => {},
    private options: StreamOptions = {},
  ) {}

  get lastDeliveredSeq(): number {
    return this.nextSeq - 1;
  }

  connect(fromSeq = 0): void {
    this.nextSeq = Math.max(this.nextSeq, fromSeq);
    this.open();
  }

  private open(): void {
    if (this.stopped || this.sessionEnded) return;
    const factory = this.options.wsFactory ?? defaultFactory;
    const url = `${this.wsBaseUrl}/sessions/${this.sessionId}/stream?from_seq=${this.nextSeq}`;
    this.onStatus('connecting');
    const socket = factory(url);
    this.socket = socket;

    socket.onopen = () => {
      this.reconnects = 0;
      this.onStatus('open');
    };
    socket.onmessage = (event) => {
      const message = JSON.parse(String(event.data)) as StreamMessage;
      if (message.type === 'record') {
        if (message.record.seq < this.nextSeq) return; // duplicate on resume
        this.nextSeq = message.record.seq + 1;
      } else if (message.type === 'closed') {
        this.sessionEnded = true;
        this.onStatus('ended');
      }
      this.onMessage(message);
    };
    socket.onerror = () => {
      /* close handler decides on reconnect */
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.stopped || this.sessionEnded) return;
      this.onStatus('closed');
      const max = this.options.maxReconnects ?? 50;
      if (this.reconnects >= max) return;
      this.reconnects += 1;
      const delay = this.options.reconnectDelayMs ?? 500;
      setTimeout(() => this.open(), delay);
    };
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
  }
}
