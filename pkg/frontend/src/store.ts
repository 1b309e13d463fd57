import type {
  FrameName,
  LogRecord,
  Pose,
  StreamMessage,
  WorldDoc,
} from './types';

export interface ChatEntry {
  role: 'user' | 'robot';
  text: string; // exact server bytes, never rewritten client-side
  seq: number;
  t: number;
  frame?: FrameName;
  provenance?: 'template' | 'llm';
}

export type Viewpoint = 'plan' | 'front' | 'both';

/** Client-side view state derived purely from the record stream.
 *
 * The UI computes no behavior: everything here is a fold over server records,
 * kept in seq order, so closing the client mid-run cannot change what the
 * server logs.
 */
export class SessionStore {
  chat: ChatEntry[] = [];
  frame: FrameName;
  pose: Pose;
  path: [number, number][] = [];
  progress: number | null = null;
  navigating = false;
  simTime = 0;
  lastSeq = -1;
  ended = false;
  lastRecordWallMs: number | null = null;
  viewpoint: Viewpoint = 'both';

  constructor(public world: WorldDoc, defaultFrame: FrameName,
              private now: () => number = () => Date.now()) {
    this.frame = defaultFrame;
    this.pose = [...world.spawn] as Pose;
  }

  handle(message: StreamMessage): void {
    if (message.type === 'closed') {
      this.ended = true;
      return;
    }
    if (message.type !== 'record') return;
    this.apply(message.record);
  }

  apply(record: LogRecord): void {
    if (record.seq <= this.lastSeq) return; // chat order equals server seq order
    this.lastSeq = record.seq;
    this.simTime = record.event.t;
    this.lastRecordWallMs = this.now();

    const { kind, payload, t } = record.event;
    switch (kind) {
      case 'user_utterance':
        this.chat.push({ role: 'user', text: String(payload.text),
                         seq: record.seq, t });
        break;
      case 'llm_response':
        this.chat.push({
          role: 'robot',
          text: String(payload.text),
          seq: record.seq,
          t,
          frame: payload.frame as FrameName,
          provenance: payload.provenance as 'template' | 'llm',
        });
        break;
      case 'frame_switch':
        this.frame = payload.frame as FrameName;
        break;
      case 'session_start':
        this.frame = (payload.default_frame as FrameName) ?? this.frame;
        break;
      case 'nav_goal_set':
        this.path = payload.path as [number, number][];
        this.progress = 0;
        this.navigating = true;
        break;
      case 'nav_progress':
        this.pose = payload.pose as Pose;
        this.progress = payload.progress as number;
        break;
      case 'nav_goal_reached':
        this.pose = payload.pose as Pose;
        this.path = [];
        this.progress = null;
        this.navigating = false;
        break;
      case 'tick':
        this.pose = payload.pose as Pose;
        break;
      default:
        break; // command_parsed, error: nothing to render directly
    }
  }

  /** Milliseconds since the last record arrived; used for the staleness badge. */
  stalenessMs(): number | null {
    if (this.lastRecordWallMs === null) return null;
    return this.now() - this.lastRecordWallMs;
  }

  robotTranscript(): string[] {
    return this.chat.filter((entry) => entry.role === 'robot').map((entry) => entry.text);
  }
}
