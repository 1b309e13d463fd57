// Wire types mirroring the service's JSON schemas (see docs/service-api.md).

export type Pose = [number, number, number]; // x, y, theta

export type FrameName = 'agentive' | 'teleological' | 'mechanistic';

export interface WorldDoc {
  name: string;
  bounds: [number, number, number, number]; // xmin, ymin, xmax, ymax
  spawn: Pose;
  obstacles: [number, number, number, number][];
  waypoints: { label: string; position: [number, number]; facing: number | null }[];
  aliases: Record<string, string>;
  defaults: { position_confidence: number; arrival_tolerance: number };
}

export interface SessionInfo {
  id: string;
  world: WorldDoc;
  engine: string;
  seed: number;
  frame: FrameName;
  time_scale: number | null;
  status: string;
}

export interface EventDoc {
  t: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface LogRecord {
  seq: number;
  event: EventDoc;
  beliefs: unknown[];
  desires: unknown[];
  intention: unknown | null;
  action: { kind: string; params: Record<string, unknown> } | null;
}

export interface UtteranceDoc {
  text: string;
  frame: FrameName;
  topic: string;
  provenance: 'template' | 'llm';
}

export interface MessageReply {
  utterance: UtteranceDoc;
  seq: number;
  t: number;
}

export interface StateDoc {
  id: string;
  status: string;
  t: number;
  seq: number;
  frame: FrameName;
  engine: string;
  seed: number;
  robot_status: string;
  pose: Pose;
  goal: Pose | null;
  progress: number | null;
  beliefs: {
    category: string;
    content: { predicate: string; args: unknown[] };
    confidence: number;
    source: string;
  }[];
  desires: { id: string; goal: { predicate: string; args: unknown[] };
             priority: number; origin: string }[];
  intention: { action: string; params: Record<string, unknown>; status: string } | null;
}

export type StreamMessage =
  | { type: 'record'; record: LogRecord }
  | { type: 'closed' }
  | { type: 'error'; code: string };
