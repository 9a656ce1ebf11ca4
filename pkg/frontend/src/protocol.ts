// Wire protocol types, mirroring the server's protocol reference
// (docs/protocol.md). The client performs no geometry: every derived flag
// (busy, visibility, reachability) is read from scene_snapshot payloads.

export const WIRE_TYPES = [
  'scene_snapshot',
  'utterance_submit',
  'trace_event',
  'control',
  'ack',
  'error',
] as const;

export type WireType = (typeof WIRE_TYPES)[number];

export const TERMINAL_KINDS = ['stop', 'round_limit', 'backend_error'] as const;

export type Vec3 = [number, number, number];

export interface ObjectEntry {
  id: string;
  center: Vec3;
  half_extents: Vec3;
  affordances: string[];
  fill_contents: string | null;
  fill_history: string[];
  held_by: string | null;
}

export interface PersonEntry {
  id: string;
  eye: Vec3;
  gaze: Vec3;
  reach_origin: Vec3;
  reach_radius: number;
  holds: string[];
}

export interface RobotEntry {
  id: string;
  reach_origin: Vec3;
  reach_radius: number;
  holds: string[];
  attention_target: string | null;
}

export interface SceneDoc {
  objects: ObjectEntry[];
  persons: PersonEntry[];
  robot: RobotEntry;
  revision: number;
}

export interface SceneSnapshotPayload {
  scene: SceneDoc;
  busy: Record<string, boolean>;
  visibility: Record<string, Record<string, boolean>>;
  reachability: Record<string, Record<string, boolean>>;
  revision: number;
}

export interface UtterancePayload {
  speaker: string;
  listener: string;
  text: string;
  formatted: string;
}

export interface TraceCall {
  call_id: string;
  name: string;
  arguments: Record<string, unknown>;
}

export interface TraceEventPayload {
  kind: string;
  text?: string;
  call?: TraceCall;
  result?: string;
  is_action?: boolean;
  action_succeeded?: boolean;
  mutated?: boolean;
  error?: boolean;
  person?: string;
}

export interface ControlPayload {
  command: string;
  object_name?: string;
  person_name?: string;
  position?: Vec3;
}

export interface ErrorPayload {
  detail: string;
  request?: string;
}

export interface WireMessage {
  type: WireType;
  seq: number;
  payload: Record<string, unknown>;
}

export function isTerminalKind(kind: string): boolean {
  return (TERMINAL_KINDS as readonly string[]).includes(kind);
}

// Parse one incoming frame; null for anything that is not a WireMessage.
export function parseWireMessage(data: unknown): WireMessage | null {
  let raw: unknown = data;
  if (typeof data === 'string') {
    try {
      raw = JSON.parse(data);
    } catch {
      return null;
    }
  }
  if (typeof raw !== 'object' || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  if (!(WIRE_TYPES as readonly unknown[]).includes(msg.type)) return null;
  if (typeof msg.seq !== 'number' || !Number.isInteger(msg.seq) || msg.seq < 1) return null;
  if (typeof msg.payload !== 'object' || msg.payload === null) return null;
  return { type: msg.type as WireType, seq: msg.seq, payload: msg.payload as Record<string, unknown> };
}

// Shape check for snapshots; a malformed one must not replace the last
// good frame.
export function isValidSnapshot(payload: unknown): payload is SceneSnapshotPayload {
  if (typeof payload !== 'object' || payload === null) return false;
  const snap = payload as Record<string, unknown>;
  const scene = snap.scene as Record<string, unknown> | undefined;
  if (typeof scene !== 'object' || scene === null) return false;
  if (!Array.isArray(scene.objects) || !Array.isArray(scene.persons)) return false;
  if (typeof scene.robot !== 'object' || scene.robot === null) return false;
  for (const key of ['busy', 'visibility', 'reachability'] as const) {
    if (typeof snap[key] !== 'object' || snap[key] === null) return false;
  }
  return typeof snap.revision === 'number';
}
