// Client-side session state. One instance mirrors one server session: the
// latest scene snapshot, the transcript, and the in-flight flag, all driven
// exclusively by WireMessages and deduplicated on seq, so replays after a
// reconnect are harmless and a fresh model fed the same messages renders
// identically.

import {
  ErrorPayload,
  SceneSnapshotPayload,
  TraceEventPayload,
  UtterancePayload,
  WireMessage,
  isTerminalKind,
  isValidSnapshot,
} from './protocol';

export interface UtteranceEntry {
  kind: 'utterance';
  seq: number;
  payload: UtterancePayload;
}

export interface TraceEntry {
  kind: 'trace';
  seq: number;
  event: TraceEventPayload;
}

export type TranscriptEntry = UtteranceEntry | TraceEntry;

export class ClientSceneModel {
  lastSeq = 0;
  snapshot: SceneSnapshotPayload | null = null;
  transcript: TranscriptEntry[] = [];
  inFlight = false;
  // banner: sticky malformed-frame errors; notice: inline request rejections
  banner: string | null = null;
  notice: string | null = null;

  // Apply one message; false means it was a duplicate (or stale) and
  // changed nothing.
  apply(message: WireMessage): boolean {
    if (message.seq <= this.lastSeq) return false;
    this.lastSeq = message.seq;
    switch (message.type) {
      case 'scene_snapshot': {
        if (!isValidSnapshot(message.payload)) {
          this.banner = 'malformed scene snapshot; keeping previous frame';
          break;
        }
        this.snapshot = message.payload;
        this.banner = null;
        break;
      }
      case 'utterance_submit': {
        const payload = message.payload as unknown as UtterancePayload;
        this.transcript.push({ kind: 'utterance', seq: message.seq, payload });
        this.inFlight = true;
        this.notice = null;
        break;
      }
      case 'trace_event': {
        const event = message.payload as unknown as TraceEventPayload;
        this.transcript.push({ kind: 'trace', seq: message.seq, event });
        if (isTerminalKind(event.kind)) this.inFlight = false;
        break;
      }
      case 'error': {
        const payload = message.payload as unknown as ErrorPayload;
        if (payload.request) {
          this.notice = payload.detail;
        } else {
          this.banner = payload.detail;
        }
        break;
      }
      case 'control':
      case 'ack':
        break;
    }
    return true;
  }

  persons(): string[] {
    if (!this.snapshot) return [];
    return this.snapshot.scene.persons.map((p) => p.id);
  }

  speakerChoices(): string[] {
    const ids = this.persons();
    return this.snapshot ? [...ids, this.snapshot.scene.robot.id] : ids;
  }

  busyMarkerId(): string | null {
    if (!this.snapshot) return null;
    const marker = this.snapshot.scene.objects.find((o) =>
      o.affordances.includes('busy_marker'),
    );
    return marker ? marker.id : null;
  }

  isBusy(person: string): boolean {
    return this.snapshot?.busy[person] ?? false;
  }
}
