import { describe, expect, it } from 'vitest';
import snapshotFixture from './fixtures/softdrink_snapshot.json';
import { ClientSceneModel } from '../src/model';
import { WireMessage } from '../src/protocol';

function snapshotMsg(seq: number, payload: object = snapshotFixture): WireMessage {
  return { type: 'scene_snapshot', seq, payload: payload as Record<string, unknown> };
}

function utteranceMsg(seq: number): WireMessage {
  return {
    type: 'utterance_submit',
    seq,
    payload: {
      speaker: 'Felix',
      listener: 'Daniel',
      text: 'hello',
      formatted: 'Felix said to Daniel: hello',
    },
  };
}

function traceMsg(seq: number, kind: string, extra: object = {}): WireMessage {
  return { type: 'trace_event', seq, payload: { kind, ...extra } };
}

describe('ClientSceneModel', () => {
  it('applies messages once and drops duplicates by seq', () => {
    const model = new ClientSceneModel();
    expect(model.apply(snapshotMsg(1))).toBe(true);
    expect(model.apply(snapshotMsg(1))).toBe(false);
    expect(model.apply(utteranceMsg(2))).toBe(true);
    expect(model.apply(utteranceMsg(2))).toBe(false);
    expect(model.transcript).toHaveLength(1);
    expect(model.lastSeq).toBe(2);
  });

  it('survives a replay overlap without duplicating transcript entries', () => {
    const model = new ClientSceneModel();
    const stream = [
      snapshotMsg(1),
      utteranceMsg(2),
      traceMsg(3, 'tool', { call: { call_id: 'c', name: 'get_objects', arguments: {} } }),
      traceMsg(4, 'stop'),
    ];
    for (const msg of stream.slice(0, 3)) model.apply(msg);
    // reconnect with since=2 replays 3 and 4
    for (const msg of stream.slice(2)) model.apply(msg);
    expect(model.transcript.map((e) => e.seq)).toEqual([2, 3, 4]);
  });

  it('tracks in-flight from submission echo to terminal event', () => {
    const model = new ClientSceneModel();
    model.apply(snapshotMsg(1));
    expect(model.inFlight).toBe(false);
    model.apply(utteranceMsg(2));
    expect(model.inFlight).toBe(true);
    model.apply(traceMsg(3, 'speak', { result: 'You said to All: hi' }));
    expect(model.inFlight).toBe(true);
    model.apply(traceMsg(4, 'stop'));
    expect(model.inFlight).toBe(false);
  });

  it('keeps the previous frame and raises a banner on a malformed snapshot', () => {
    const model = new ClientSceneModel();
    model.apply(snapshotMsg(1));
    const good = model.snapshot;
    expect(good).not.toBeNull();
    model.apply(snapshotMsg(2, { scene: 'not-a-scene' }));
    expect(model.snapshot).toBe(good);
    expect(model.banner).toContain('malformed');
    model.apply(snapshotMsg(3));
    expect(model.banner).toBeNull();
  });

  it('routes request rejections to the inline notice, not the banner', () => {
    const model = new ClientSceneModel();
    model.apply({
      type: 'error',
      seq: 1,
      payload: { detail: 'interaction in progress', request: 'utterance_submit' },
    });
    expect(model.notice).toBe('interaction in progress');
    expect(model.banner).toBeNull();
  });

  it('reads busy flags and the busy-marker id from the snapshot alone', () => {
    const model = new ClientSceneModel();
    model.apply(snapshotMsg(1));
    expect(model.busyMarkerId()).toBe('the_smartphone');
    expect(model.isBusy('Felix')).toBe(false);
    expect(model.isBusy('Daniel')).toBe(false);
    expect(model.persons()).toEqual(['Daniel', 'Felix']);
    expect(model.speakerChoices()).toEqual(['Daniel', 'Felix', 'the_robot']);
  });

  it('yields identical state when a fresh model replays the same stream', () => {
    const stream = [snapshotMsg(1), utteranceMsg(2), traceMsg(3, 'stop')];
    const first = new ClientSceneModel();
    const second = new ClientSceneModel();
    for (const msg of stream) first.apply(msg);
    for (const msg of stream) second.apply(msg);
    expect(JSON.stringify(first)).toBe(JSON.stringify(second));
  });
});
