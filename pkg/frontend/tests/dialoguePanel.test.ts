import { beforeEach, describe, expect, it } from 'vitest';
import snapshotFixture from './fixtures/softdrink_snapshot.json';
import { DialoguePanel } from '../src/dialoguePanel';
import { ClientSceneModel } from '../src/model';
import { WireMessage } from '../src/protocol';

let seq = 0;

function msg(type: WireMessage['type'], payload: object): WireMessage {
  seq += 1;
  return { type, seq, payload: payload as Record<string, unknown> };
}

function submitted(model: ClientSceneModel) {
  model.apply(
    msg('utterance_submit', {
      speaker: 'Felix',
      listener: 'Daniel',
      text: 'Can you hand me the red glass?',
      formatted: 'Felix said to Daniel: Can you hand me the red glass?',
    }),
  );
}

describe('DialoguePanel', () => {
  let root: HTMLElement;
  let model: ClientSceneModel;
  let panel: DialoguePanel;
  let sent: string[][];

  beforeEach(() => {
    seq = 0;
    root = document.createElement('div');
    document.body.replaceChildren(root);
    model = new ClientSceneModel();
    sent = [];
    panel = new DialoguePanel(root, (...args) => sent.push(args));
    model.apply(msg('scene_snapshot', snapshotFixture));
    panel.sync(model);
  });

  it('offers persons plus the robot in both dropdowns', () => {
    const selects = root.querySelectorAll('select');
    expect(selects).toHaveLength(2);
    for (const select of selects) {
      const values = [...select.querySelectorAll('option')].map((o) => o.value);
      expect(values).toEqual(['Daniel', 'Felix', 'the_robot']);
    }
  });

  it('submits the typed utterance through the handler and clears the box', () => {
    root.querySelector<HTMLSelectElement>('select[name=speaker]')!.value = 'Felix';
    root.querySelector<HTMLSelectElement>('select[name=listener]')!.value = 'Daniel';
    const input = root.querySelector<HTMLInputElement>('input[name=text]')!;
    input.value = 'Could you pour me some cola?';
    root.querySelector('form')!.dispatchEvent(new Event('submit', { cancelable: true }));
    expect(sent).toEqual([['Felix', 'Daniel', 'Could you pour me some cola?']]);
    expect(input.value).toBe('');
  });

  it('renders the formatted line, collapsible tools, and highlighted speech in order', () => {
    submitted(model);
    model.apply(
      msg('trace_event', {
        kind: 'tool',
        call: { call_id: 'c1', name: 'check_hindering_reasons', arguments: { person_name: 'Daniel' } },
        result: 'Daniel cannot reach it.',
      }),
    );
    model.apply(
      msg('trace_event', {
        kind: 'speak',
        call: { call_id: 'c2', name: 'speak', arguments: {} },
        result: 'You said to All: I will help Felix.',
        person: 'All',
        text: 'I will help Felix.',
      }),
    );
    panel.sync(model);
    const entries = [...root.querySelectorAll('.entry')];
    expect(entries.map((e) => e.className.split(' ')[1])).toEqual([
      'utterance',
      'tool',
      'speak',
    ]);
    expect(entries[0].textContent).toBe('Felix said to Daniel: Can you hand me the red glass?');
    const tool = entries[1] as HTMLDetailsElement;
    expect(tool.tagName).toBe('DETAILS');
    expect(tool.open).toBe(false);
    expect(tool.querySelector('summary')!.textContent).toBe('check_hindering_reasons');
    expect(tool.querySelector('pre')!.textContent).toContain('Daniel cannot reach it.');
    expect(entries[2].classList.contains('speak')).toBe(true);
    expect(entries[2].textContent).toBe('You said to All: I will help Felix.');
  });

  it('disables input while in flight and re-enables after stop', () => {
    const input = root.querySelector<HTMLInputElement>('input[name=text]')!;
    const button = root.querySelector('button')!;
    submitted(model);
    panel.sync(model);
    expect(input.disabled).toBe(true);
    expect(button.disabled).toBe(true);
    model.apply(msg('trace_event', { kind: 'stop' }));
    panel.sync(model);
    expect(input.disabled).toBe(false);
    expect(button.disabled).toBe(false);
  });

  it('renders the stop divider text', () => {
    submitted(model);
    model.apply(msg('trace_event', { kind: 'stop' }));
    panel.sync(model);
    const terminal = root.querySelector('.entry.terminal')!;
    expect(terminal.textContent).toBe('— interaction complete —');
  });

  it('marks action tool entries with their outcome', () => {
    submitted(model);
    model.apply(
      msg('trace_event', {
        kind: 'tool',
        call: { call_id: 'c3', name: 'hand_object_over_to_person', arguments: {} },
        result: 'You handed the_red_glass over to Felix.',
        is_action: true,
        action_succeeded: true,
        mutated: true,
      }),
    );
    panel.sync(model);
    const summary = root.querySelector('.entry.tool summary')!;
    expect(summary.textContent).toBe('hand_object_over_to_person ok');
  });

  it('shows the in-flight rejection as an inline notice', () => {
    model.apply(
      msg('error', { detail: 'interaction in progress', request: 'utterance_submit' }),
    );
    panel.sync(model);
    const notice = root.querySelector<HTMLElement>('.notice')!;
    expect(notice.hidden).toBe(false);
    expect(notice.textContent).toBe('interaction in progress');
  });

  it('does not duplicate entries when syncing twice', () => {
    submitted(model);
    model.apply(msg('trace_event', { kind: 'stop' }));
    panel.sync(model);
    panel.sync(model);
    expect(root.querySelectorAll('.entry')).toHaveLength(2);
  });
});
