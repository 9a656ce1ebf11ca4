// Dialogue panel: speaker/listener dropdowns plus a streaming transcript.
// Entries are appended incrementally keyed by seq, so re-syncing after a
// reconnect never duplicates lines and open tool-call disclosures survive
// updates.

import { ClientSceneModel, TranscriptEntry } from './model';
import { TraceEventPayload } from './protocol';

export interface SubmitHandler {
  (speaker: string, listener: string, text: string): void;
}

export class DialoguePanel {
  readonly root: HTMLElement;
  private speakerSelect: HTMLSelectElement;
  private listenerSelect: HTMLSelectElement;
  private textInput: HTMLInputElement;
  private submitButton: HTMLButtonElement;
  private noticeBox: HTMLElement;
  private transcriptBox: HTMLElement;
  private renderedSeq = 0;
  private knownChoices = '';

  constructor(root: HTMLElement, onSubmit: SubmitHandler) {
    this.root = root;
    root.classList.add('dialogue');
    this.transcriptBox = document.createElement('div');
    this.transcriptBox.className = 'transcript';
    const form = document.createElement('form');
    form.className = 'utterance-form';
    this.speakerSelect = document.createElement('select');
    this.speakerSelect.name = 'speaker';
    this.listenerSelect = document.createElement('select');
    this.listenerSelect.name = 'listener';
    this.textInput = document.createElement('input');
    this.textInput.type = 'text';
    this.textInput.name = 'text';
    this.textInput.placeholder = 'Say something...';
    this.submitButton = document.createElement('button');
    this.submitButton.type = 'submit';
    this.submitButton.textContent = 'Send';
    this.noticeBox = document.createElement('div');
    this.noticeBox.className = 'notice';
    this.noticeBox.hidden = true;
    const arrow = document.createElement('span');
    arrow.textContent = 'to';
    form.append(this.speakerSelect, arrow, this.listenerSelect, this.textInput, this.submitButton);
    form.addEventListener('submit', (e) => {
      e.preventDefault();
      const text = this.textInput.value.trim();
      if (!text) return;
      onSubmit(this.speakerSelect.value, this.listenerSelect.value, text);
      this.textInput.value = '';
    });
    root.append(this.transcriptBox, this.noticeBox, form);
  }

  sync(model: ClientSceneModel): void {
    this.syncChoices(model);
    for (const entry of model.transcript) {
      if (entry.seq > this.renderedSeq) {
        this.transcriptBox.append(renderEntry(entry));
        this.renderedSeq = entry.seq;
      }
    }
    this.setInFlight(model.inFlight);
    this.noticeBox.hidden = model.notice === null;
    this.noticeBox.textContent = model.notice ?? '';
    this.transcriptBox.scrollTop = this.transcriptBox.scrollHeight;
  }

  private syncChoices(model: ClientSceneModel): void {
    const choices = model.speakerChoices();
    const key = choices.join(',');
    if (!choices.length || key === this.knownChoices) return;
    this.knownChoices = key;
    for (const select of [this.speakerSelect, this.listenerSelect]) {
      const current = select.value;
      select.textContent = '';
      for (const id of choices) {
        const option = document.createElement('option');
        option.value = id;
        option.textContent = id;
        select.append(option);
      }
      if (choices.includes(current)) select.value = current;
    }
    if (this.speakerSelect.value === this.listenerSelect.value && choices.length > 1) {
      this.listenerSelect.value = choices[1];
    }
  }

  private setInFlight(inFlight: boolean): void {
    this.textInput.disabled = inFlight;
    this.submitButton.disabled = inFlight;
    this.speakerSelect.disabled = inFlight;
    this.listenerSelect.disabled = inFlight;
  }
}

function renderEntry(entry: TranscriptEntry): HTMLElement {
  if (entry.kind === 'utterance') {
    const line = document.createElement('div');
    line.className = 'entry utterance';
    line.textContent = entry.payload.formatted;
    return line;
  }
  return renderTrace(entry.event);
}

function renderTrace(event: TraceEventPayload): HTMLElement {
  switch (event.kind) {
    case 'speak': {
      const line = document.createElement('div');
      line.className = 'entry speak';
      line.textContent = event.result ?? event.text ?? '';
      return line;
    }
    case 'tool': {
      const details = document.createElement('details');
      details.className = `entry tool${event.error ? ' tool-error' : ''}`;
      const summary = document.createElement('summary');
      const name = event.call?.name ?? 'tool';
      summary.textContent = event.is_action
        ? `${name} ${event.action_succeeded ? 'ok' : 'failed'}`
        : name;
      const body = document.createElement('pre');
      body.textContent = `${JSON.stringify(event.call?.arguments ?? {})}\n${event.result ?? ''}`;
      details.append(summary, body);
      return details;
    }
    case 'assistant': {
      const line = document.createElement('div');
      line.className = 'entry assistant';
      line.textContent = event.text ?? '';
      return line;
    }
    case 'stop': {
      const line = document.createElement('div');
      line.className = 'entry terminal';
      line.textContent = '— interaction complete —';
      return line;
    }
    default: {
      const line = document.createElement('div');
      line.className = `entry terminal ${event.kind}`;
      line.textContent =
        event.kind === 'round_limit'
          ? 'round limit reached'
          : `backend error: ${event.text ?? 'unknown'}`;
      return line;
    }
  }
}
