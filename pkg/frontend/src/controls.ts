// Scene controls: per-person smartphone toggles and a reset button.
// (Object dragging lives in SceneView.) All buttons are disabled while an
// interaction is in flight; the server also rejects conflicting controls,
// which surfaces as an inline notice.

import { ClientSceneModel } from './model';
import { ControlPayload } from './protocol';

export class SceneControls {
  readonly root: HTMLElement;
  private sendControl: (payload: ControlPayload) => void;
  private phoneButtons = new Map<string, HTMLButtonElement>();
  private resetButton: HTMLButtonElement;

  constructor(root: HTMLElement, sendControl: (payload: ControlPayload) => void) {
    this.root = root;
    this.sendControl = sendControl;
    root.classList.add('controls');
    this.resetButton = document.createElement('button');
    this.resetButton.type = 'button';
    this.resetButton.className = 'reset';
    this.resetButton.textContent = 'Reset scene';
    this.resetButton.addEventListener('click', () =>
      this.sendControl({ command: 'reset_scene' }),
    );
  }

  sync(model: ClientSceneModel): void {
    const marker = model.busyMarkerId();
    for (const person of model.persons()) {
      let button = this.phoneButtons.get(person);
      if (!button) {
        button = document.createElement('button');
        button.type = 'button';
        button.className = 'phone-toggle';
        button.dataset.person = person;
        this.phoneButtons.set(person, button);
        this.root.append(button);
        button.addEventListener('click', () => {
          const id = model.busyMarkerId();
          if (!id) return;
          this.sendControl({
            command: model.isBusy(person) ? 'detach' : 'attach',
            person_name: person,
            object_name: id,
          });
        });
      }
      button.textContent = model.isBusy(person)
        ? `${person}: put phone down`
        : `${person}: pick up phone`;
      button.disabled = model.inFlight || marker === null;
    }
    if (!this.resetButton.isConnected) this.root.append(this.resetButton);
    this.resetButton.disabled = model.inFlight;
  }
}
