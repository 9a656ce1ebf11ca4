// Bootstrap: pick a scene, create a session over HTTP, then hand everything
// live to the WebSocket. One session per tab.

import { SessionConnection } from './connection';
import { SceneControls } from './controls';
import { DialoguePanel } from './dialoguePanel';
import { ClientSceneModel } from './model';
import { SceneView } from './sceneView';
import './style.css';

async function listScenes(): Promise<string[]> {
  const response = await fetch('/scenes');
  const body = await response.json();
  return body.scenes as string[];
}

async function createSession(scene: string): Promise<string> {
  const response = await fetch('/sessions', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ scene }),
  });
  if (!response.ok) throw new Error(`session create failed: ${response.status}`);
  const body = await response.json();
  return body.session_id as string;
}

function wsBase(): string {
  const proto = location.protocol === 'https:' ? 'wss' : 'ws';
  return `${proto}://${location.host}`;
}

async function start(root: HTMLElement): Promise<void> {
  const banner = document.createElement('div');
  banner.className = 'banner';
  banner.hidden = true;

  const topBar = document.createElement('div');
  topBar.className = 'top-bar';
  const sceneSelect = document.createElement('select');
  sceneSelect.className = 'scene-select';
  const status = document.createElement('span');
  status.className = 'status';
  topBar.append(sceneSelect, status);

  const canvas = document.createElement('canvas');
  canvas.width = 1040;
  canvas.height = 712;
  canvas.className = 'scene-canvas';

  const dialogueRoot = document.createElement('div');
  const controlsRoot = document.createElement('div');
  const left = document.createElement('div');
  left.className = 'left-pane';
  left.append(canvas, controlsRoot);
  const layout = document.createElement('div');
  layout.className = 'layout';
  layout.append(left, dialogueRoot);
  root.append(topBar, banner, layout);

  const scenes = await listScenes();
  for (const name of scenes) {
    const option = document.createElement('option');
    option.value = name;
    option.textContent = name;
    sceneSelect.append(option);
  }
  const initial = scenes.includes('softdrink') ? 'softdrink' : scenes[0];
  sceneSelect.value = initial;
  sceneSelect.addEventListener('change', () => {
    location.search = `?scene=${encodeURIComponent(sceneSelect.value)}`;
  });
  const requested = new URLSearchParams(location.search).get('scene');
  if (requested && scenes.includes(requested)) sceneSelect.value = requested;

  const sessionId = await createSession(sceneSelect.value);
  const model = new ClientSceneModel();
  const connection = new SessionConnection(wsBase(), sessionId, () => model.lastSeq, (message) => {
    if (model.apply(message)) refresh();
  });
  connection.onStatusChange = (connected) => {
    status.textContent = connected ? `session ${sessionId}` : 'reconnecting...';
    status.classList.toggle('offline', !connected);
  };

  const view = new SceneView(canvas, (id, position) =>
    connection.sendControl({ command: 'move_object', object_name: id, position }),
  );
  const dialogue = new DialoguePanel(dialogueRoot, (speaker, listener, text) =>
    connection.submitUtterance(speaker, listener, text),
  );
  const controls = new SceneControls(controlsRoot, (payload) => connection.sendControl(payload));

  function refresh(): void {
    banner.hidden = model.banner === null;
    banner.textContent = model.banner ?? '';
    view.render(model.snapshot);
    view.setEnabled(!model.inFlight);
    dialogue.sync(model);
    controls.sync(model);
  }

  connection.connect();
  refresh();
}

const rootElement = document.getElementById('app');
if (rootElement) {
  start(rootElement).catch((error) => {
    rootElement.textContent = `failed to start: ${error}`;
  });
}
