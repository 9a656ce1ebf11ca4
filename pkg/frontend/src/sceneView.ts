// Top-down plan view. buildDrawList is pure (snapshot in, world-space draw
// ops out) so tests can assert on geometry-free rendering decisions without
// a canvas; SceneView paints the ops and turns pointer drags into
// move_object controls. Visibility and reachability are read straight from
// the snapshot matrices, never recomputed.

import { SceneSnapshotPayload, Vec3 } from './protocol';

export type DrawOp =
  | { op: 'table'; x: number; y: number; w: number; h: number }
  | { op: 'reach_circle'; agent: string; cx: number; cy: number; r: number }
  | { op: 'gaze_ray'; person: string; x1: number; y1: number; x2: number; y2: number }
  | {
      op: 'occlusion_ray';
      person: string;
      object: string;
      x1: number;
      y1: number;
      x2: number;
      y2: number;
    }
  | {
      op: 'object';
      id: string;
      x: number;
      y: number;
      w: number;
      h: number;
      fill: string | null;
      heldBy: string | null;
    }
  | { op: 'person'; id: string; x: number; y: number; busy: boolean }
  | { op: 'phone_badge'; person: string; x: number; y: number }
  | { op: 'robot'; id: string; x: number; y: number; attention: string | null };

export const VIEW_BOX = { x: -1.9, y: -1.3, w: 3.8, h: 2.6 };
const TABLE = { x: -0.8, y: -0.55, w: 1.6, h: 1.1 };
const GAZE_RAY_LENGTH = 1.1;

export function buildDrawList(snapshot: SceneSnapshotPayload): DrawOp[] {
  const ops: DrawOp[] = [{ op: 'table', ...TABLE }];
  const { scene, busy, visibility } = snapshot;

  for (const person of scene.persons) {
    ops.push({
      op: 'reach_circle',
      agent: person.id,
      cx: person.reach_origin[0],
      cy: person.reach_origin[1],
      r: person.reach_radius,
    });
  }
  ops.push({
    op: 'reach_circle',
    agent: scene.robot.id,
    cx: scene.robot.reach_origin[0],
    cy: scene.robot.reach_origin[1],
    r: scene.robot.reach_radius,
  });

  for (const person of scene.persons) {
    const [ex, ey] = person.eye;
    const [gx, gy] = person.gaze;
    const norm = Math.hypot(gx, gy) || 1;
    ops.push({
      op: 'gaze_ray',
      person: person.id,
      x1: ex,
      y1: ey,
      x2: ex + (gx / norm) * GAZE_RAY_LENGTH,
      y2: ey + (gy / norm) * GAZE_RAY_LENGTH,
    });
    const blocked = visibility[person.id] ?? {};
    for (const object of scene.objects) {
      if (blocked[object.id] === false) {
        ops.push({
          op: 'occlusion_ray',
          person: person.id,
          object: object.id,
          x1: ex,
          y1: ey,
          x2: object.center[0],
          y2: object.center[1],
        });
      }
    }
  }

  for (const object of scene.objects) {
    ops.push({
      op: 'object',
      id: object.id,
      x: object.center[0],
      y: object.center[1],
      w: object.half_extents[0] * 2,
      h: object.half_extents[1] * 2,
      fill: object.fill_contents,
      heldBy: object.held_by,
    });
  }

  for (const person of scene.persons) {
    const [ex, ey] = person.eye;
    ops.push({ op: 'person', id: person.id, x: ex, y: ey, busy: busy[person.id] ?? false });
    if (busy[person.id]) {
      ops.push({ op: 'phone_badge', person: person.id, x: ex, y: ey + 0.12 });
    }
  }

  ops.push({
    op: 'robot',
    id: scene.robot.id,
    x: scene.robot.reach_origin[0],
    y: scene.robot.reach_origin[1],
    attention: scene.robot.attention_target,
  });
  return ops;
}

const AGENT_COLORS = ['#e07b39', '#7b5ce0', '#3a9d6c', '#c94f7c'];

function agentColor(index: number): string {
  return AGENT_COLORS[index % AGENT_COLORS.length];
}

export class SceneView {
  private canvas: HTMLCanvasElement;
  private snapshot: SceneSnapshotPayload | null = null;
  private enabled = true;
  private drag: { id: string; z: number; x: number; y: number } | null = null;
  private onMoveObject: (id: string, position: Vec3) => void;

  constructor(canvas: HTMLCanvasElement, onMoveObject: (id: string, position: Vec3) => void) {
    this.canvas = canvas;
    this.onMoveObject = onMoveObject;
    canvas.addEventListener('pointerdown', (e) => this.pointerDown(e));
    canvas.addEventListener('pointermove', (e) => this.pointerMove(e));
    canvas.addEventListener('pointerup', (e) => this.pointerUp(e));
  }

  setEnabled(enabled: boolean): void {
    this.enabled = enabled;
    this.canvas.style.cursor = enabled ? 'grab' : 'not-allowed';
  }

  render(snapshot: SceneSnapshotPayload | null): void {
    this.snapshot = snapshot;
    this.paint();
  }

  private scale(): number {
    return Math.min(this.canvas.width / VIEW_BOX.w, this.canvas.height / VIEW_BOX.h);
  }

  private toPixel(wx: number, wy: number): [number, number] {
    const s = this.scale();
    return [
      this.canvas.width / 2 + (wx - (VIEW_BOX.x + VIEW_BOX.w / 2)) * s,
      this.canvas.height / 2 - (wy - (VIEW_BOX.y + VIEW_BOX.h / 2)) * s,
    ];
  }

  private toWorld(px: number, py: number): [number, number] {
    const s = this.scale();
    return [
      (px - this.canvas.width / 2) / s + VIEW_BOX.x + VIEW_BOX.w / 2,
      -(py - this.canvas.height / 2) / s + VIEW_BOX.y + VIEW_BOX.h / 2,
    ];
  }

  private eventWorld(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const px = ((e.clientX - rect.left) / (rect.width || 1)) * this.canvas.width;
    const py = ((e.clientY - rect.top) / (rect.height || 1)) * this.canvas.height;
    return this.toWorld(px, py);
  }

  private pointerDown(e: PointerEvent): void {
    if (!this.enabled || !this.snapshot) return;
    const [wx, wy] = this.eventWorld(e);
    // topmost first so stacked footprints pick the one drawn last
    const objects = [...this.snapshot.scene.objects].reverse();
    for (const object of objects) {
      const [cx, cy] = object.center;
      const pad = 0.02; // small touch slack around tiny footprints
      if (
        Math.abs(wx - cx) <= object.half_extents[0] + pad &&
        Math.abs(wy - cy) <= object.half_extents[1] + pad
      ) {
        this.drag = { id: object.id, z: object.center[2], x: wx, y: wy };
        this.canvas.setPointerCapture?.(e.pointerId);
        return;
      }
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.drag) return;
    const [wx, wy] = this.eventWorld(e);
    this.drag.x = wx;
    this.drag.y = wy;
    this.paint();
  }

  private pointerUp(e: PointerEvent): void {
    if (!this.drag) return;
    const [wx, wy] = this.eventWorld(e);
    const { id, z } = this.drag;
    this.drag = null;
    this.onMoveObject(id, [Number(wx.toFixed(3)), Number(wy.toFixed(3)), z]);
  }

  private paint(): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return; // headless test environments have no 2d context
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.fillStyle = '#f4efe7';
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.snapshot) return;
    const s = this.scale();
    const agents = [...this.snapshot.scene.persons.map((p) => p.id), this.snapshot.scene.robot.id];
    const colorOf = (agent: string) => agentColor(Math.max(0, agents.indexOf(agent)));

    for (const op of buildDrawList(this.snapshot)) {
      switch (op.op) {
        case 'table': {
          const [x, y] = this.toPixel(op.x, op.y + op.h);
          ctx.fillStyle = '#e0cda9';
          ctx.strokeStyle = '#b09a72';
          ctx.fillRect(x, y, op.w * s, op.h * s);
          ctx.strokeRect(x, y, op.w * s, op.h * s);
          break;
        }
        case 'reach_circle': {
          const [cx, cy] = this.toPixel(op.cx, op.cy);
          ctx.beginPath();
          ctx.arc(cx, cy, op.r * s, 0, Math.PI * 2);
          ctx.strokeStyle = colorOf(op.agent);
          ctx.globalAlpha = 0.35;
          ctx.setLineDash([]);
          ctx.lineWidth = 1.5;
          ctx.stroke();
          ctx.globalAlpha = 1;
          break;
        }
        case 'gaze_ray': {
          const [x1, y1] = this.toPixel(op.x1, op.y1);
          const [x2, y2] = this.toPixel(op.x2, op.y2);
          ctx.beginPath();
          ctx.moveTo(x1, y1);
          ctx.lineTo(x2, y2);
          ctx.strokeStyle = colorOf(op.person);
          ctx.setLineDash([]);
          ctx.lineWidth = 1;
          ctx.stroke();
          break;
        }
        case 'occlusion_ray': {
          const [x1, y1] = this.toPixel(op.x1, op.y1);
          const [x2, y2] = this.toPixel(op.x2, op.y2);
          ctx.beginPath();
          ctx.moveTo(x1, y1);
          ctx.lineTo(x2, y2);
          ctx.strokeStyle = '#c0392b';
          ctx.setLineDash([6, 5]);
          ctx.lineWidth = 1;
          ctx.globalAlpha = 0.7;
          ctx.stroke();
          ctx.setLineDash([]);
          ctx.globalAlpha = 1;
          break;
        }
        case 'object': {
          const dragging = this.drag && this.drag.id === op.id;
          const x = dragging ? this.drag!.x : op.x;
          const y = dragging ? this.drag!.y : op.y;
          const [px, py] = this.toPixel(x - op.w / 2, y + op.h / 2);
          ctx.fillStyle = op.fill ? '#7fb2d9' : '#9aa5ad';
          ctx.strokeStyle = op.heldBy ? '#2c3e50' : '#5d6d7a';
          ctx.lineWidth = op.heldBy ? 2.5 : 1;
          ctx.globalAlpha = dragging ? 0.6 : 1;
          ctx.fillRect(px, py, op.w * s, op.h * s);
          ctx.strokeRect(px, py, op.w * s, op.h * s);
          ctx.globalAlpha = 1;
          ctx.fillStyle = '#333';
          ctx.font = '11px system-ui, sans-serif';
          ctx.textAlign = 'center';
          const label = op.fill ? `${op.id} (${op.fill})` : op.id;
          ctx.fillText(label, px + (op.w * s) / 2, py + op.h * s + 12);
          break;
        }
        case 'person': {
          const [px, py] = this.toPixel(op.x, op.y);
          ctx.beginPath();
          ctx.arc(px, py, 12, 0, Math.PI * 2);
          ctx.fillStyle = colorOf(op.id);
          ctx.fill();
          ctx.fillStyle = '#333';
          ctx.font = 'bold 12px system-ui, sans-serif';
          ctx.textAlign = 'center';
          ctx.fillText(op.id, px, py - 18);
          break;
        }
        case 'phone_badge': {
          const [px, py] = this.toPixel(op.x, op.y);
          ctx.fillStyle = '#222';
          ctx.fillRect(px + 8, py - 8, 8, 14);
          ctx.fillStyle = '#7fd97f';
          ctx.fillRect(px + 9.5, py - 6, 5, 9);
          break;
        }
        case 'robot': {
          const [px, py] = this.toPixel(op.x, op.y);
          ctx.fillStyle = '#666';
          ctx.fillRect(px - 9, py - 9, 18, 18);
          ctx.fillStyle = '#333';
          ctx.font = '11px system-ui, sans-serif';
          ctx.textAlign = 'center';
          ctx.fillText(op.id, px, py + 22);
          break;
        }
      }
    }
  }
}
