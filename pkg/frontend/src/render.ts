// Pure canvas rendering of a SceneState. Takes the 2D-context subset it
// actually uses, so tests can pass a recording stub and assert on draw calls
// instead of pixels.

import type { SceneState } from './scene';
import type { SetSpec } from './schema';
import type { Vec2, ViewTransform } from './transform';
import { chainPoints, rectangleCorners, worldToScreen } from './transform';

// The slice of CanvasRenderingContext2D the renderer needs.
export interface Draw2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

const COLOR_ARM = '#1f3a5f';
const COLOR_JOINT = '#0f1f33';
const COLOR_SET = '#c1292e';
const COLOR_SET_FILL = 'rgba(193, 41, 46, 0.12)';
const COLOR_TRACE = '#4a7ab5';
const COLOR_TEXT = '#222222';
const PENDING_DASH = [6, 4];

function polyline(ctx: Draw2D, view: ViewTransform, points: Vec2[]): void {
  if (points.length === 0) {
    return;
  }
  ctx.beginPath();
  const first = worldToScreen(view, points[0] as Vec2);
  ctx.moveTo(first.x, first.y);
  for (let i = 1; i < points.length; i += 1) {
    const p = worldToScreen(view, points[i] as Vec2);
    ctx.lineTo(p.x, p.y);
  }
  ctx.stroke();
}

function dot(ctx: Draw2D, view: ViewTransform, p: Vec2, radiusPx: number): void {
  const s = worldToScreen(view, p);
  ctx.beginPath();
  ctx.arc(s.x, s.y, radiusPx, 0, 2 * Math.PI);
  ctx.fill();
}

function drawSet(ctx: Draw2D, view: ViewTransform, set: SetSpec, pending: boolean): void {
  ctx.strokeStyle = COLOR_SET;
  ctx.fillStyle = COLOR_SET_FILL;
  ctx.lineWidth = 2;
  ctx.setLineDash(pending ? PENDING_DASH : []);

  switch (set.kind) {
    case 'point': {
      ctx.fillStyle = COLOR_SET;
      dot(ctx, view, { x: set.target[0] ?? 0, y: set.target[1] ?? 0 }, 6);
      break;
    }
    case 'plane': {
      // Draw the boundary line through offset * n, extended well past the
      // arena, and shade the feasible side for below/above variants.
      const nx = set.normal[0] ?? 0;
      const ny = set.normal[1] ?? 1;
      const norm = Math.hypot(nx, ny) || 1;
      const ux = nx / norm;
      const uy = ny / norm;
      const anchor: Vec2 = { x: (set.offset * ux) / norm, y: (set.offset * uy) / norm };
      const tangent: Vec2 = { x: -uy, y: ux };
      const span = 10;
      const a: Vec2 = { x: anchor.x - span * tangent.x, y: anchor.y - span * tangent.y };
      const b: Vec2 = { x: anchor.x + span * tangent.x, y: anchor.y + span * tangent.y };
      polyline(ctx, view, [a, b]);
      if (set.side !== 'on') {
        const sign = set.side === 'below' ? -1 : 1;
        const depth = 10;
        const a2: Vec2 = { x: a.x + sign * depth * ux, y: a.y + sign * depth * uy };
        const b2: Vec2 = { x: b.x + sign * depth * ux, y: b.y + sign * depth * uy };
        const sa = worldToScreen(view, a);
        const sb = worldToScreen(view, b);
        const sb2 = worldToScreen(view, b2);
        const sa2 = worldToScreen(view, a2);
        ctx.beginPath();
        ctx.moveTo(sa.x, sa.y);
        ctx.lineTo(sb.x, sb.y);
        ctx.lineTo(sb2.x, sb2.y);
        ctx.lineTo(sa2.x, sa2.y);
        ctx.closePath();
        ctx.fill();
      }
      break;
    }
    case 'circle': {
      const center: Vec2 = { x: set.center[0] ?? 0, y: set.center[1] ?? 0 };
      const s = worldToScreen(view, center);
      ctx.beginPath();
      ctx.arc(s.x, s.y, set.r_outer * view.scale, 0, 2 * Math.PI);
      ctx.stroke();
      if (set.r_inner > 0) {
        ctx.beginPath();
        ctx.arc(s.x, s.y, set.r_inner * view.scale, 0, 2 * Math.PI);
        ctx.stroke();
      }
      break;
    }
    case 'rectangle': {
      // Same parametrization the solver sets use: corners via R(theta) * D.
      const center: Vec2 = { x: set.center[0] ?? 0, y: set.center[1] ?? 0 };
      const corners = rectangleCorners(center, set.angle, set.length, set.width);
      const screen = corners.map((c) => worldToScreen(view, c));
      ctx.beginPath();
      ctx.moveTo((screen[0] as Vec2).x, (screen[0] as Vec2).y);
      for (let i = 1; i < screen.length; i += 1) {
        ctx.lineTo((screen[i] as Vec2).x, (screen[i] as Vec2).y);
      }
      ctx.closePath();
      if (set.region === 'in') {
        ctx.fill();
      }
      ctx.stroke();
      break;
    }
    case 'box': {
      const lo: Vec2 = { x: set.lower[0] ?? -10, y: set.lower[1] ?? -10 };
      const hi: Vec2 = { x: set.upper[0] ?? 10, y: set.upper[1] ?? 10 };
      const corners: Vec2[] = [lo, { x: hi.x, y: lo.y }, hi, { x: lo.x, y: hi.y }, lo];
      polyline(ctx, view, corners);
      break;
    }
  }
  ctx.setLineDash([]);
}

export function renderScene(
  ctx: Draw2D,
  state: SceneState,
  view: ViewTransform,
  canvasWidth: number,
  canvasHeight: number
): void {
  ctx.clearRect(0, 0, canvasWidth, canvasHeight);
  ctx.globalAlpha = 1;

  // tip trace under everything else
  if (state.eePath.length > 1) {
    ctx.strokeStyle = COLOR_TRACE;
    ctx.lineWidth = 1;
    ctx.setLineDash([]);
    polyline(ctx, view, state.eePath);
  }

  if (state.set !== null) {
    drawSet(ctx, view, state.set, state.pending);
  }

  // the arm, joints last so they sit on top of the links
  const joints = chainPoints(state.linkLengths, state.q);
  ctx.strokeStyle = COLOR_ARM;
  ctx.lineWidth = 5;
  ctx.setLineDash([]);
  polyline(ctx, view, joints);
  ctx.fillStyle = COLOR_JOINT;
  for (const joint of joints) {
    dot(ctx, view, joint, 4);
  }

  // readouts: residual verbatim as reported, no client-side recomputation
  ctx.fillStyle = COLOR_TEXT;
  ctx.font = '13px monospace';
  const residualText = state.residual === null ? 'residual: -' : `residual: ${state.residual}`;
  ctx.fillText(residualText, 12, 20);
  ctx.fillText(`status: ${state.connection}`, 12, 38);
  if (state.infeasible) {
    ctx.fillText('infeasible', 12, 56);
  }
  if (state.budget) {
    ctx.fillText('budget exceeded', 12, 74);
  }
  if (state.lastError !== null) {
    ctx.fillText(`error: ${state.lastError}`, 12, 92);
  }
}
