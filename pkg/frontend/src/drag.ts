// Pointer -> set-descriptor editing. A drag tick takes the current set, the
// active handle, and the raw pointer position; it converts screen to world,
// clamps into the arena, rebuilds the descriptor, and returns a schema-valid
// target message. Degenerate geometry (zero-length normal, collapsed sides)
// is floored rather than rejected so a drag can never produce an invalid
// message mid-gesture.

import { buildTarget } from './messages';
import type { CircleSet, PlaneSet, RectangleSet, SetSpec, TargetMessage } from './schema';
import type { Arena, Vec2, ViewTransform } from './transform';
import { screenToWorld, toBodyFrame } from './transform';

// World-space play area: the default three-link arm has reach 3, and sets are
// kept a little inside so every clamped drag stays a sensible task.
export const ARENA: Arena = { xMin: -3.2, xMax: 3.2, yMin: -3.2, yMax: 3.2 };

const MIN_RADIUS = 0.05;
const MIN_SIDE = 0.05;
const MIN_NORMAL = 1e-6;
// Stand-in for an unbounded outer radius when the circle is in "outside"
// mode; far beyond any reachable point, still a valid band.
const OUTSIDE_R_OUTER = 1e3;

export type DragHandle =
  | { variant: 'point' }
  | { variant: 'plane'; part: 'normal' }
  | { variant: 'circle'; part: 'center' | 'radius' }
  | { variant: 'rectangle'; part: 'center' | 'corner' };

export type SetVariant = 'point' | 'plane' | 'circle' | 'rectangle';

export function clampToArena(p: Vec2, arena: Arena = ARENA): Vec2 {
  return {
    x: Math.min(arena.xMax, Math.max(arena.xMin, p.x)),
    y: Math.min(arena.yMax, Math.max(arena.yMin, p.y))
  };
}

// Starter descriptor for a mode switch, placed at the current tip position so
// the new task begins near-feasible.
export function defaultSet(variant: SetVariant, ee: Vec2): SetSpec {
  switch (variant) {
    case 'point':
      return { kind: 'point', target: [ee.x, ee.y] };
    case 'plane': {
      const norm = Math.hypot(ee.x, ee.y);
      const n: Vec2 = norm > MIN_NORMAL ? { x: ee.x / norm, y: ee.y / norm } : { x: 1, y: 0 };
      return { kind: 'plane', normal: [n.x, n.y], offset: norm, side: 'on' };
    }
    case 'circle':
      return { kind: 'circle', center: [ee.x, ee.y], r_outer: 0.4, r_inner: 0 };
    case 'rectangle':
      return {
        kind: 'rectangle',
        center: [ee.x, ee.y],
        length: 0.8,
        width: 0.4,
        angle: 0,
        region: 'in'
      };
  }
}

// The plane handle is a single point h: the constraint plane passes through h
// with normal along h (from the base), so dragging it sweeps both direction
// and offset.
function dragPlane(set: PlaneSet, world: Vec2): PlaneSet {
  const norm = Math.hypot(world.x, world.y);
  if (norm < MIN_NORMAL) {
    return set;
  }
  return { ...set, normal: [world.x / norm, world.y / norm], offset: norm };
}

function dragCircle(set: CircleSet, part: 'center' | 'radius', world: Vec2): CircleSet {
  if (part === 'center') {
    return { ...set, center: [world.x, world.y] };
  }
  const cx = set.center[0] ?? 0;
  const cy = set.center[1] ?? 0;
  const r = Math.max(MIN_RADIUS, Math.hypot(world.x - cx, world.y - cy));
  if (set.r_inner === set.r_outer) {
    // "on the circle" sub-variant keeps the band collapsed
    return { ...set, r_inner: r, r_outer: r };
  }
  if (set.r_outer >= OUTSIDE_R_OUTER) {
    // "outside" sub-variant drags the inner rim
    return { ...set, r_inner: r };
  }
  return { ...set, r_outer: r, r_inner: Math.min(set.r_inner, r) };
}

function dragRectangle(set: RectangleSet, part: 'center' | 'corner', world: Vec2): RectangleSet {
  const center: Vec2 = { x: set.center[0] ?? 0, y: set.center[1] ?? 0 };
  if (part === 'center') {
    return { ...set, center: [world.x, world.y] };
  }
  // Corner drag resizes about the fixed center: the pointer in the body frame
  // is the new half-extent on each axis.
  const body = toBodyFrame(center, set.angle, world);
  return {
    ...set,
    length: Math.max(MIN_SIDE, 2 * Math.abs(body.x)),
    width: Math.max(MIN_SIDE, 2 * Math.abs(body.y))
  };
}

export function applyDrag(set: SetSpec, handle: DragHandle, world: Vec2): SetSpec {
  switch (handle.variant) {
    case 'point':
      return set.kind === 'point' ? { ...set, target: [world.x, world.y] } : set;
    case 'plane':
      return set.kind === 'plane' ? dragPlane(set, world) : set;
    case 'circle':
      return set.kind === 'circle' ? dragCircle(set, handle.part, world) : set;
    case 'rectangle':
      return set.kind === 'rectangle' ? dragRectangle(set, handle.part, world) : set;
  }
}

// One drag tick: screen pixel in, schema-valid message out.
export function dragUpdate(
  set: SetSpec,
  handle: DragHandle,
  screenPoint: Vec2,
  view: ViewTransform,
  arena: Arena = ARENA
): { message: TargetMessage; set: SetSpec } {
  const world = clampToArena(screenToWorld(view, screenPoint), arena);
  const updated = applyDrag(set, handle, world);
  return { message: buildTarget(updated), set: updated };
}

// Inside/outside/on sub-variant toggles for the band-like sets.
export function toggleCircleMode(set: CircleSet, mode: 'inside' | 'on' | 'outside'): CircleSet {
  // The characteristic radius is the draggable rim: the inner one in outside
  // mode, the outer one otherwise.
  const r =
    set.r_outer >= OUTSIDE_R_OUTER
      ? Math.max(MIN_RADIUS, set.r_inner)
      : Math.max(MIN_RADIUS, set.r_outer);
  switch (mode) {
    case 'inside':
      return { ...set, r_inner: 0, r_outer: r };
    case 'on':
      return { ...set, r_inner: r, r_outer: r };
    case 'outside':
      return { ...set, r_inner: r, r_outer: OUTSIDE_R_OUTER };
  }
}

export function toggleRectangleRegion(set: RectangleSet, region: 'in' | 'out'): RectangleSet {
  return { ...set, region };
}
