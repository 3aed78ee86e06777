// World <-> screen mapping and the rectangle parametrization shared with the
// solver side: a rotated rectangle is the axis-aligned box seen through
// R(theta) * D, so its corners are center + R(theta) * (±L/2, ±W/2).

export type Vec2 = { x: number; y: number };

export function vec(x: number, y: number): Vec2 {
  return { x, y };
}

export function fromArray(p: readonly number[]): Vec2 {
  return { x: p[0] ?? 0, y: p[1] ?? 0 };
}

export function toArray(p: Vec2): [number, number] {
  return [p.x, p.y];
}

export function distance(a: Vec2, b: Vec2): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}

export type Arena = {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
};

// Uniform-scale affine world->screen map with the y axis flipped (screen y
// grows downward). Uniform scale keeps circles circular; the map is invertible
// by construction and screenToWorld is its exact inverse.
export type ViewTransform = {
  scale: number;
  offsetX: number;
  offsetY: number;
};

export function fitArena(arena: Arena, canvasWidth: number, canvasHeight: number): ViewTransform {
  const spanX = arena.xMax - arena.xMin;
  const spanY = arena.yMax - arena.yMin;
  const scale = Math.min(canvasWidth / spanX, canvasHeight / spanY);
  const centerX = (arena.xMin + arena.xMax) / 2;
  const centerY = (arena.yMin + arena.yMax) / 2;
  return {
    scale,
    offsetX: canvasWidth / 2 - scale * centerX,
    offsetY: canvasHeight / 2 + scale * centerY
  };
}

export function worldToScreen(view: ViewTransform, p: Vec2): Vec2 {
  return {
    x: view.scale * p.x + view.offsetX,
    y: -view.scale * p.y + view.offsetY
  };
}

export function screenToWorld(view: ViewTransform, p: Vec2): Vec2 {
  return {
    x: (p.x - view.offsetX) / view.scale,
    y: -(p.y - view.offsetY) / view.scale
  };
}

// Corners of a rotated rectangle in world coordinates, counterclockwise.
export function rectangleCorners(
  center: Vec2,
  angle: number,
  length: number,
  width: number
): [Vec2, Vec2, Vec2, Vec2] {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const hl = length / 2;
  const hw = width / 2;
  const corner = (bx: number, by: number): Vec2 => ({
    x: center.x + c * bx - s * by,
    y: center.y + s * bx + c * by
  });
  return [corner(hl, hw), corner(-hl, hw), corner(-hl, -hw), corner(hl, -hw)];
}

// Express a world point in the rectangle's body frame (inverse of the
// R(theta) map above, about the center).
export function toBodyFrame(center: Vec2, angle: number, p: Vec2): Vec2 {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const dx = p.x - center.x;
  const dy = p.y - center.y;
  return { x: c * dx + s * dy, y: -s * dx + c * dy };
}

// Forward kinematics for drawing: joint positions of the planar chain, base
// at the origin, angles cumulative. Returns link_lengths.length + 1 points;
// the last one is the tip. Used only to place pixels; the pose itself always
// comes from the service.
export function chainPoints(linkLengths: readonly number[], q: readonly number[]): Vec2[] {
  const points: Vec2[] = [{ x: 0, y: 0 }];
  let angle = 0;
  let x = 0;
  let y = 0;
  for (let i = 0; i < linkLengths.length; i += 1) {
    angle += q[i] ?? 0;
    x += (linkLengths[i] ?? 0) * Math.cos(angle);
    y += (linkLengths[i] ?? 0) * Math.sin(angle);
    points.push({ x, y });
  }
  return points;
}
