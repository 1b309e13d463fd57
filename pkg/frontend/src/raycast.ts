// Pure raycasting math for the first-person view: rays against the world's
// axis-aligned obstacle rectangles. No DOM dependencies, so the projection
// can be tested against analytic distances.

export interface Rect {
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
}

export const DEFAULT_FOV = Math.PI / 2; // 90 degrees
export const WALL_HEIGHT = 1.0; // meters
export const EYE_HEIGHT = 0.5; // camera sits mid-wall

/** Distance along a ray (origin, unit-ish direction) to an AABB, slab method.
 * Returns null on a miss; 0 when the origin is inside the rectangle. */
export function rayRectDistance(
  ox: number, oy: number, dx: number, dy: number, rect: Rect,
): number | null {
  let tEnter = -Infinity;
  let tExit = Infinity;

  for (const [origin, dir, lo, hi] of [
    [ox, dx, rect.xmin, rect.xmax],
    [oy, dy, rect.ymin, rect.ymax],
  ] as const) {
    if (dir === 0) {
      if (origin < lo || origin > hi) return null;
      continue;
    }
    const t1 = (lo - origin) / dir;
    const t2 = (hi - origin) / dir;
    tEnter = Math.max(tEnter, Math.min(t1, t2));
    tExit = Math.min(tExit, Math.max(t1, t2));
  }
  if (tExit < tEnter || tExit < 0) return null;
  return tEnter >= 0 ? tEnter : 0;
}

export function castRay(
  ox: number, oy: number, angle: number, rects: Rect[], maxRange = 20,
): number | null {
  const dx = Math.cos(angle);
  const dy = Math.sin(angle);
  let best: number | null = null;
  for (const rect of rects) {
    const dist = rayRectDistance(ox, oy, dx, dy, rect);
    if (dist !== null && dist <= maxRange && (best === null || dist < best)) {
      best = dist;
    }
  }
  return best;
}

export interface ColumnHit {
  dist: number | null; // euclidean distance along the ray, null = open space
  perpDist: number | null; // fisheye-corrected distance used for projection
}

/** One ray per screen column across the field of view. */
export function renderColumns(
  x: number, y: number, theta: number, rects: Rect[],
  columns: number, fov = DEFAULT_FOV, maxRange = 20,
): ColumnHit[] {
  const out: ColumnHit[] = [];
  for (let i = 0; i < columns; i++) {
    const offset = ((i + 0.5) / columns - 0.5) * fov;
    const dist = castRay(x, y, theta + offset, rects, maxRange);
    out.push({
      dist,
      perpDist: dist === null ? null : dist * Math.cos(offset),
    });
  }
  return out;
}

/** Projection rule: a wall slab of WALL_HEIGHT at perpendicular distance d
 * spans a vertical band around the horizon with half-height
 * (screenH / 2) * (WALL_HEIGHT / 2) / (d * tan(fov / 2)). */
export function columnBand(
  perpDist: number, screenH: number, fov = DEFAULT_FOV,
): { top: number; bottom: number } {
  const half = (screenH / 2) * (WALL_HEIGHT / 2) / (Math.max(perpDist, 1e-6) * Math.tan(fov / 2));
  const horizon = screenH / 2;
  return {
    top: Math.max(0, horizon - half),
    bottom: Math.min(screenH, horizon + half),
  };
}

export interface Billboard {
  label: string;
  screenX: number; // 0..1 across the view
  dist: number;
  occluded: boolean;
}

/** Project waypoint labels into the view as billboards; a billboard is
 * occluded when a wall stands strictly in front of it along its ray. */
export function billboards(
  x: number, y: number, theta: number,
  waypoints: { label: string; position: [number, number] }[],
  rects: Rect[], fov = DEFAULT_FOV, maxRange = 20,
): Billboard[] {
  const out: Billboard[] = [];
  for (const wp of waypoints) {
    const dx = wp.position[0] - x;
    const dy = wp.position[1] - y;
    const dist = Math.hypot(dx, dy);
    if (dist < 1e-6 || dist > maxRange) continue;
    let rel = Math.atan2(dy, dx) - theta;
    while (rel > Math.PI) rel -= 2 * Math.PI;
    while (rel <= -Math.PI) rel += 2 * Math.PI;
    if (Math.abs(rel) > fov / 2) continue;
    const wall = castRay(x, y, theta + rel, rects, maxRange);
    out.push({
      label: wp.label,
      screenX: rel / fov + 0.5,
      dist,
      occluded: wall !== null && wall < dist,
    });
  }
  return out.sort((a, b) => b.dist - a.dist); // paint far to near
}
