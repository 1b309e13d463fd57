// Top-down plan view: bounds, obstacles, labeled waypoints, remaining path,
// robot as an oriented marker. Pure transform helpers are exported for tests.

import type { Pose, WorldDoc } from './types';

export interface Transform {
  toPx: (x: number, y: number) => [number, number];
  scale: number;
}

export function makeTransform(
  bounds: [number, number, number, number], width: number, height: number,
  margin = 12,
): Transform {
  const [xmin, ymin, xmax, ymax] = bounds;
  const scale = Math.min(
    (width - 2 * margin) / (xmax - xmin),
    (height - 2 * margin) / (ymax - ymin),
  );
  const ox = (width - (xmax - xmin) * scale) / 2;
  const oy = (height - (ymax - ymin) * scale) / 2;
  return {
    scale,
    // canvas y grows downward; world y grows upward
    toPx: (x, y) => [ox + (x - xmin) * scale, height - oy - (y - ymin) * scale],
  };
}

export interface PlanViewData {
  world: WorldDoc;
  pose: Pose;
  path: [number, number][];
  stale: boolean;
}

export function drawPlanView(
  ctx: CanvasRenderingContext2D, width: number, height: number, data: PlanViewData,
): void {
  const { world, pose, path } = data;
  const tf = makeTransform(world.bounds, width, height);

  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#10141a';
  ctx.fillRect(0, 0, width, height);

  // bounds
  const [bx0, by0] = tf.toPx(world.bounds[0], world.bounds[3]);
  const [bx1, by1] = tf.toPx(world.bounds[2], world.bounds[1]);
  ctx.strokeStyle = '#3b4554';
  ctx.lineWidth = 2;
  ctx.strokeRect(bx0, by0, bx1 - bx0, by1 - by0);

  // obstacles
  ctx.fillStyle = '#2c3a4d';
  for (const [oxmin, oymin, oxmax, oymax] of world.obstacles) {
    const [px0, py0] = tf.toPx(oxmin, oymax);
    const [px1, py1] = tf.toPx(oxmax, oymin);
    ctx.fillRect(px0, py0, px1 - px0, py1 - py0);
  }

  // remaining path
  if (path.length > 1) {
    ctx.strokeStyle = '#4f9cf7';
    ctx.lineWidth = 1.5;
    ctx.setLineDash([6, 4]);
    ctx.beginPath();
    path.forEach(([x, y], i) => {
      const [px, py] = tf.toPx(x, y);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
    ctx.setLineDash([]);
  }

  // waypoints
  ctx.font = '11px system-ui, sans-serif';
  for (const wp of world.waypoints) {
    const [px, py] = tf.toPx(wp.position[0], wp.position[1]);
    ctx.fillStyle = '#e3b341';
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = '#c9d4e3';
    ctx.fillText(wp.label, px + 7, py + 4);
  }

  // robot: oriented triangle
  const [rx, ry] = tf.toPx(pose[0], pose[1]);
  const theta = -pose[2]; // canvas y flip
  const size = Math.max(7, 0.22 * tf.scale);
  ctx.fillStyle = data.stale ? '#8a93a1' : '#6fd08c';
  ctx.beginPath();
  ctx.moveTo(rx + size * Math.cos(theta), ry + size * Math.sin(theta));
  ctx.lineTo(rx + size * Math.cos(theta + 2.5), ry + size * Math.sin(theta + 2.5));
  ctx.lineTo(rx + size * Math.cos(theta - 2.5), ry + size * Math.sin(theta - 2.5));
  ctx.closePath();
  ctx.fill();

  if (data.stale) {
    ctx.fillStyle = '#e3b341';
    ctx.font = '12px system-ui, sans-serif';
    ctx.fillText('stale', 8, 16);
  }
}
