// First-person view: raycast wall columns from the obstacle rectangles plus
// waypoint billboards, 90-degree field of view.

import { billboards, columnBand, renderColumns, DEFAULT_FOV, type Rect } from './raycast';
import type { Pose, WorldDoc } from './types';

const MAX_RANGE = 18;

function obstacleRects(world: WorldDoc): Rect[] {
  return world.obstacles.map(([xmin, ymin, xmax, ymax]) => ({ xmin, ymin, xmax, ymax }));
}

export interface FrontViewData {
  world: WorldDoc;
  pose: Pose;
  stale: boolean;
}

export function drawFrontView(
  ctx: CanvasRenderingContext2D, width: number, height: number, data: FrontViewData,
): void {
  const [x, y, theta] = data.pose;
  const rects = obstacleRects(data.world);
  const horizon = height / 2;

  // sky and floor
  const sky = ctx.createLinearGradient(0, 0, 0, horizon);
  sky.addColorStop(0, '#141a24');
  sky.addColorStop(1, '#232d3d');
  ctx.fillStyle = sky;
  ctx.fillRect(0, 0, width, horizon);
  const floor = ctx.createLinearGradient(0, horizon, 0, height);
  floor.addColorStop(0, '#1d232c');
  floor.addColorStop(1, '#0e1116');
  ctx.fillStyle = floor;
  ctx.fillRect(0, horizon, width, height - horizon);

  // wall columns
  const columns = renderColumns(x, y, theta, rects, width, DEFAULT_FOV, MAX_RANGE);
  for (let i = 0; i < columns.length; i++) {
    const hit = columns[i];
    if (hit.perpDist === null) continue;
    const { top, bottom } = columnBand(hit.perpDist, height, DEFAULT_FOV);
    const shade = Math.max(0.15, 1 - hit.perpDist / MAX_RANGE);
    ctx.fillStyle = `rgba(112, 139, 176, ${shade.toFixed(3)})`;
    ctx.fillRect(i, top, 1, bottom - top);
  }

  // waypoint billboards
  ctx.font = '12px system-ui, sans-serif';
  ctx.textAlign = 'center';
  for (const board of billboards(x, y, theta, data.world.waypoints, rects,
                                 DEFAULT_FOV, MAX_RANGE)) {
    if (board.occluded) continue;
    const px = board.screenX * width;
    const size = Math.max(3, 26 / board.dist);
    ctx.fillStyle = '#e3b341';
    ctx.beginPath();
    ctx.arc(px, horizon - size, size / 2, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = '#f3e9cf';
    ctx.fillText(board.label, px, horizon - size * 2 - 4);
  }
  ctx.textAlign = 'start';

  if (data.stale) {
    ctx.fillStyle = '#e3b341';
    ctx.fillText('stale', 8, 16);
  }
}
