import { describe, expect, it } from 'vitest';

import {
  DEFAULT_FOV,
  billboards,
  castRay,
  columnBand,
  rayRectDistance,
  renderColumns,
  type Rect,
} from '../src/raycast';

// A long wall one meter in front of a camera at the origin looking along +x.
const WALL: Rect = { xmin: 1, ymin: -50, xmax: 1.5, ymax: 50 };

describe('rayRectDistance', () => {
  it('hits a facing wall at the analytic distance', () => {
    expect(rayRectDistance(0, 0, 1, 0, WALL)).toBeCloseTo(1.0, 12);
  });

  it('misses a wall behind the ray', () => {
    expect(rayRectDistance(0, 0, -1, 0, WALL)).toBeNull();
  });

  it('returns zero when the origin is inside', () => {
    expect(rayRectDistance(1.2, 0, 1, 0, WALL)).toBe(0);
  });

  it('handles axis-parallel rays that never cross the slab', () => {
    expect(rayRectDistance(0, 60, 1, 0, WALL)).toBeNull();
  });
});

describe('renderColumns against the analytic oracle', () => {
  it('matches 1/cos(angle) across the whole field of view', () => {
    // oracle: a flat wall at x = d seen under ray angle a is d / cos(a) away
    const columns = 201;
    const hits = renderColumns(0, 0, 0, [WALL], columns, DEFAULT_FOV, 50);
    for (let i = 0; i < columns; i++) {
      const angle = ((i + 0.5) / columns - 0.5) * DEFAULT_FOV;
      const expected = 1.0 / Math.cos(angle);
      expect(hits[i].dist).not.toBeNull();
      expect(hits[i].dist!).toBeCloseTo(expected, 9);
      // fisheye correction makes the projected band height uniform
      expect(hits[i].perpDist!).toBeCloseTo(1.0, 9);
    }
  });

  it('wall columns occupy a band around the horizon that shrinks with distance', () => {
    const near = columnBand(1.0, 320);
    const far = columnBand(4.0, 320);
    expect(near.top).toBeLessThan(far.top);
    expect(near.bottom).toBeGreaterThan(far.bottom);
    expect(near.top).toBeGreaterThanOrEqual(0);
    expect(near.bottom).toBeLessThanOrEqual(320);
    // projection rule: half-height = (H/2) * (wallH/2) / (d * tan(fov/2))
    const expectedHalf = (320 / 2) * 0.5 / (4.0 * Math.tan(DEFAULT_FOV / 2));
    expect((far.bottom - far.top) / 2).toBeCloseTo(expectedHalf, 9);
  });

  it('facing open space yields horizon only', () => {
    const hits = renderColumns(0, 0, Math.PI, [WALL], 100, DEFAULT_FOV, 20);
    expect(hits.every((hit) => hit.dist === null)).toBe(true);
  });

  it('is periodic under full rotations', () => {
    const base = renderColumns(0, 0, 0.3, [WALL], 100);
    const spun = renderColumns(0, 0, 0.3 + 2 * Math.PI, [WALL], 100);
    for (let i = 0; i < base.length; i++) {
      if (base[i].dist === null) {
        expect(spun[i].dist).toBeNull();
      } else {
        expect(spun[i].dist!).toBeCloseTo(base[i].dist!, 9);
      }
    }
  });
});

describe('billboards', () => {
  const waypoints = [
    { label: 'ahead', position: [2, 0] as [number, number] },
    { label: 'behind', position: [-2, 0] as [number, number] },
    { label: 'hidden', position: [3, 0] as [number, number] },
  ];

  it('projects in-view waypoints and drops out-of-view ones', () => {
    const boards = billboards(0, 0, 0, waypoints, []);
    const labels = boards.map((board) => board.label);
    expect(labels).toContain('ahead');
    expect(labels).not.toContain('behind');
    const ahead = boards.find((board) => board.label === 'ahead')!;
    expect(ahead.screenX).toBeCloseTo(0.5, 9);
    expect(ahead.dist).toBeCloseTo(2, 9);
  });

  it('marks waypoints behind walls as occluded', () => {
    const boards = billboards(0, 0, 0, waypoints, [WALL]);
    expect(boards.find((board) => board.label === 'ahead')!.occluded).toBe(true);
    expect(boards.find((board) => board.label === 'hidden')!.occluded).toBe(true);
  });

  it('misses nothing at range and rejects beyond max range', () => {
    expect(castRay(0, 0, 0, [], 20)).toBeNull();
    const boards = billboards(0, 0, 0,
      [{ label: 'far', position: [30, 0] as [number, number] }], []);
    expect(boards).toHaveLength(0);
  });
});
