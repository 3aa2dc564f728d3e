import { describe, expect, it } from 'vitest';

import {
  brushPolygon,
  clipPolygonToCanvas,
  fillPolygon,
  polygonArea,
  strokePolygon,
  type Point,
} from '../src/labeltools.js';

describe('polygonArea', () => {
  it('matches a unit square', () => {
    expect(polygonArea([[0, 0], [0, 10], [10, 10], [10, 0]])).toBe(100);
  });

  it('is zero for degenerate polygons', () => {
    expect(polygonArea([[3, 3], [3, 3], [3, 3]])).toBe(0);
  });
});

describe('clipPolygonToCanvas', () => {
  it('keeps interior polygons intact', () => {
    const poly: Point[] = [[2, 2], [2, 8], [8, 8], [8, 2]];
    const clipped = clipPolygonToCanvas(poly, 16, 16);
    expect(clipped).not.toBeNull();
    expect(polygonArea(clipped!)).toBe(36);
  });

  it('clips polygons straddling the border', () => {
    const poly: Point[] = [[-5, -5], [-5, 6], [6, 6], [6, -5]];
    const clipped = clipPolygonToCanvas(poly, 10, 10)!;
    expect(clipped).not.toBeNull();
    for (const [r, c] of clipped) {
      expect(r).toBeGreaterThanOrEqual(0);
      expect(c).toBeGreaterThanOrEqual(0);
    }
  });

  it('returns null for fully off-canvas polygons (no request is sent)', () => {
    const poly: Point[] = [[50, 50], [50, 60], [60, 60]];
    expect(clipPolygonToCanvas(poly, 32, 32)).toBeNull();
  });

  it('returns null for sub-pixel slivers', () => {
    const poly: Point[] = [[1, 1], [1.1, 1.1], [1, 1.2]];
    expect(clipPolygonToCanvas(poly, 32, 32)).toBeNull();
  });
});

describe('brush and stroke polygons', () => {
  it('brush polygon surrounds its center', () => {
    const poly = brushPolygon(10, 20, 4);
    expect(poly.length).toBe(12);
    const rows = poly.map((p) => p[0]);
    const cols = poly.map((p) => p[1]);
    expect(Math.min(...rows)).toBeLessThan(10);
    expect(Math.max(...rows)).toBeGreaterThan(10);
    expect(Math.min(...cols)).toBeLessThan(20);
    expect(Math.max(...cols)).toBeGreaterThan(20);
  });

  it('stroke polygon covers both endpoints', () => {
    const poly = strokePolygon([5, 5], [5, 25], 3);
    const area = polygonArea(poly);
    // capsule area ~ 2r*len + pi r^2
    expect(area).toBeGreaterThan(2 * 3 * 20 * 0.8);
  });

  it('zero-length stroke degenerates to a brush stamp', () => {
    const poly = strokePolygon([7, 7], [7, 7], 5);
    expect(polygonArea(poly)).toBeGreaterThan(40);
  });
});

describe('fillPolygon', () => {
  it('paints the polygon interior', () => {
    const data = new Uint16Array(16 * 16);
    const painted = fillPolygon(data, 16, 16, [[2, 2], [2, 10], [10, 10], [10, 2]], 7);
    expect(painted).toBeGreaterThan(40);
    expect(data[5 * 16 + 5]).toBe(7);
    expect(data[0]).toBe(0);
  });
});
