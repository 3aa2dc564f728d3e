/** Pure geometry helpers for the painting tools. */

export type Point = [number, number]; // row, col

/** Shoelace area of a polygon. */
export function polygonArea(poly: Point[]): number {
  let acc = 0;
  for (let i = 0; i < poly.length; i++) {
    const [r1, c1] = poly[i];
    const [r2, c2] = poly[(i + 1) % poly.length];
    acc += c1 * r2 - c2 * r1;
  }
  return Math.abs(acc) / 2;
}

/** Regular polygon approximating a brush disc. */
export function brushPolygon(row: number, col: number, radius: number, sides = 12): Point[] {
  const pts: Point[] = [];
  for (let i = 0; i < sides; i++) {
    const t = (2 * Math.PI * i) / sides;
    pts.push([row + radius * Math.sin(t), col + radius * Math.cos(t)]);
  }
  return pts;
}

/** Capsule polygon covering a stroke segment with the given brush radius. */
export function strokePolygon(from: Point, to: Point, radius: number, capSides = 6): Point[] {
  const [r1, c1] = from;
  const [r2, c2] = to;
  const len = Math.hypot(r2 - r1, c2 - c1);
  if (len < 1e-9) return brushPolygon(r1, c1, radius);
  const base = Math.atan2(r2 - r1, c2 - c1);
  const pts: Point[] = [];
  // half-circle around `to`, then half-circle around `from`
  for (let i = 0; i <= capSides; i++) {
    const t = base - Math.PI / 2 + (Math.PI * i) / capSides;
    pts.push([r2 + radius * Math.sin(t), c2 + radius * Math.cos(t)]);
  }
  for (let i = 0; i <= capSides; i++) {
    const t = base + Math.PI / 2 + (Math.PI * i) / capSides;
    pts.push([r1 + radius * Math.sin(t), c1 + radius * Math.cos(t)]);
  }
  return pts;
}

/**
 * Sutherland-Hodgman clip against the raster rectangle [0,h) x [0,w).
 * Returns null when nothing remains (paint fully off-canvas -> no request).
 */
export function clipPolygonToCanvas(poly: Point[], height: number, width: number): Point[] | null {
  type Edge = (p: Point) => boolean;
  const edges: { inside: Edge; intersect: (a: Point, b: Point) => Point }[] = [
    {
      inside: (p) => p[0] >= 0,
      intersect: (a, b) => lerpAt(a, b, (0 - a[0]) / (b[0] - a[0])),
    },
    {
      inside: (p) => p[0] <= height - 1,
      intersect: (a, b) => lerpAt(a, b, (height - 1 - a[0]) / (b[0] - a[0])),
    },
    {
      inside: (p) => p[1] >= 0,
      intersect: (a, b) => lerpAt(a, b, (0 - a[1]) / (b[1] - a[1])),
    },
    {
      inside: (p) => p[1] <= width - 1,
      intersect: (a, b) => lerpAt(a, b, (width - 1 - a[1]) / (b[1] - a[1])),
    },
  ];
  let current = poly;
  for (const edge of edges) {
    const next: Point[] = [];
    for (let i = 0; i < current.length; i++) {
      const a = current[i];
      const b = current[(i + 1) % current.length];
      const aIn = edge.inside(a);
      const bIn = edge.inside(b);
      if (aIn) next.push(a);
      if (aIn !== bIn) next.push(edge.intersect(a, b));
    }
    current = next;
    if (current.length === 0) return null;
  }
  if (current.length < 3 || polygonArea(current) < 0.5) return null;
  return current.map(([r, c]) => [Math.round(r), Math.round(c)]);
}

function lerpAt(a: Point, b: Point, t: number): Point {
  return [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
}

/** Fill a polygon into a RasterMap-backed uint16 array (scanline rule). */
export function fillPolygon(data: Uint16Array, width: number, height: number,
                            poly: Point[], value: number): number {
  let painted = 0;
  const rows = poly.map((p) => p[0]);
  const r0 = Math.max(0, Math.floor(Math.min(...rows)));
  const r1 = Math.min(height - 1, Math.ceil(Math.max(...rows)));
  for (let r = r0; r <= r1; r++) {
    const xs: number[] = [];
    for (let i = 0; i < poly.length; i++) {
      const [ar, ac] = poly[i];
      const [br, bc] = poly[(i + 1) % poly.length];
      if (ar === br) continue;
      if ((r >= ar && r < br) || (r >= br && r < ar)) {
        xs.push(ac + ((r - ar) / (br - ar)) * (bc - ac));
      }
    }
    xs.sort((a, b) => a - b);
    for (let k = 0; k + 1 < xs.length; k += 2) {
      const cA = Math.max(0, Math.ceil(xs[k]));
      const cB = Math.min(width - 1, Math.floor(xs[k + 1]));
      for (let c = cA; c <= cB; c++) {
        data[r * width + c] = value;
        painted++;
      }
    }
  }
  return painted;
}
