// Arc-length utilities for sketched ground-plane paths.

import type { Vec2 } from "./types";

export function arcLength(points: Vec2[]): number {
  let total = 0;
  for (let i = 1; i < points.length; i++) {
    const dx = points[i][0] - points[i - 1][0];
    const dz = points[i][1] - points[i - 1][1];
    total += Math.hypot(dx, dz);
  }
  return total;
}

/** Resample a polyline to n points spaced uniformly by arc length. */
export function resamplePolyline(points: Vec2[], n: number): Vec2[] {
  if (points.length < 2) throw new Error("polyline needs at least 2 points");
  if (n < 2) throw new Error("need at least 2 output points");
  const cum: number[] = [0];
  for (let i = 1; i < points.length; i++) {
    const dx = points[i][0] - points[i - 1][0];
    const dz = points[i][1] - points[i - 1][1];
    cum.push(cum[i - 1] + Math.hypot(dx, dz));
  }
  const total = cum[cum.length - 1];
  if (total <= 0) throw new Error("polyline has zero length");

  const out: Vec2[] = [];
  let seg = 0;
  for (let k = 0; k < n; k++) {
    const target = (k / (n - 1)) * total;
    while (seg < points.length - 2 && cum[seg + 1] < target) seg++;
    const span = cum[seg + 1] - cum[seg];
    const u = span > 0 ? (target - cum[seg]) / span : 0;
    out.push([
      points[seg][0] + u * (points[seg + 1][0] - points[seg][0]),
      points[seg][1] + u * (points[seg + 1][1] - points[seg][1]),
    ]);
  }
  return out;
}

/** Reduce pointer samples: drop points closer than minStep meters. */
export function simplifyPath(points: Vec2[], minStep = 0.01): Vec2[] {
  if (points.length === 0) return [];
  const out = [points[0]];
  for (const p of points.slice(1)) {
    const last = out[out.length - 1];
    if (Math.hypot(p[0] - last[0], p[1] - last[1]) >= minStep) out.push(p);
  }
  return out;
}
