import { describe, expect, it } from "vitest";

import { arcLength, resamplePolyline, simplifyPath } from "./resample";
import type { Vec2 } from "./types";

describe("resamplePolyline", () => {
  it("preserves total arc length within 1%", () => {
    const pts: Vec2[] = [];
    for (let i = 0; i < 20; i++) pts.push([Math.cos(i * 0.3) * 2, Math.sin(i * 0.3) * 2]);
    const out = resamplePolyline(pts, 96);
    const ratio = arcLength(out) / arcLength(pts);
    expect(Math.abs(ratio - 1)).toBeLessThan(0.01);
  });

  it("spaces points uniformly on a straight line", () => {
    const out = resamplePolyline([[0, 0], [4, 0]], 50);
    const steps: number[] = [];
    for (let i = 1; i < out.length; i++) {
      steps.push(Math.hypot(out[i][0] - out[i - 1][0], out[i][1] - out[i - 1][1]));
    }
    const mean = steps.reduce((a, b) => a + b) / steps.length;
    for (const s of steps) expect(Math.abs(s - mean)).toBeLessThan(1e-9);
  });

  it("spaces points nearly uniformly on a smooth curve", () => {
    const pts: Vec2[] = [];
    for (let i = 0; i < 40; i++) pts.push([Math.cos(i * 0.1) * 3, Math.sin(i * 0.1) * 3]);
    const out = resamplePolyline(pts, 64);
    const steps: number[] = [];
    for (let i = 1; i < out.length; i++) {
      steps.push(Math.hypot(out[i][0] - out[i - 1][0], out[i][1] - out[i - 1][1]));
    }
    const mean = steps.reduce((a, b) => a + b) / steps.length;
    const sd = Math.sqrt(steps.reduce((a, s) => a + (s - mean) ** 2, 0) / steps.length);
    expect(sd / mean).toBeLessThan(0.01);
  });

  it("a 2 m line resamples to targets spanning 2 m within 1%", () => {
    const out = resamplePolyline([[0, 0], [0, 2]], 196);
    expect(out.length).toBe(196);
    expect(Math.abs(arcLength(out) - 2)).toBeLessThan(0.02);
    expect(out[0]).toEqual([0, 0]);
    expect(Math.abs(out[195][1] - 2)).toBeLessThan(1e-9);
  });

  it("rejects degenerate input", () => {
    expect(() => resamplePolyline([[0, 0]], 10)).toThrow();
    expect(() => resamplePolyline([[1, 1], [1, 1]], 10)).toThrow();
  });
});

describe("simplifyPath", () => {
  it("drops sub-step jitter but keeps endpoints", () => {
    const noisy: Vec2[] = [[0, 0], [0.001, 0], [0.002, 0], [0.5, 0], [0.5005, 0], [1, 0]];
    const out = simplifyPath(noisy, 0.01);
    expect(out.length).toBe(3);
    expect(out[0]).toEqual([0, 0]);
    expect(out[out.length - 1]).toEqual([1, 0]);
  });
});
