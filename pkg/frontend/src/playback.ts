// Skeleton playback on a 2D canvas: oblique projection of server-provided
// global joints, with trajectory and control-target overlays.

import { errorColor } from "./colormap";
import type { EditSpecDoc, MotionDoc, SkeletonSpec } from "./types";

/** Frame index at a given elapsed time; pure so the clock math is testable. */
export function frameAt(elapsedMs: number, fps: number, nFrames: number): number {
  if (nFrames <= 0) return 0;
  return Math.floor((elapsedMs / 1000) * fps) % nFrames;
}

interface Projection {
  scale: number; // px per meter
  cx: number;
  cy: number;
}

function project(p: [number, number, number], proj: Projection): [number, number] {
  // Oblique view: x to the right, y up, z receding at an angle.
  const u = p[0] + 0.45 * p[2];
  const v = p[1] + 0.22 * p[2];
  return [proj.cx + u * proj.scale, proj.cy - v * proj.scale];
}

export class SkeletonPlayer {
  private motion: MotionDoc | null = null;
  private spec: EditSpecDoc | null = null;
  private errors: (number | null)[][] | null = null;
  private raf = 0;
  private startedAt = 0;
  private pausedFrame = 0;
  playing = false;
  onFrame: ((frame: number) => void) | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private skeleton: SkeletonSpec,
  ) {}

  load(motion: MotionDoc, spec: EditSpecDoc | null, errors: (number | null)[][] | null): void {
    this.motion = motion;
    this.spec = spec;
    this.errors = errors;
    this.pausedFrame = 0;
    this.play();
  }

  play(): void {
    if (!this.motion) return;
    this.playing = true;
    this.startedAt = performance.now() - (this.pausedFrame / this.motion.fps) * 1000;
    cancelAnimationFrame(this.raf);
    const tick = () => {
      if (!this.playing || !this.motion) return;
      const frame = frameAt(performance.now() - this.startedAt, this.motion.fps, this.motion.global_joints.length);
      this.drawFrame(frame);
      this.onFrame?.(frame);
      this.raf = requestAnimationFrame(tick);
    };
    this.raf = requestAnimationFrame(tick);
  }

  pause(frame?: number): void {
    this.playing = false;
    cancelAnimationFrame(this.raf);
    if (this.motion) {
      this.pausedFrame = frame ?? frameAt(performance.now() - this.startedAt, this.motion.fps, this.motion.global_joints.length);
      this.drawFrame(this.pausedFrame);
      this.onFrame?.(this.pausedFrame);
    }
  }

  scrub(frame: number): void {
    this.pause(frame);
  }

  private fitProjection(): Projection {
    const m = this.motion!;
    let minX = Infinity, maxX = -Infinity, minV = Infinity, maxV = -Infinity;
    for (const flat of m.global_joints) {
      for (let j = 0; j < m.n_joints; j++) {
        const u = flat[3 * j] + 0.45 * flat[3 * j + 2];
        const v = flat[3 * j + 1] + 0.22 * flat[3 * j + 2];
        minX = Math.min(minX, u); maxX = Math.max(maxX, u);
        minV = Math.min(minV, v); maxV = Math.max(maxV, v);
      }
    }
    const w = this.canvas.width, h = this.canvas.height;
    const span = Math.max(maxX - minX, maxV - minV, 1.0);
    const scale = (Math.min(w, h) * 0.8) / span;
    return {
      scale,
      cx: w / 2 - ((minX + maxX) / 2) * scale,
      cy: h / 2 + ((minV + maxV) / 2) * scale,
    };
  }

  drawFrame(frame: number): void {
    const m = this.motion;
    const ctx = this.canvas.getContext("2d");
    if (!m || !ctx) return;
    const proj = this.fitProjection();
    ctx.fillStyle = "#10131a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);

    // root trajectory on the ground plane
    ctx.strokeStyle = "#3a4a66";
    ctx.lineWidth = 1;
    ctx.beginPath();
    m.global_joints.forEach((flat, i) => {
      const [x, y] = project([flat[0], 0, flat[2]], proj);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();

    // control targets colored by per-entry error
    if (this.spec) {
      for (let j = 0; j < this.spec.mask.length; j++) {
        for (let f = 0; f < this.spec.mask[j].length; f += 2) {
          if (!this.spec.mask[j][f]) continue;
          const t = this.spec.targets[j][f];
          const err = this.errors?.[j]?.[f] ?? null;
          const [x, y] = project([t[0], t[1], t[2]], proj);
          ctx.fillStyle = err === null ? "#666" : errorColor(err);
          ctx.fillRect(x - 1.5, y - 1.5, 3, 3);
        }
      }
    }

    // stick figure
    const flat = m.global_joints[Math.min(frame, m.global_joints.length - 1)];
    ctx.strokeStyle = "#e8eefc";
    ctx.lineWidth = 2;
    for (let j = 1; j < m.n_joints; j++) {
      const p = this.skeleton.parent_index[j];
      const [x1, y1] = project([flat[3 * p], flat[3 * p + 1], flat[3 * p + 2]], proj);
      const [x2, y2] = project([flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]], proj);
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
    }
    ctx.fillStyle = "#7fd1ff";
    for (let j = 0; j < m.n_joints; j++) {
      const [x, y] = project([flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]], proj);
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
