// Ground-plane path sketching on a canvas (top-down XZ view).

import type { Vec2 } from "./types";

export interface CanvasPathPoint {
  x: number; // meters
  z: number;
  t: number; // ms timestamp
}

/** Canvas pixel -> ground-plane meters; origin at the canvas center, z up-screen. */
export function canvasToGround(px: number, py: number, width: number, height: number, metersAcross: number): Vec2 {
  const scale = metersAcross / width;
  return [(px - width / 2) * scale, (height / 2 - py) * scale];
}

export class PathSketcher {
  points: CanvasPathPoint[] = [];
  onChange: (() => void) | null = null;
  private drawing = false;

  constructor(
    private canvas: HTMLCanvasElement,
    public metersAcross = 6,
  ) {
    canvas.addEventListener("pointerdown", (e) => {
      this.drawing = true;
      this.points = [];
      this.add(e);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (this.drawing) this.add(e);
    });
    const stop = () => {
      this.drawing = false;
      this.onChange?.();
    };
    canvas.addEventListener("pointerup", stop);
    canvas.addEventListener("pointerleave", stop);
  }

  private add(e: PointerEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const [x, z] = canvasToGround(
      ((e.clientX - rect.left) / rect.width) * this.canvas.width,
      ((e.clientY - rect.top) / rect.height) * this.canvas.height,
      this.canvas.width,
      this.canvas.height,
      this.metersAcross,
    );
    this.points.push({ x, z, t: performance.now() });
    this.draw();
  }

  path(): Vec2[] {
    return this.points.map((p) => [p.x, p.z]);
  }

  clear(): void {
    this.points = [];
    this.draw();
    this.onChange?.();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#10131a";
    ctx.fillRect(0, 0, width, height);
    ctx.strokeStyle = "#2a3142";
    for (let m = -Math.floor(this.metersAcross / 2); m <= this.metersAcross / 2; m++) {
      const px = width / 2 + (m / this.metersAcross) * width;
      const py = height / 2 - (m / this.metersAcross) * height;
      ctx.beginPath(); ctx.moveTo(px, 0); ctx.lineTo(px, height); ctx.stroke();
      ctx.beginPath(); ctx.moveTo(0, py); ctx.lineTo(width, py); ctx.stroke();
    }
    if (this.points.length > 1) {
      ctx.strokeStyle = "#7fd1ff";
      ctx.lineWidth = 2;
      ctx.beginPath();
      this.points.forEach((p, i) => {
        const px = width / 2 + (p.x / this.metersAcross) * width;
        const py = height / 2 - (p.z / this.metersAcross) * height;
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.stroke();
    }
  }
}
