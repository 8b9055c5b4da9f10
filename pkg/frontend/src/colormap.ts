// Error-to-color mapping for the control-target overlay.

/** Green at zero error, fading through yellow to red at/after `full` meters. */
export function errorColor(err: number, full = 0.5): string {
  const t = Math.max(0, Math.min(1, err / full));
  const r = Math.round(255 * t);
  const g = Math.round(255 * (1 - t));
  return `rgb(${r},${g},64)`;
}

export function isFullGreen(color: string): boolean {
  return color === "rgb(0,255,64)";
}
