// Perceptually ordered color ramp (viridis control points, linear blend).

const RAMP: [number, number, number][] = [
  [68, 1, 84],    // t = 0.00
  [59, 82, 139],  // t = 0.25
  [33, 145, 140], // t = 0.50
  [94, 201, 98],  // t = 0.75
  [253, 231, 37], // t = 1.00
];

function hex2(v: number): string {
  return Math.round(v).toString(16).padStart(2, '0');
}

/** Color for t in [0, 1]; values outside are clamped. */
export function rampColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const scaled = clamped * (RAMP.length - 1);
  const lo = Math.min(RAMP.length - 2, Math.floor(scaled));
  const frac = scaled - lo;
  const [r0, g0, b0] = RAMP[lo];
  const [r1, g1, b1] = RAMP[lo + 1];
  return (
    '#' +
    hex2(r0 + (r1 - r0) * frac) +
    hex2(g0 + (g1 - g0) * frac) +
    hex2(b0 + (b1 - b0) * frac)
  );
}

export const RAMP_START = rampColor(0);
export const RAMP_END = rampColor(1);

/** Map a value within [lo, hi] onto the ramp; a zero-width range maps to the
 * middle of the ramp. */
export function colorForValue(value: number, lo: number, hi: number): string {
  if (hi === lo) {
    return rampColor(0.5);
  }
  return rampColor((value - lo) / (hi - lo));
}
