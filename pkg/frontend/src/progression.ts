// Desired-vs-predicted strength scatter with the y = x reference diagonal
// and the RMSE caption taken verbatim from the payload.

import type { ProgressionDoc } from './types.js';

export interface ProgressionOptions {
  width: number;
  height: number;
  margin: number;
}

export const DEFAULT_PROGRESSION: ProgressionOptions = {
  width: 420,
  height: 420,
  margin: 48,
};

export function buildProgressionSvg(
  doc: ProgressionDoc | null,
  options: ProgressionOptions = DEFAULT_PROGRESSION,
): string {
  const { width, height, margin } = options;
  const open =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">`;
  if (!doc || doc.pairs.length === 0) {
    return (
      open +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="empty">` +
      `no progression data</text></svg>`
    );
  }
  const [lo, hi] = doc.strength_range_mpa;
  const span = hi - lo || 1;
  const sx = (v: number) => margin + ((v - lo) / span) * (width - 2 * margin);
  const sy = (v: number) => height - margin - ((v - lo) / span) * (height - 2 * margin);
  const parts = [open];
  parts.push(
    `<line class="diagonal" x1="${sx(lo).toFixed(1)}" y1="${sy(lo).toFixed(1)}" ` +
      `x2="${sx(hi).toFixed(1)}" y2="${sy(hi).toFixed(1)}" stroke="#d33" ` +
      `stroke-dasharray="4 3"/>`,
  );
  parts.push('<g class="points" fill="#3566a8" fill-opacity="0.45">');
  for (const [desired, predicted] of doc.pairs) {
    parts.push(
      `<circle cx="${sx(desired).toFixed(1)}" cy="${sy(predicted).toFixed(1)}" r="2"/>`,
    );
  }
  parts.push('</g>');
  parts.push(
    `<text x="${width / 2}" y="${height - 10}" text-anchor="middle" class="axis-label">` +
      `desired strength (MPa)</text>`,
  );
  parts.push(
    `<text x="14" y="${height / 2}" text-anchor="middle" class="axis-label" ` +
      `transform="rotate(-90 14 ${height / 2})">predicted strength (MPa)</text>`,
  );
  parts.push(
    `<text x="${width / 2}" y="${margin - 16}" text-anchor="middle" class="rmse-caption">` +
      `${doc.bucket}: RMSE ${doc.rmse_mpa.toFixed(3)} MPa</text>`,
  );
  parts.push('</svg>');
  return parts.join('\n');
}
