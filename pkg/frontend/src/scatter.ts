// 3D impact-space scatter rendered to an SVG string: GWP/AP/CBW axes,
// points colored by predicted strength, legend with the MPa color bar.

import { colorForValue, rampColor } from './color.js';
import { CameraState, DEFAULT_CAMERA, project, unit } from './projection.js';
import type { CandidateRecord, GenerateResponse, SpectrumDoc, SpectrumRecord } from './types.js';

export interface ScatterOptions {
  width: number;
  height: number;
  pointRadius: number;
  camera: CameraState;
}

export const DEFAULT_SCATTER: ScatterOptions = {
  width: 640,
  height: 480,
  pointRadius: 3,
  camera: DEFAULT_CAMERA,
};

function fmt(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  const abs = Math.abs(v);
  if (abs !== 0 && (abs >= 10000 || abs < 0.001)) return v.toExponential(2);
  return String(Math.round(v * 1000) / 1000);
}

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function formulaSummary(record: SpectrumRecord): string {
  const f = record.formula;
  return (
    `cement ${fmt(f.cement)}, slag ${fmt(f.blast_furnace_slag)}, ` +
    `fly ash ${fmt(f.fly_ash)}, water ${fmt(f.water)}, SP ${fmt(f.superplasticizer)}, ` +
    `coarse ${fmt(f.coarse_aggregate)}, fine ${fmt(f.fine_aggregate)} kg/m3 | ` +
    `${fmt(record.strength_mpa)} MPa | GWP ${fmt(record.gwp)}, AP ${fmt(record.ap)}, ` +
    `CBW ${fmt(record.cbw)}`
  );
}

/** Build the spectrum scatter as a standalone SVG document string. */
export function buildSpectrumSvg(
  doc: SpectrumDoc,
  options: ScatterOptions = DEFAULT_SCATTER,
): string {
  const { width, height, pointRadius, camera } = options;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" data-bucket="${doc.bucket}" ` +
      `data-count="${doc.count}">`,
  );
  const { gwp: gwpAxis, ap: apAxis, cbw: cbwAxis, strength_mpa: strengthAxis } = doc.axes;
  if (doc.count === 0 || !gwpAxis || !apAxis || !cbwAxis || !strengthAxis) {
    parts.push(
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" ` +
        `class="empty">no candidates</text>`,
    );
    parts.push('</svg>');
    return parts.join('\n');
  }
  const margin = 60;
  const scale = Math.min(width, height) - 2 * margin;
  const cx = width / 2 - 40; // leave room for the legend
  const cy = height / 2;
  const toScreen = (p: [number, number]): [number, number] => [
    cx + p[0] * scale,
    cy + p[1] * scale,
  ];

  // axis edges of the unit cube from the origin corner
  const axisSpecs: { name: string; range: [number, number]; end: [number, number, number] }[] = [
    { name: 'GWP', range: gwpAxis, end: [1, 0, 0] },
    { name: 'AP', range: apAxis, end: [0, 1, 0] },
    { name: 'CBW', range: cbwAxis, end: [0, 0, 1] },
  ];
  const origin = toScreen(project(0, 0, 0, camera));
  parts.push('<g class="axes" stroke="#888" fill="#333" font-size="11">');
  for (const axis of axisSpecs) {
    const [ex, ey] = toScreen(project(axis.end[0], axis.end[1], axis.end[2], camera));
    parts.push(
      `<line x1="${origin[0].toFixed(1)}" y1="${origin[1].toFixed(1)}" ` +
        `x2="${ex.toFixed(1)}" y2="${ey.toFixed(1)}"/>`,
    );
    parts.push(
      `<text x="${ex.toFixed(1)}" y="${(ey - 6).toFixed(1)}" class="axis-label">` +
        `${axis.name} [${fmt(axis.range[0])}, ${fmt(axis.range[1])}]</text>`,
    );
  }
  parts.push('</g>');

  const [sLo, sHi] = strengthAxis;
  parts.push('<g class="points">');
  doc.records.forEach((record, i) => {
    const p = project(
      unit(record.gwp, gwpAxis),
      unit(record.ap, apAxis),
      unit(record.cbw, cbwAxis),
      camera,
    );
    const [px, py] = toScreen(p);
    const fill = colorForValue(record.strength_mpa, sLo, sHi);
    parts.push(
      `<circle data-index="${i}" cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" ` +
        `r="${pointRadius}" fill="${fill}" fill-opacity="0.8">` +
        `<title>${esc(formulaSummary(record))}</title></circle>`,
    );
  });
  parts.push('</g>');
  parts.push(buildLegend(width - 46, 40, 16, height - 120, sLo, sHi));
  parts.push('</svg>');
  return parts.join('\n');
}

/** Vertical color bar with MPa labels at both ends. */
function buildLegend(
  x: number,
  y: number,
  barWidth: number,
  barHeight: number,
  lo: number,
  hi: number,
): string {
  const steps = 24;
  const parts = [`<g class="legend" font-size="11" fill="#333">`];
  for (let i = 0; i < steps; i++) {
    const t0 = i / steps;
    const sliceY = y + barHeight * (1 - (i + 1) / steps);
    parts.push(
      `<rect x="${x}" y="${sliceY.toFixed(1)}" width="${barWidth}" ` +
        `height="${(barHeight / steps).toFixed(1)}" fill="${rampColor(t0 + 0.5 / steps)}"/>`,
    );
  }
  parts.push(`<text x="${x - 4}" y="${y + barHeight + 4}" text-anchor="end" ` +
    `class="legend-min">${fmt(lo)} MPa</text>`);
  parts.push(`<text x="${x - 4}" y="${y + 8}" text-anchor="end" ` +
    `class="legend-max">${fmt(hi)} MPa</text>`);
  parts.push('</g>');
  return parts.join('\n');
}

/** Adapt seeded /generate results to the spectrum shape; axis ranges are the
 * extrema of the returned values (every number comes from the response). */
export function candidatesToSpectrum(response: GenerateResponse): SpectrumDoc {
  const records: SpectrumRecord[] = response.candidates.map((c: CandidateRecord) => ({
    gwp: c.predicted_impacts.gwp,
    ap: c.predicted_impacts.ap,
    cbw: c.predicted_impacts.cbw,
    strength_mpa: c.predicted_strength_mpa,
    formula: c.formula,
  }));
  const axis = (values: number[]): [number, number] | null =>
    values.length ? [Math.min(...values), Math.max(...values)] : null;
  return {
    schema: 'greencrete.spectrum/1',
    bucket: response.bucket,
    count: records.length,
    axes: {
      gwp: axis(records.map((r) => r.gwp)),
      ap: axis(records.map((r) => r.ap)),
      cbw: axis(records.map((r) => r.cbw)),
      strength_mpa: axis(records.map((r) => r.strength_mpa)),
    },
    records,
  };
}
