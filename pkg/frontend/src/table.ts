// Candidate table and the per-candidate detail panel. Every displayed
// number is read from a service response field; nothing is recomputed
// except the percentage deltas, which mirror the server's reduction
// formula 100*(base - cand)/base.

import type { CandidateRecord, Constituent, Impacts } from './types.js';
import { CONSTITUENTS } from './types.js';

const LABELS: Record<Constituent, string> = {
  cement: 'Cement',
  blast_furnace_slag: 'Blast Furnace Slag',
  fly_ash: 'Fly Ash',
  water: 'Water',
  superplasticizer: 'Superplasticizer',
  coarse_aggregate: 'Coarse Aggregate',
  fine_aggregate: 'Fine Aggregate',
};

export function deltaPercent(base: number, candidate: number): number | null {
  if (base === 0) return null;
  return (100 * (base - candidate)) / base;
}

export function computeDeltas(baseline: Impacts, candidate: Impacts) {
  return {
    gwp: deltaPercent(baseline.gwp, candidate.gwp),
    ap: deltaPercent(baseline.ap, candidate.ap),
    cbw: deltaPercent(baseline.cbw, candidate.cbw),
  };
}

export interface DetailPanel {
  constituents: { name: Constituent; label: string; kg_per_m3: number }[];
  predicted_strength_mpa: number;
  predicted_impacts: Impacts;
  deltas_pct: { gwp: number | null; ap: number | null; cbw: number | null } | null;
}

export function buildDetail(
  candidate: CandidateRecord,
  baseline: Impacts | null = null,
): DetailPanel {
  return {
    constituents: CONSTITUENTS.map((name) => ({
      name,
      label: LABELS[name],
      kg_per_m3: candidate.formula[name],
    })),
    predicted_strength_mpa: candidate.predicted_strength_mpa,
    predicted_impacts: candidate.predicted_impacts,
    deltas_pct: baseline ? computeDeltas(baseline, candidate.predicted_impacts) : null,
  };
}

export function serializeDetail(panel: DetailPanel): string {
  return JSON.stringify(panel, null, 2);
}

function fmtCell(v: number, digits: number): string {
  return v.toFixed(digits);
}

export function renderCandidateTable(candidates: CandidateRecord[]): string {
  if (candidates.length === 0) {
    return '<p class="empty">no candidates</p>';
  }
  const head = ['#', ...CONSTITUENTS.map((c) => LABELS[c]), 'Strength (MPa)',
                'GWP', 'AP', 'CBW'];
  const rows = candidates.map((c, i) => {
    const cells = [
      String(i + 1),
      ...CONSTITUENTS.map((name) => fmtCell(c.formula[name], 1)),
      fmtCell(c.predicted_strength_mpa, 2),
      fmtCell(c.predicted_impacts.gwp, 2),
      fmtCell(c.predicted_impacts.ap, 4),
      fmtCell(c.predicted_impacts.cbw, 4),
    ];
    return `<tr data-index="${i}">${cells.map((v) => `<td>${v}</td>`).join('')}</tr>`;
  });
  return (
    `<table class="candidates"><thead><tr>` +
    head.map((h) => `<th>${h}</th>`).join('') +
    `</tr></thead><tbody>` +
    rows.join('') +
    `</tbody></table>`
  );
}

export function renderDetail(panel: DetailPanel): string {
  const rows = panel.constituents
    .map((c) => `<tr><td>${c.label}</td><td>${c.kg_per_m3.toFixed(1)}</td></tr>`)
    .join('');
  const deltas = panel.deltas_pct;
  const deltaRow = (name: 'gwp' | 'ap' | 'cbw') => {
    if (!deltas) return '';
    const v = deltas[name];
    return v === null ? '<td>n/a</td>' : `<td>${v.toFixed(2)}%</td>`;
  };
  return (
    `<div class="detail">` +
    `<table class="formula"><tbody>${rows}</tbody></table>` +
    `<p>Predicted strength: <b>${panel.predicted_strength_mpa.toFixed(2)} MPa</b></p>` +
    `<table class="impacts"><thead><tr><th></th><th>GWP</th><th>AP</th><th>CBW</th>` +
    `</tr></thead><tbody>` +
    `<tr><td>predicted</td><td>${panel.predicted_impacts.gwp.toFixed(2)}</td>` +
    `<td>${panel.predicted_impacts.ap.toFixed(4)}</td>` +
    `<td>${panel.predicted_impacts.cbw.toFixed(4)}</td></tr>` +
    (deltas
      ? `<tr><td>reduction vs baseline</td>${deltaRow('gwp')}${deltaRow('ap')}${deltaRow('cbw')}</tr>`
      : '') +
    `</tbody></table>` +
    `</div>`
  );
}
