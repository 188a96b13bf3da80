// DOM wiring for the designer console.

import { ApiClient } from './api.js';
import { buildProgressionSvg } from './progression.js';
import { buildSpectrumSvg, candidatesToSpectrum } from './scatter.js';
import { QueryRunner, ViewState, initialState, selectCandidate, visibleCandidates } from './state.js';
import { buildDetail, renderCandidateTable, renderDetail, serializeDetail } from './table.js';
import type { BucketName, DesignQuery, Impacts } from './types.js';
import { BUCKETS } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function numberOrUndefined(value: string): number | undefined {
  const trimmed = value.trim();
  if (!trimmed) return undefined;
  const parsed = Number(trimmed);
  return Number.isFinite(parsed) ? parsed : undefined;
}

function readQuery(): DesignQuery {
  const caps: Partial<Impacts> = {};
  const gwp = numberOrUndefined(el<HTMLInputElement>('cap-gwp').value);
  const ap = numberOrUndefined(el<HTMLInputElement>('cap-ap').value);
  const cbw = numberOrUndefined(el<HTMLInputElement>('cap-cbw').value);
  if (gwp !== undefined) caps.gwp = gwp;
  if (ap !== undefined) caps.ap = ap;
  if (cbw !== undefined) caps.cbw = cbw;
  const seedRaw = el<HTMLInputElement>('seed').value.trim();
  return {
    bucket: el<HTMLSelectElement>('bucket').value as BucketName,
    strengthTargetMpa: Number(el<HTMLInputElement>('strength').value),
    bandHalfWidthMpa: Number(el<HTMLInputElement>('band').value) || 1,
    count: Number(el<HTMLInputElement>('count').value) || 100,
    seed: seedRaw ? Number(seedRaw) : null,
    impactCaps: caps,
  };
}

function main(): void {
  const bucketSelect = el<HTMLSelectElement>('bucket');
  for (const bucket of BUCKETS) {
    const option = document.createElement('option');
    option.value = bucket;
    option.textContent = bucket;
    if (bucket === 'D28') option.selected = true;
    bucketSelect.appendChild(option);
  }

  let state: ViewState = initialState();
  const api = new ApiClient(el<HTMLInputElement>('base-url').value);
  let runner = new QueryRunner(api);

  const render = () => {
    const visible = visibleCandidates(state);
    el('count-badge').textContent = state.response
      ? `${visible.length} of ${state.response.candidates.length} shown`
      : '';
    el('banner').textContent = state.banner ?? '';
    el('banner').style.display = state.banner ? 'block' : 'none';
    el('scatter').innerHTML = state.response && state.query
      ? buildSpectrumSvg(candidatesToSpectrum({ ...state.response, candidates: visible }))
      : '';
    el('table').innerHTML = renderCandidateTable(visible);
    const selected = state.selectedIndex !== null ? visible[state.selectedIndex] : null;
    el('detail').innerHTML = selected ? renderDetail(buildDetail(selected)) : '';
    el('export').style.display = selected ? 'inline-block' : 'none';
    if (selected) {
      el<HTMLAnchorElement>('export').onclick = () => {
        const blob = new Blob([serializeDetail(buildDetail(selected))],
                              { type: 'application/json' });
        const url = URL.createObjectURL(blob);
        const a = document.createElement('a');
        a.href = url;
        a.download = 'candidate.json';
        a.click();
        URL.revokeObjectURL(url);
      };
    }
    for (const row of el('table').querySelectorAll('tr[data-index]')) {
      row.addEventListener('click', () => {
        state = selectCandidate(state, Number((row as HTMLElement).dataset.index));
        render();
      });
    }
  };

  el('banner').addEventListener('click', () => {
    state = { ...state, banner: null };
    render();
  });

  el<HTMLButtonElement>('run').addEventListener('click', async () => {
    state = { ...state, loading: true, banner: null };
    state = await runner.run(state, readQuery());
    render();
  });

  el<HTMLButtonElement>('load-spectrum').addEventListener('click', async () => {
    try {
      const doc = await api.spectrum(el<HTMLSelectElement>('bucket').value as BucketName);
      el('scatter').innerHTML = buildSpectrumSvg(doc);
      el('count-badge').textContent = `${doc.count} precomputed`;
    } catch (err) {
      state = { ...state, banner: String(err) };
      render();
    }
  });

  el<HTMLButtonElement>('load-progression').addEventListener('click', async () => {
    try {
      const doc = await api.progression(el<HTMLSelectElement>('bucket').value as BucketName);
      el('progression').innerHTML = buildProgressionSvg(doc);
    } catch (err) {
      el('progression').innerHTML = buildProgressionSvg(null);
      state = { ...state, banner: String(err) };
      render();
    }
  });

  el<HTMLInputElement>('base-url').addEventListener('change', () => {
    runner = new QueryRunner(new ApiClient(el<HTMLInputElement>('base-url').value));
  });

  render();
}

main();
