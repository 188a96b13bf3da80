// Deterministic fixtures: a seeded PRNG, a spectrum payload builder, and a
// mocked generate service whose responses are a pure function of the request.

import type {
  BucketName,
  CandidateRecord,
  GenerateResponse,
  SpectrumDoc,
  SpectrumRecord,
} from '../src/types';

/** mulberry32: tiny deterministic PRNG for fixture data. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function makeRecord(rand: () => number): SpectrumRecord {
  const cement = 100 + 400 * rand();
  return {
    gwp: 120 + 300 * rand(),
    ap: 0.3 + 0.8 * rand(),
    cbw: 0.25 + 0.4 * rand(),
    strength_mpa: 10 + 70 * rand(),
    formula: {
      cement,
      blast_furnace_slag: 300 * rand(),
      fly_ash: 180 * rand(),
      water: 130 + 110 * rand(),
      superplasticizer: 30 * rand(),
      coarse_aggregate: 760 + 420 * rand(),
      fine_aggregate: 560 + 420 * rand(),
    },
  };
}

export function makeSpectrumFixture(n: number, seed = 1, bucket: BucketName = 'D7'): SpectrumDoc {
  const rand = mulberry32(seed);
  const records = Array.from({ length: n }, () => makeRecord(rand));
  const axis = (values: number[]): [number, number] | null =>
    values.length ? [Math.min(...values), Math.max(...values)] : null;
  return {
    schema: 'greencrete.spectrum/1',
    bucket,
    count: n,
    axes: {
      gwp: axis(records.map((r) => r.gwp)),
      ap: axis(records.map((r) => r.ap)),
      cbw: axis(records.map((r) => r.cbw)),
      strength_mpa: axis(records.map((r) => r.strength_mpa)),
    },
    records,
  };
}

export function makeCandidates(n: number, seed: number): CandidateRecord[] {
  const rand = mulberry32(seed);
  const records = Array.from({ length: n }, () => makeRecord(rand));
  records.sort((a, b) => a.gwp - b.gwp); // server returns ascending GWP
  return records.map((r) => ({
    formula: r.formula,
    predicted_strength_mpa: r.strength_mpa,
    predicted_impacts: { gwp: r.gwp, ap: r.ap, cbw: r.cbw },
  }));
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

/** Fake fetch for the generate endpoint: deterministic in (bucket, count, seed). */
export function mockGenerateService() {
  const calls: { url: string; body: unknown }[] = [];
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const body = JSON.parse(String(init?.body ?? '{}'));
    calls.push({ url, body });
    if (!url.endsWith('/generate')) {
      return jsonResponse({ error: { code: 'not_found', message: `no route ${url}` } }, 404);
    }
    if (typeof body.seed !== 'number') {
      return jsonResponse(
        { error: { code: 'unseeded_fixture', message: 'fixture requires a seed' } },
        400,
      );
    }
    const response: GenerateResponse = {
      schema: 'greencrete.generate/1',
      model_version: '1',
      bucket: body.bucket,
      seed: body.seed,
      candidates: makeCandidates(body.count, body.seed),
    };
    return jsonResponse(response);
  };
  return { fetchImpl, calls };
}
