// View state: one in-flight generate request at a time (newer queries
// cancel older ones), pure client-side filtering by band and impact caps.

import { ApiClient, ServiceError } from './api.js';
import type { CandidateRecord, DesignQuery, GenerateResponse, Impacts } from './types.js';

export interface ViewState {
  query: DesignQuery | null;
  response: GenerateResponse | null;
  selectedIndex: number | null;
  banner: string | null;
  loading: boolean;
}

export function initialState(): ViewState {
  return { query: null, response: null, selectedIndex: null, banner: null, loading: false };
}

/** Candidates inside the strength band around the query target. */
export function bandFilter(
  candidates: CandidateRecord[],
  targetMpa: number,
  halfWidthMpa: number,
): CandidateRecord[] {
  return candidates.filter(
    (c) => Math.abs(c.predicted_strength_mpa - targetMpa) <= halfWidthMpa,
  );
}

/** Candidates whose impacts do not exceed any configured cap. */
export function applyImpactCaps(
  candidates: CandidateRecord[],
  caps: Partial<Impacts>,
): CandidateRecord[] {
  return candidates.filter((c) => {
    for (const key of ['gwp', 'ap', 'cbw'] as const) {
      const cap = caps[key];
      if (cap !== undefined && c.predicted_impacts[key] > cap) {
        return false;
      }
    }
    return true;
  });
}

/** The candidate set the scatter and the table actually show. */
export function visibleCandidates(state: ViewState): CandidateRecord[] {
  if (!state.response || !state.query) return [];
  const inBand = bandFilter(
    state.response.candidates,
    state.query.strengthTargetMpa,
    state.query.bandHalfWidthMpa,
  );
  return applyImpactCaps(inBand, state.query.impactCaps);
}

export function selectCandidate(state: ViewState, index: number | null): ViewState {
  if (index !== null) {
    const visible = visibleCandidates(state);
    if (index < 0 || index >= visible.length) {
      return state; // selection must reference a fetched candidate
    }
  }
  return { ...state, selectedIndex: index };
}

export class QueryRunner {
  private inflight: AbortController | null = null;

  constructor(private readonly api: ApiClient) {}

  /** Fetch candidates for a query; a newer call aborts the previous one. */
  async run(state: ViewState, query: DesignQuery): Promise<ViewState> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const response = await this.api.generate(
        {
          bucket: query.bucket,
          strength_target_mpa: query.strengthTargetMpa,
          count: query.count,
          ...(query.seed !== null ? { seed: query.seed } : {}),
        },
        controller.signal,
      );
      if (controller.signal.aborted) {
        return state; // superseded by a newer query
      }
      return {
        query,
        response,
        selectedIndex: null,
        banner: null,
        loading: false,
      };
    } catch (err) {
      if (controller.signal.aborted) {
        return state;
      }
      const message =
        err instanceof ServiceError
          ? `${err.message} (${err.code}${err.field ? `: ${err.field}` : ''})`
          : String(err);
      return { ...state, banner: message, loading: false };
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }
}
