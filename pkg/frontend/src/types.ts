// JSON schemas of the backend service, mirrored verbatim.

export type BucketName = 'LE3' | 'D7' | 'D14' | 'D28' | 'D56' | 'GE90';

export const BUCKETS: BucketName[] = ['LE3', 'D7', 'D14', 'D28', 'D56', 'GE90'];

export const CONSTITUENTS = [
  'cement',
  'blast_furnace_slag',
  'fly_ash',
  'water',
  'superplasticizer',
  'coarse_aggregate',
  'fine_aggregate',
] as const;

export type Constituent = (typeof CONSTITUENTS)[number];

export type Formula = Record<Constituent, number>;

export interface Impacts {
  gwp: number;
  ap: number;
  cbw: number;
}

export interface HealthResponse {
  status: 'ok' | 'degraded';
  model_version: string | null;
}

export interface CandidateRecord {
  formula: Formula;
  predicted_strength_mpa: number;
  predicted_impacts: Impacts;
}

export interface GenerateResponse {
  schema: string;
  model_version: string;
  bucket: BucketName;
  seed: number | null;
  candidates: CandidateRecord[];
}

export interface SpectrumRecord {
  gwp: number;
  ap: number;
  cbw: number;
  strength_mpa: number;
  formula: Formula;
}

export interface SpectrumDoc {
  schema: string;
  bucket: BucketName;
  count: number;
  axes: {
    gwp: [number, number] | null;
    ap: [number, number] | null;
    cbw: [number, number] | null;
    strength_mpa: [number, number] | null;
  };
  records: SpectrumRecord[];
}

export interface ProgressionDoc {
  schema: string;
  bucket: BucketName;
  strength_range_mpa: [number, number];
  rmse_mpa: number;
  pairs: [number, number][]; // [desired, predicted]
}

export interface ReductionRow {
  bucket: BucketName;
  band_center_mpa: number;
  band_half_width_mpa: number;
  n_extant: number;
  n_better: number;
  reduction_pct: { gwp: number | null; ap: number | null; cbw: number | null };
}

export interface ReductionDoc {
  schema: string;
  rows: ReductionRow[];
}

export interface ApiErrorBody {
  error: { code: string; message: string; field?: string };
}

/** What the designer asks for: generation parameters go to the server,
 * impact caps filter client-side. */
export interface DesignQuery {
  bucket: BucketName;
  strengthTargetMpa: number;
  bandHalfWidthMpa: number;
  count: number;
  seed: number | null;
  impactCaps: Partial<Impacts>;
}
