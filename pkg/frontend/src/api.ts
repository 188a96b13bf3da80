// REST client for the mix-design service. The fetch implementation is
// injectable so tests can run against fixtures.

import type {
  ApiErrorBody,
  BucketName,
  GenerateResponse,
  HealthResponse,
  ProgressionDoc,
  ReductionDoc,
  SpectrumDoc,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  readonly status: number;
  readonly code: string;
  readonly field?: string;

  constructor(status: number, code: string, message: string, field?: string) {
    super(message);
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

async function toError(response: Response): Promise<ServiceError> {
  let code = 'http_error';
  let message = `HTTP ${response.status}`;
  let field: string | undefined;
  try {
    const body = (await response.json()) as ApiErrorBody;
    if (body && body.error) {
      code = body.error.code;
      message = body.error.message;
      field = body.error.field;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ServiceError(response.status, code, message, field);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      throw await toError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.getJson('/health');
  }

  generate(body: {
    bucket: BucketName;
    strength_target_mpa: number;
    count: number;
    seed?: number;
  }, signal?: AbortSignal): Promise<GenerateResponse> {
    return this.getJson('/generate', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
  }

  spectrum(bucket: BucketName): Promise<SpectrumDoc> {
    return this.getJson(`/explore/spectrum?bucket=${bucket}`);
  }

  reduction(): Promise<ReductionDoc> {
    return this.getJson('/discover/reduction');
  }

  progression(bucket: BucketName): Promise<ProgressionDoc> {
    return this.getJson(`/progression/${bucket}`);
  }
}
