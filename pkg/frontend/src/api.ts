/** Typed fetch client for the synthesis service. */

import type {
  CandidateInfo,
  EditResponse,
  JobStatus,
  LibraryInfo,
  LibraryShapePage,
  SceneEditBody,
  ShapeInfo,
  SynthesisConfigBody,
  VariantInfo,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function fail(resp: Response): Promise<never> {
  let detail = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, detail);
}

export class StudioApi {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  library(): Promise<LibraryInfo> {
    return this.getJson('/library');
  }

  libraryShapes(category: number, page = 0): Promise<LibraryShapePage> {
    return this.getJson(`/library/shapes?category=${category}&page=${page}`);
  }

  async createJob(labelsPng: Uint8Array, instancesPng: Uint8Array,
                  config: SynthesisConfigBody = {}): Promise<string> {
    const form = new FormData();
    form.append('labels', new Blob([labelsPng as BlobPart], { type: 'image/png' }), 'labels.png');
    form.append('instances', new Blob([instancesPng as BlobPart], { type: 'image/png' }), 'instances.png');
    form.append('config', JSON.stringify(config));
    const resp = await fetch(`${this.baseUrl}/jobs`, { method: 'POST', body: form });
    if (!resp.ok) await fail(resp);
    const body = (await resp.json()) as { job_id: string };
    return body.job_id;
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.getJson(`/jobs/${jobId}`);
  }

  async jobShapes(jobId: string): Promise<ShapeInfo[]> {
    const body = await this.getJson<{ shapes: ShapeInfo[] }>(`/jobs/${jobId}/shapes`);
    return body.shapes;
  }

  async candidates(jobId: string, shapeId: number): Promise<CandidateInfo[]> {
    const body = await this.getJson<{ candidates: CandidateInfo[] }>(
      `/jobs/${jobId}/shapes/${shapeId}/candidates`);
    return body.candidates;
  }

  async variants(jobId: string, count: number, seed?: number): Promise<VariantInfo[]> {
    const q = seed === undefined ? `count=${count}` : `count=${count}&seed=${seed}`;
    const body = await this.getJson<{ variants: VariantInfo[] }>(`/jobs/${jobId}/variants?${q}`);
    return body.variants;
  }

  select(jobId: string, shapeId: number, candidateIdx: number,
         variantId?: string): Promise<VariantInfo> {
    return this.postJson(`/jobs/${jobId}/select`, {
      shape_id: shapeId,
      candidate_idx: candidateIdx,
      variant_id: variantId ?? null,
    });
  }

  applyEdit(jobId: string, edit: SceneEditBody): Promise<EditResponse> {
    return this.postJson(`/jobs/${jobId}/edits`, edit);
  }

  async imageBytes(ref: string): Promise<Uint8Array> {
    const resp = await fetch(`${this.baseUrl}/images/${ref}`);
    if (!resp.ok) await fail(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
