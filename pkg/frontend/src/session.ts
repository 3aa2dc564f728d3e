/**
 * Headless studio session: the UI's behavioral core.
 *
 * Every synthesis-related action round-trips through the HTTP service;
 * the session holds no derived state the server could not reproduce, so
 * closing and reopening a job URL restores the same view. Local state is
 * limited to cached metadata (shapes, library info) and the undo stack
 * of inverse edits.
 */

import { StudioApi } from './api.js';
import { decodeGray16, decodePng, encodeGray16 } from './png.js';
import type {
  CandidateInfo,
  EditResponse,
  JobStatus,
  LibraryInfo,
  RasterMap,
  SceneEditBody,
  ShapeInfo,
  SynthesisConfigBody,
  VariantInfo,
} from './types.js';
import { clipPolygonToCanvas, type Point } from './labeltools.js';

export interface ProvenanceDiff {
  width: number;
  height: number;
  changed: Uint8Array;
  count: number;
}

export class StudioSession {
  jobId: string | null = null;
  width = 0;
  height = 0;
  library: LibraryInfo | null = null;
  shapes: ShapeInfo[] = [];
  private undoStack: SceneEditBody[] = [];

  constructor(public api: StudioApi) {}

  async init(): Promise<LibraryInfo> {
    this.library = await this.api.library();
    return this.library;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  /** Upload raster maps as 16-bit PNGs and open the created job. */
  async createJob(labels: RasterMap, instances: RasterMap,
                  config: SynthesisConfigBody = {}): Promise<string> {
    if (labels.width !== instances.width || labels.height !== instances.height) {
      throw new Error('label and instance maps must share dimensions');
    }
    const jobId = await this.api.createJob(
      encodeGray16(labels.data, labels.width, labels.height),
      encodeGray16(instances.data, instances.width, instances.height),
      config,
    );
    await this.openJob(jobId);
    return jobId;
  }

  /** Stateless reopen: pull the whole view back from the server. */
  async openJob(jobId: string): Promise<JobStatus> {
    const status = await this.api.jobStatus(jobId);
    this.jobId = jobId;
    this.width = status.width;
    this.height = status.height;
    this.undoStack = [];
    this.shapes = await this.api.jobShapes(jobId);
    return status;
  }

  private requireJob(): string {
    if (this.jobId === null) throw new Error('no open job');
    return this.jobId;
  }

  async status(): Promise<JobStatus> {
    return this.api.jobStatus(this.requireJob());
  }

  /** Poll until the base synthesis finishes (or fails). */
  async waitReady(timeoutMs = 120_000, pollMs = 150): Promise<JobStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.status();
      if (status.status === 'done') return status;
      if (status.status === 'failed') throw new Error(`synthesis failed: ${status.error}`);
      if (Date.now() > deadline) throw new Error('timed out waiting for synthesis');
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }

  candidates(shapeId: number): Promise<CandidateInfo[]> {
    return this.api.candidates(this.requireJob(), shapeId);
  }

  variants(count: number, seed?: number): Promise<VariantInfo[]> {
    return this.api.variants(this.requireJob(), count, seed);
  }

  select(shapeId: number, candidateIdx: number, variantId?: string): Promise<VariantInfo> {
    return this.api.select(this.requireJob(), shapeId, candidateIdx, variantId);
  }

  /** Raw PNG bytes for export; identical to the server's stored image. */
  exportImage(ref: string): Promise<Uint8Array> {
    return this.api.imageBytes(ref);
  }

  private async applyEditInternal(edit: SceneEditBody,
                                  inverse: SceneEditBody | null): Promise<EditResponse> {
    const resp = await this.api.applyEdit(this.requireJob(), edit);
    this.shapes = resp.shapes;
    if (inverse) this.undoStack.push(inverse);
    else this.undoStack = []; // edit without an inverse invalidates history
    return resp;
  }

  /** Insert a library shape; undo maps to deleting the new instance. */
  async insertLibraryShape(exemplarId: number, shapeId: number, row: number,
                           col: number, scale = 1.0): Promise<EditResponse> {
    const resp = await this.api.applyEdit(this.requireJob(), {
      op: 'insert', exemplar_id: exemplarId, shape_id: shapeId, row, col, scale,
    });
    this.shapes = resp.shapes;
    const inserted = resp.shapes.find((s) => s.instance_id === resp.inserted_instance_id);
    if (inserted) {
      this.undoStack.push({ op: 'delete', shape_id: inserted.shape_id });
    }
    return resp;
  }

  async deleteShape(shapeId: number): Promise<EditResponse> {
    return this.applyEditInternal({ op: 'delete', shape_id: shapeId }, null);
  }

  async moveShape(shapeId: number, row: number, col: number): Promise<EditResponse> {
    const shape = this.shapes.find((s) => s.shape_id === shapeId);
    const inverse: SceneEditBody | null = shape
      ? { op: 'move', shape_id: shapeId, row: shape.bbox[0], col: shape.bbox[1] }
      : null;
    const resp = await this.api.applyEdit(this.requireJob(),
                                          { op: 'move', shape_id: shapeId, row, col });
    this.shapes = resp.shapes;
    if (inverse && resp.inserted_instance_id !== null) {
      const moved = resp.shapes.find((s) => s.instance_id === resp.inserted_instance_id);
      if (moved) inverse.shape_id = moved.shape_id;
      this.undoStack.push(inverse);
    }
    return resp;
  }

  /**
   * Paint a polygon with a category. The polygon is clipped to the
   * canvas first; painting entirely off-canvas sends no request.
   */
  async paint(polygon: Point[], category: number): Promise<EditResponse | null> {
    const clipped = clipPolygonToCanvas(polygon, this.height, this.width);
    if (clipped === null) return null;
    return this.applyEditInternal(
      { op: 'paint', polygon: clipped as [number, number][], category }, null);
  }

  async undo(): Promise<EditResponse | null> {
    const inverse = this.undoStack.pop();
    if (!inverse) return null;
    const resp = await this.api.applyEdit(this.requireJob(), inverse);
    this.shapes = resp.shapes;
    return resp;
  }

  /** Decode a 16-bit map ref (labels, instances, provenance, masks). */
  async fetchGray16(ref: string): Promise<RasterMap> {
    return decodeGray16(await this.api.imageBytes(ref));
  }

  /** Decode a served composite/thumbnail into interleaved RGB(A). */
  async fetchImage(ref: string) {
    return decodePng(await this.api.imageBytes(ref));
  }

  /**
   * Pixel diff of two provenance maps: which output pixels changed
   * donors. Pure client-side rendering aid; never re-scores anything.
   */
  async provenanceDiff(refA: string, refB: string): Promise<ProvenanceDiff> {
    const [a, b] = await Promise.all([this.fetchGray16(refA), this.fetchGray16(refB)]);
    if (a.width !== b.width || a.height !== b.height) {
      throw new Error('provenance maps differ in size');
    }
    const changed = new Uint8Array(a.data.length);
    let count = 0;
    for (let i = 0; i < a.data.length; i++) {
      if (a.data[i] !== b.data[i]) {
        changed[i] = 1;
        count++;
      }
    }
    return { width: a.width, height: a.height, changed, count };
  }

  /** True when every changed pixel lies inside the given shape's mask. */
  async diffConfinedToShape(diff: ProvenanceDiff, shape: ShapeInfo): Promise<boolean> {
    const mask = await this.fetchGray16(shape.mask_ref);
    const [r0, c0, rows, cols] = shape.bbox;
    for (let i = 0; i < diff.changed.length; i++) {
      if (!diff.changed[i]) continue;
      const r = Math.floor(i / diff.width);
      const c = i % diff.width;
      const inBbox = r >= r0 && r < r0 + rows && c >= c0 && c < c0 + cols;
      if (!inBbox) return false;
      if (mask.data[(r - r0) * cols + (c - c0)] === 0) return false;
    }
    return true;
  }
}
