/** DTOs mirrored from the HTTP service responses. */

export interface LibraryInfo {
  num_exemplars: number;
  num_categories: number;
  category_names: string[];
  colors: [number, number, number][];
}

export interface JobStatus {
  job_id: string;
  status: 'pending' | 'running' | 'done' | 'failed';
  error: string | null;
  width: number;
  height: number;
  labels_ref: string | null;
  instances_ref: string | null;
  base_image_ref: string | null;
  base_provenance_ref: string | null;
}

export interface ShapeInfo {
  shape_id: number;
  category: number;
  category_name: string;
  instance_id: number;
  bbox: [number, number, number, number]; // row0, col0, rows, cols
  area: number;
  mask_ref: string;
  candidate_count: number;
}

export interface CandidateInfo {
  rank: number;
  exemplar_id: number;
  shape_id: number;
  score: number;
  thumbnail_ref: string;
}

export interface VariantInfo {
  variant_id: string;
  image_ref: string;
  provenance_ref: string;
  stage_ref?: string;
  selections: Record<string, number>;
}

export interface LibraryShapeInfo {
  exemplar_id: number;
  shape_id: number;
  bbox: [number, number, number, number];
  area: number;
  thumbnail_ref: string;
}

export interface LibraryShapePage {
  category: number;
  page: number;
  total: number;
  shapes: LibraryShapeInfo[];
}

export interface EditResponse {
  invalidated: boolean;
  labels_ref: string;
  instances_ref: string;
  inserted_instance_id: number | null;
  shapes: ShapeInfo[];
}

/** Scene edit request body; `op` selects which other fields apply. */
export interface SceneEditBody {
  op: 'insert' | 'delete' | 'move' | 'scale' | 'paint';
  shape_id?: number;
  exemplar_id?: number;
  query_shape_id?: number;
  row?: number;
  col?: number;
  scale?: number;
  factor?: number;
  polygon?: [number, number][];
  category?: number;
}

export interface SynthesisConfigBody {
  top_n?: number;
  top_k?: number;
  filter_side?: number;
  seed?: number;
  stages?: string[];
}

/** Category value marking pixels without a semantic label. */
export const UNLABELED = 0xffff;

/** In-memory label or instance raster (row-major uint16). */
export interface RasterMap {
  width: number;
  height: number;
  data: Uint16Array;
}
