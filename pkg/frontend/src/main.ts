/**
 * Studio page wiring: paint label maps, insert library shapes, run jobs,
 * browse candidates and variants, export composites.
 */

import { ApiError, StudioApi } from './api.js';
import { strokePolygon, type Point } from './labeltools.js';
import { StudioSession } from './session.js';
import {
  decodedToImageData,
  downloadBytes,
  drawInto,
  labelMapToImageData,
  overlayDiff,
} from './render.js';
import type { RasterMap, ShapeInfo, VariantInfo } from './types.js';
import { UNLABELED } from './types.js';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

interface ArmedInsert {
  exemplarId: number;
  shapeId: number;
}

class StudioApp {
  session!: StudioSession;
  labels!: RasterMap;
  instances!: RasterMap;
  scale = 3;
  brushRadius = 6;
  activeCategory = 0;
  armedInsert: ArmedInsert | null = null;
  lastPoint: Point | null = null;
  baseVariant: VariantInfo | null = null;
  selectedShape: ShapeInfo | null = null;
  palettePage = 0;

  async connect(): Promise<void> {
    const base = ($('server') as HTMLInputElement).value;
    this.session = new StudioSession(new StudioApi(base));
    const lib = await this.session.init();
    this.toast(`connected: ${lib.num_exemplars} exemplars, ${lib.num_categories} categories`);
    this.newCanvas();
    this.renderPalette();
    this.renderCategoryList();
  }

  newCanvas(): void {
    const size = parseInt(($('canvas-size') as HTMLSelectElement).value, 10);
    this.labels = {
      width: size,
      height: size,
      data: new Uint16Array(size * size).fill(UNLABELED),
    };
    this.instances = { width: size, height: size, data: new Uint16Array(size * size) };
    this.session.width = size;
    this.session.height = size;
    this.redrawCanvas();
  }

  redrawCanvas(): void {
    if (!this.session.library) return;
    drawInto($('paint-canvas') as HTMLCanvasElement,
             labelMapToImageData(this.labels, this.session.library), this.scale);
  }

  canvasPoint(ev: MouseEvent): Point {
    const canvas = $('paint-canvas') as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    return [
      (ev.clientY - rect.top) / this.scale,
      (ev.clientX - rect.left) / this.scale,
    ];
  }

  /** Local paint before a job exists: maps are edited client-side. */
  paintLocal(stroke: Point[]): void {
    // rasterize through the shared polygon fill to match server behavior
    import('./labeltools.js').then(({ clipPolygonToCanvas, fillPolygon }) => {
      const clipped = clipPolygonToCanvas(stroke, this.labels.height, this.labels.width);
      if (!clipped) return;
      fillPolygon(this.labels.data, this.labels.width, this.labels.height,
                  clipped, this.activeCategory);
      fillPolygon(this.instances.data, this.instances.width, this.instances.height,
                  clipped, 0);
      this.redrawCanvas();
    });
  }

  async onCanvasDrag(ev: MouseEvent): Promise<void> {
    const point = this.canvasPoint(ev);
    if (this.armedInsert) return; // click-to-place mode
    const from = this.lastPoint ?? point;
    this.lastPoint = point;
    const stroke = strokePolygon(from, point, this.brushRadius);
    if (this.session.jobId) {
      try {
        const resp = await this.session.paint(stroke, this.activeCategory);
        if (resp) await this.refreshJobView();
      } catch (err) {
        this.showError(err);
      }
    } else {
      this.paintLocal(stroke);
    }
  }

  async onCanvasClick(ev: MouseEvent): Promise<void> {
    if (!this.armedInsert || !this.session.jobId) return;
    const [row, col] = this.canvasPoint(ev).map(Math.round) as [number, number];
    const scale = parseFloat(($('insert-scale') as HTMLInputElement).value);
    try {
      await this.session.insertLibraryShape(
        this.armedInsert.exemplarId, this.armedInsert.shapeId, row, col, scale);
      this.armedInsert = null;
      this.toast('shape inserted');
      await this.refreshJobView();
    } catch (err) {
      this.showError(err);
    }
  }

  async createJob(): Promise<void> {
    try {
      const jobId = await this.session.createJob(this.labels, this.instances, {
        top_n: parseInt(($('top-n') as HTMLInputElement).value, 10),
        top_k: parseInt(($('top-k') as HTMLInputElement).value, 10),
      });
      this.toast(`job ${jobId} created`);
      window.location.hash = jobId;
      await this.refreshJobView();
    } catch (err) {
      this.showError(err);
    }
  }

  async reopenFromHash(): Promise<void> {
    const jobId = window.location.hash.slice(1);
    if (!jobId) return;
    await this.session.openJob(jobId);
    await this.refreshJobView();
  }

  async refreshJobView(): Promise<void> {
    const status = await this.session.status();
    $('job-status').textContent = `${status.job_id}: ${status.status}`;
    if (status.labels_ref) {
      this.labels = await this.session.fetchGray16(status.labels_ref);
    }
    if (status.instances_ref) {
      this.instances = await this.session.fetchGray16(status.instances_ref);
    }
    this.redrawCanvas();
    this.renderShapeList();
    ($('undo') as HTMLButtonElement).disabled = !this.session.canUndo;
    if (status.status === 'done' && status.base_image_ref) {
      const png = await this.session.fetchImage(status.base_image_ref);
      drawInto($('preview-canvas') as HTMLCanvasElement, decodedToImageData(png), this.scale);
    }
  }

  renderCategoryList(): void {
    const lib = this.session.library;
    if (!lib) return;
    const host = $('categories');
    host.replaceChildren();
    lib.category_names.forEach((name, id) => {
      const [r, g, b] = lib.colors[id];
      const button = document.createElement('button');
      button.textContent = name;
      button.style.borderLeft = `12px solid rgb(${r},${g},${b})`;
      button.onclick = () => {
        this.activeCategory = id;
        this.toast(`painting ${name}`);
      };
      host.appendChild(button);
    });
    const eraser = document.createElement('button');
    eraser.textContent = 'eraser';
    eraser.onclick = () => {
      this.activeCategory = UNLABELED;
    };
    host.appendChild(eraser);
  }

  async renderPalette(): Promise<void> {
    const lib = this.session.library;
    if (!lib) return;
    const category = parseInt(($('palette-category') as HTMLSelectElement).value || '0', 10);
    const page = await this.session.api.libraryShapes(category, this.palettePage);
    const host = $('palette');
    host.replaceChildren();
    for (const entry of page.shapes) {
      const img = document.createElement('img');
      img.src = `${this.session.api.baseUrl}/images/${entry.thumbnail_ref}`;
      img.title = `exemplar ${entry.exemplar_id} shape ${entry.shape_id}`;
      img.onclick = () => {
        this.armedInsert = { exemplarId: entry.exemplar_id, shapeId: entry.shape_id };
        this.toast('click the canvas to place the shape');
      };
      host.appendChild(img);
    }
  }

  renderShapeList(): void {
    const host = $('shapes');
    host.replaceChildren();
    for (const shape of this.session.shapes) {
      const button = document.createElement('button');
      button.textContent =
        `#${shape.shape_id} ${shape.category_name} (${shape.area}px, ${shape.candidate_count} cands)`;
      button.onclick = () => this.showCandidates(shape);
      host.appendChild(button);
    }
  }

  async showCandidates(shape: ShapeInfo): Promise<void> {
    this.selectedShape = shape;
    const host = $('candidates');
    host.replaceChildren();
    try {
      const candidates = await this.session.candidates(shape.shape_id);
      candidates.forEach((cand) => {
        const img = document.createElement('img');
        img.src = `${this.session.api.baseUrl}/images/${cand.thumbnail_ref}`;
        img.title = `rank ${cand.rank}, score ${cand.score}`;
        img.onclick = () => this.selectCandidate(shape, cand.rank);
        host.appendChild(img);
      });
    } catch (err) {
      this.showError(err);
    }
  }

  async selectCandidate(shape: ShapeInfo, rank: number): Promise<void> {
    try {
      await this.session.waitReady();
      const status = await this.session.status();
      const variant = await this.session.select(shape.shape_id, rank);
      const png = await this.session.fetchImage(variant.image_ref);
      const canvas = $('preview-canvas') as HTMLCanvasElement;
      drawInto(canvas, decodedToImageData(png), this.scale);
      if (status.base_provenance_ref) {
        const diff = await this.session.provenanceDiff(
          status.base_provenance_ref, variant.provenance_ref);
        overlayDiff(canvas, diff.changed, diff.width, diff.height, this.scale);
        this.toast(`reselected rank ${rank}: ${diff.count} pixels changed`);
      }
      this.baseVariant = variant;
    } catch (err) {
      this.showError(err);
    }
  }

  async showVariants(): Promise<void> {
    try {
      await this.session.waitReady();
      const seed = parseInt(($('variant-seed') as HTMLInputElement).value, 10);
      const variants = await this.session.variants(4, seed);
      const host = $('variants');
      host.replaceChildren();
      for (const variant of variants) {
        const png = await this.session.fetchImage(variant.image_ref);
        const canvas = document.createElement('canvas');
        drawInto(canvas, decodedToImageData(png), 1);
        canvas.title = variant.variant_id;
        canvas.onclick = async () => {
          this.baseVariant = variant;
          drawInto($('preview-canvas') as HTMLCanvasElement,
                   decodedToImageData(png), this.scale);
        };
        host.appendChild(canvas);
      }
    } catch (err) {
      this.showError(err);
    }
  }

  async exportCurrent(): Promise<void> {
    if (!this.baseVariant) {
      const status = await this.session.status();
      if (!status.base_image_ref) return;
      downloadBytes(await this.session.exportImage(status.base_image_ref), 'composite.png');
      return;
    }
    const bytes = await this.session.exportImage(this.baseVariant.image_ref);
    downloadBytes(bytes, `${this.baseVariant.variant_id}.png`);
  }

  async undo(): Promise<void> {
    try {
      const resp = await this.session.undo();
      if (resp) {
        this.toast('undone');
        await this.refreshJobView();
      }
    } catch (err) {
      this.showError(err);
    }
  }

  toast(message: string): void {
    $('status-line').textContent = message;
  }

  showError(err: unknown): void {
    const message = err instanceof ApiError
      ? `server rejected: ${err.message}`
      : String(err);
    $('status-line').textContent = message;
    // canvas state was never mutated locally on failure; re-render from
    // the last server-confirmed maps
    this.redrawCanvas();
  }
}

const app = new StudioApp();

window.addEventListener('DOMContentLoaded', () => {
  $('connect').onclick = () => app.connect().catch((e) => app.showError(e));
  $('new-canvas').onclick = () => app.newCanvas();
  $('create-job').onclick = () => app.createJob();
  $('show-variants').onclick = () => app.showVariants();
  $('export').onclick = () => app.exportCurrent();
  $('undo').onclick = () => app.undo();
  ($('brush-size') as HTMLInputElement).oninput = (ev) => {
    app.brushRadius = parseInt((ev.target as HTMLInputElement).value, 10);
  };
  ($('palette-category') as HTMLSelectElement).onchange = () => app.renderPalette();
  const canvas = $('paint-canvas') as HTMLCanvasElement;
  let painting = false;
  canvas.addEventListener('mousedown', (ev) => {
    painting = true;
    app.lastPoint = null;
    void app.onCanvasDrag(ev);
  });
  canvas.addEventListener('mousemove', (ev) => {
    if (painting) void app.onCanvasDrag(ev);
  });
  window.addEventListener('mouseup', () => {
    painting = false;
    app.lastPoint = null;
  });
  canvas.addEventListener('click', (ev) => void app.onCanvasClick(ev));
  if (window.location.hash) {
    app.connect().then(() => app.reopenFromHash()).catch((e) => app.showError(e));
  }
});

export { StudioApp };
