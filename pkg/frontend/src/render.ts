/** Canvas rendering helpers (DOM side only; no synthesis logic). */

import type { DecodedPng } from './png.js';
import type { LibraryInfo, RasterMap } from './types.js';
import { UNLABELED } from './types.js';

const UNLABELED_COLOR: [number, number, number] = [24, 24, 28];

export function labelMapToImageData(map: RasterMap, library: LibraryInfo): ImageData {
  const img = new ImageData(map.width, map.height);
  for (let i = 0; i < map.data.length; i++) {
    const v = map.data[i];
    const color = v === UNLABELED
      ? UNLABELED_COLOR
      : library.colors[v] ?? UNLABELED_COLOR;
    img.data[4 * i] = color[0];
    img.data[4 * i + 1] = color[1];
    img.data[4 * i + 2] = color[2];
    img.data[4 * i + 3] = 255;
  }
  return img;
}

export function decodedToImageData(png: DecodedPng): ImageData {
  const img = new ImageData(png.width, png.height);
  const n = png.width * png.height;
  if (png.depth === 8 && png.channels === 3) {
    const src = png.data as Uint8Array;
    for (let i = 0; i < n; i++) {
      img.data[4 * i] = src[3 * i];
      img.data[4 * i + 1] = src[3 * i + 1];
      img.data[4 * i + 2] = src[3 * i + 2];
      img.data[4 * i + 3] = 255;
    }
  } else if (png.depth === 8 && png.channels === 4) {
    img.data.set(png.data as Uint8Array);
  } else if (png.channels === 1) {
    const src = png.data;
    const shift = png.depth === 16 ? 8 : 0;
    for (let i = 0; i < n; i++) {
      const v = src[i] >> shift;
      img.data[4 * i] = img.data[4 * i + 1] = img.data[4 * i + 2] = v;
      img.data[4 * i + 3] = 255;
    }
  } else {
    throw new Error(`no renderer for ${png.channels}ch/${png.depth}bit`);
  }
  return img;
}

export function drawInto(canvas: HTMLCanvasElement, img: ImageData, scale: number): void {
  canvas.width = img.width * scale;
  canvas.height = img.height * scale;
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const off = new OffscreenCanvas(img.width, img.height);
  const offCtx = off.getContext('2d');
  if (!offCtx) return;
  offCtx.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

export function overlayDiff(canvas: HTMLCanvasElement, changed: Uint8Array,
                            width: number, height: number, scale: number): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  ctx.fillStyle = 'rgba(255, 64, 64, 0.45)';
  for (let i = 0; i < changed.length; i++) {
    if (!changed[i]) continue;
    const r = Math.floor(i / width);
    const c = i % width;
    ctx.fillRect(c * scale, r * scale, scale, scale);
  }
}

export function downloadBytes(bytes: Uint8Array, filename: string): void {
  const url = URL.createObjectURL(new Blob([bytes as BlobPart], { type: 'image/png' }));
  const anchor = document.createElement('a');
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}
