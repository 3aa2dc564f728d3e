import { describe, expect, it } from 'vitest';

import { decodeGray16, decodePng, encodeGray16, PngError } from '../src/png.js';

function randomRaster(width: number, height: number, seed = 1): Uint16Array {
  const data = new Uint16Array(width * height);
  let state = seed >>> 0;
  for (let i = 0; i < data.length; i++) {
    state = (state * 1664525 + 1013904223) >>> 0;
    data[i] = state & 0xffff;
  }
  return data;
}

describe('encodeGray16 / decodeGray16', () => {
  it('round-trips random 16-bit rasters', async () => {
    for (const [w, h] of [[1, 1], [7, 3], [64, 64], [130, 41]] as const) {
      const raster = randomRaster(w, h, w * 31 + h);
      const png = encodeGray16(raster, w, h);
      expect(Array.from(png.subarray(0, 4))).toEqual([0x89, 0x50, 0x4e, 0x47]);
      const back = await decodeGray16(png);
      expect(back.width).toBe(w);
      expect(back.height).toBe(h);
      expect(Array.from(back.data)).toEqual(Array.from(raster));
    }
  });

  it('round-trips sentinel-heavy label data', async () => {
    const data = new Uint16Array(32 * 32).fill(0xffff);
    data[5] = 0;
    data[100] = 11;
    const back = await decodeGray16(encodeGray16(data, 32, 32));
    expect(back.data[5]).toBe(0);
    expect(back.data[100]).toBe(11);
    expect(back.data[6]).toBe(0xffff);
  });

  it('handles rasters larger than one stored deflate block', async () => {
    // 64KB-plus of scanline data forces multiple stored blocks
    const w = 256;
    const h = 160;
    const raster = randomRaster(w, h, 9);
    const back = await decodeGray16(encodeGray16(raster, w, h));
    expect(Array.from(back.data)).toEqual(Array.from(raster));
  });

  it('rejects size mismatches', () => {
    expect(() => encodeGray16(new Uint16Array(5), 2, 2)).toThrow(PngError);
  });
});

describe('decodePng', () => {
  it('rejects non-PNG payloads', async () => {
    await expect(decodePng(new Uint8Array([1, 2, 3, 4]))).rejects.toThrow(PngError);
  });

  it('decodes filtered rows (sub/up/average/paeth)', async () => {
    // hand-build a 3x3 gray8 PNG exercising filters 1, 2, 4
    const { deflateSync } = await import('node:zlib');
    const rows = [
      [1, 10, 20, 30],  // sub:   [10, 30, 60]
      [2, 5, 5, 5],     // up:    [15, 35, 65]
      [4, 1, 1, 1],     // paeth
    ];
    const raw = new Uint8Array(rows.flat());
    const idat = deflateSync(raw);
    const sig = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];
    const crcTable = new Uint32Array(256).map((_, n) => {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      return c >>> 0;
    });
    const crc32 = (bytes: Uint8Array) => {
      let c = 0xffffffff;
      for (const b of bytes) c = crcTable[(c ^ b) & 0xff] ^ (c >>> 8);
      return (c ^ 0xffffffff) >>> 0;
    };
    const chunk = (type: string, data: Uint8Array) => {
      const out = new Uint8Array(12 + data.length);
      const v = new DataView(out.buffer);
      v.setUint32(0, data.length);
      for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
      out.set(data, 8);
      v.setUint32(8 + data.length, crc32(out.subarray(4, 8 + data.length)));
      return out;
    };
    const ihdr = new Uint8Array(13);
    const hv = new DataView(ihdr.buffer);
    hv.setUint32(0, 3);
    hv.setUint32(4, 3);
    ihdr[8] = 8;
    ihdr[9] = 0;
    const parts = [new Uint8Array(sig), chunk('IHDR', ihdr),
                   chunk('IDAT', new Uint8Array(idat)), chunk('IEND', new Uint8Array(0))];
    const png = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
    let off = 0;
    for (const p of parts) { png.set(p, off); off += p.length; }

    const decoded = await decodePng(png);
    expect(decoded.width).toBe(3);
    expect(decoded.depth).toBe(8);
    const px = Array.from(decoded.data as Uint8Array);
    expect(px.slice(0, 3)).toEqual([10, 30, 60]);   // sub filter
    expect(px.slice(3, 6)).toEqual([15, 35, 65]);   // up filter
    // paeth row: predictor picks nearest of left/up/up-left
    expect(px.slice(6, 9)).toEqual([16, 36, 66]);
  });
});
