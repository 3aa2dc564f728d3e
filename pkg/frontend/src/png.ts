/**
 * Minimal PNG codec, no dependencies.
 *
 * Decode: 8-bit gray/RGB/RGBA and 16-bit gray, all five row filters,
 * non-interlaced (everything the synthesis service emits). Inflate goes
 * through the platform DecompressionStream, available in browsers and
 * node alike.
 *
 * Encode: 16-bit grayscale only, which is the upload format for label
 * and instance maps. Rows are written unfiltered inside *stored* deflate
 * blocks, trading a few bytes for zero compression code.
 */

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

export interface DecodedPng {
  width: number;
  height: number;
  channels: 1 | 2 | 3 | 4;
  depth: 8 | 16;
  /** Uint16Array when depth is 16, else Uint8Array; row-major, interleaved. */
  data: Uint8Array | Uint16Array;
}

export class PngError extends Error {}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Uint8Array[]): number {
  let crc = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) {
      crc = CRC_TABLE[(crc ^ part[i]) & 0xff] ^ (crc >>> 8);
    }
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function adler32(data: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([data as BlobPart]).stream()
    .pipeThrough(new DecompressionStream('deflate'));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

const CHANNELS: Record<number, 1 | 2 | 3 | 4> = { 0: 1, 2: 3, 4: 2, 6: 4 };

export async function decodePng(bytes: Uint8Array): Promise<DecodedPng> {
  if (bytes.length < 8 || !SIGNATURE.every((v, i) => bytes[i] === v)) {
    throw new PngError('not a PNG file');
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let pos = 8;
  let width = 0;
  let height = 0;
  let depth: 8 | 16 = 8;
  let colorType = -1;
  const idat: Uint8Array[] = [];
  while (pos + 8 <= bytes.length) {
    const length = view.getUint32(pos);
    const type = String.fromCharCode(...bytes.subarray(pos + 4, pos + 8));
    const data = bytes.subarray(pos + 8, pos + 8 + length);
    pos += 12 + length;
    if (type === 'IHDR') {
      const h = new DataView(data.buffer, data.byteOffset, data.byteLength);
      width = h.getUint32(0);
      height = h.getUint32(4);
      const bitDepth = data[8];
      colorType = data[9];
      if (bitDepth !== 8 && bitDepth !== 16) {
        throw new PngError(`unsupported bit depth ${bitDepth}`);
      }
      depth = bitDepth as 8 | 16;
      if (!(colorType in CHANNELS)) {
        throw new PngError(`unsupported color type ${colorType}`);
      }
      if (data[12] !== 0) throw new PngError('interlaced PNGs not supported');
    } else if (type === 'IDAT') {
      idat.push(data);
    } else if (type === 'IEND') {
      break;
    }
  }
  if (!width || !height) throw new PngError('missing IHDR');
  const compressed = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let off = 0;
  for (const c of idat) {
    compressed.set(c, off);
    off += c.length;
  }
  const raw = await inflate(compressed);

  const channels = CHANNELS[colorType];
  const bpp = channels * (depth / 8);
  const stride = width * bpp;
  if (raw.length < height * (stride + 1)) throw new PngError('truncated pixel data');

  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const rowIn = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const rowOut = out.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const a = x >= bpp ? rowOut[x - bpp] : 0;
      const b = prev ? prev[x] : 0;
      const c = prev && x >= bpp ? prev[x - bpp] : 0;
      let v = rowIn[x];
      switch (filter) {
        case 0: break;
        case 1: v = (v + a) & 0xff; break;
        case 2: v = (v + b) & 0xff; break;
        case 3: v = (v + ((a + b) >> 1)) & 0xff; break;
        case 4: v = (v + paeth(a, b, c)) & 0xff; break;
        default: throw new PngError(`unknown filter ${filter}`);
      }
      rowOut[x] = v;
    }
  }

  if (depth === 16) {
    const samples = new Uint16Array(width * height * channels);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = (out[2 * i] << 8) | out[2 * i + 1]; // big-endian samples
    }
    return { width, height, channels, depth, data: samples };
  }
  return { width, height, channels, depth, data: out };
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, data.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(data, 8);
  view.setUint32(8 + data.length, crc32(out.subarray(4, 8 + data.length)));
  return out;
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  const max = 0xffff;
  for (let off = 0; off < raw.length || off === 0; off += max) {
    const slice = raw.subarray(off, Math.min(off + max, raw.length));
    const final = off + max >= raw.length ? 1 : 0;
    const header = new Uint8Array(5);
    header[0] = final;
    header[1] = slice.length & 0xff;
    header[2] = slice.length >> 8;
    header[3] = ~slice.length & 0xff;
    header[4] = (~slice.length >> 8) & 0xff;
    blocks.push(header, slice);
    if (final) break;
  }
  const tail = new Uint8Array(4);
  new DataView(tail.buffer).setUint32(0, adler32(raw));
  blocks.push(tail);
  const total = blocks.reduce((n, b) => n + b.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const b of blocks) {
    out.set(b, off);
    off += b.length;
  }
  return out;
}

/** Encode a row-major uint16 raster as a 16-bit grayscale PNG. */
export function encodeGray16(data: Uint16Array, width: number, height: number): Uint8Array {
  if (data.length !== width * height) {
    throw new PngError(`raster length ${data.length} != ${width}x${height}`);
  }
  const ihdr = new Uint8Array(13);
  const hv = new DataView(ihdr.buffer);
  hv.setUint32(0, width);
  hv.setUint32(4, height);
  ihdr[8] = 16; // bit depth
  ihdr[9] = 0;  // grayscale

  const stride = width * 2;
  const raw = new Uint8Array(height * (stride + 1));
  for (let y = 0; y < height; y++) {
    const rowStart = y * (stride + 1);
    raw[rowStart] = 0; // no filter
    for (let x = 0; x < width; x++) {
      const v = data[y * width + x];
      raw[rowStart + 1 + 2 * x] = v >> 8;
      raw[rowStart + 2 + 2 * x] = v & 0xff;
    }
  }

  const parts = [
    new Uint8Array(SIGNATURE),
    chunk('IHDR', ihdr),
    chunk('IDAT', zlibStored(raw)),
    chunk('IEND', new Uint8Array(0)),
  ];
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

/** Convenience: decoded 16-bit gray PNG as a RasterMap-style object. */
export async function decodeGray16(bytes: Uint8Array) {
  const png = await decodePng(bytes);
  if (png.channels !== 1 || png.depth !== 16) {
    throw new PngError(`expected 16-bit grayscale, got ${png.channels}ch/${png.depth}bit`);
  }
  return { width: png.width, height: png.height, data: png.data as Uint16Array };
}
