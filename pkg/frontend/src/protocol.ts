// Wire protocol for the /stream endpoint.
//
// Binary frames: little-endian header u32 seq | u64 ts_ms | u16 w | u16 h,
// followed by w*h*3 bytes of row-major RGB. Text frames: JSON, either
// {"type":"stats",...} from the server or {"type":"input",...} to it.

export const HEADER_BYTES = 16;

export interface FramePacket {
  seq: number;
  tsMs: number;
  width: number;
  height: number;
  pixels: Uint8Array; // w*h*3 RGB
}

export interface ServerStats {
  seq: number;
  samplesPerSecond: number;
  tileCount: number;
  overheadFraction: number;
}

export interface InputEvent {
  type: 'input';
  yaw: number;
  pitch: number;
  move: [number, number, number];
  ts: number;
}

export class ProtocolError extends Error {}

export function decodeFramePacket(buf: ArrayBuffer): FramePacket {
  if (buf.byteLength < HEADER_BYTES) {
    throw new ProtocolError(`frame shorter than header: ${buf.byteLength} bytes`);
  }
  const view = new DataView(buf);
  const seq = view.getUint32(0, true);
  const tsMs = Number(view.getBigUint64(4, true));
  const width = view.getUint16(12, true);
  const height = view.getUint16(14, true);
  const expected = HEADER_BYTES + width * height * 3;
  if (buf.byteLength !== expected) {
    throw new ProtocolError(
      `payload length mismatch: header says ${width}x${height} ` +
      `(${expected} bytes), got ${buf.byteLength}`);
  }
  return { seq, tsMs, width, height, pixels: new Uint8Array(buf, HEADER_BYTES) };
}

export function parseStats(text: string): ServerStats | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== 'object' || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (d['type'] !== 'stats') return null;
  return {
    seq: Number(d['seq'] ?? 0),
    samplesPerSecond: Number(d['samples_per_second'] ?? NaN),
    tileCount: Number(d['tile_count'] ?? NaN),
    overheadFraction: Number(d['overhead_fraction'] ?? NaN),
  };
}

export function encodeInput(ev: InputEvent): string {
  return JSON.stringify(ev);
}

// RGB rows into an RGBA buffer suitable for ImageData.
export function rgbToRgba(pixels: Uint8Array, out?: Uint8ClampedArray): Uint8ClampedArray {
  const n = pixels.length / 3;
  const rgba = out ?? new Uint8ClampedArray(n * 4);
  for (let i = 0, j = 0; i < pixels.length; i += 3, j += 4) {
    rgba[j] = pixels[i];
    rgba[j + 1] = pixels[i + 1];
    rgba[j + 2] = pixels[i + 2];
    rgba[j + 3] = 255;
  }
  return rgba;
}
