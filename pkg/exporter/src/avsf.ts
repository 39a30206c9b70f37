/**
 * AVSF embedding container, byte-compatible with the primary toolkit.
 *
 * Layout (little-endian): magic "AVSF" | version u32 = 1 | modality u8
 * (0 visual, 1 audio, 2 fused) | 3 reserved zero bytes | dim u32 |
 * frames u64 | fps f32 | payload frames*dim f32, frame-major.
 */

export type Modality = "visual" | "audio" | "fused";

const MAGIC = "AVSF";
const VERSION = 1;
const HEADER_BYTES = 28;
const MODALITY_CODE: Record<Modality, number> = { visual: 0, audio: 1, fused: 2 };
const MODALITIES: Modality[] = ["visual", "audio", "fused"];

export interface EmbeddingSequence {
  modality: Modality;
  fps: number;
  frames: number;
  dim: number;
  /** frame-major, frames*dim values */
  data: Float32Array;
}

export function encodeAvsf(seq: EmbeddingSequence): Buffer {
  if (seq.frames < 1 || seq.dim < 1) {
    throw new Error("frames and dim must both be >= 1");
  }
  if (seq.data.length !== seq.frames * seq.dim) {
    throw new Error(
      `payload length ${seq.data.length} != frames*dim ${seq.frames * seq.dim}`,
    );
  }
  for (const v of seq.data) {
    if (!Number.isFinite(v)) throw new Error("non-finite embedding value");
  }
  const buf = Buffer.alloc(HEADER_BYTES + seq.data.length * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt8(MODALITY_CODE[seq.modality], 8);
  buf.writeUInt32LE(seq.dim, 12);
  buf.writeBigUInt64LE(BigInt(seq.frames), 16);
  buf.writeFloatLE(seq.fps, 24);
  for (let i = 0; i < seq.data.length; i++) {
    buf.writeFloatLE(seq.data[i], HEADER_BYTES + 4 * i);
  }
  return buf;
}

export function decodeAvsf(buf: Buffer): EmbeddingSequence {
  if (buf.length < HEADER_BYTES) throw new Error("file shorter than header");
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString("ascii", 0, 4))}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const modCode = buf.readUInt8(8);
  if (modCode >= MODALITIES.length) throw new Error(`unknown modality ${modCode}`);
  const dim = buf.readUInt32LE(12);
  const frames = Number(buf.readBigUInt64LE(16));
  const fps = buf.readFloatLE(24);
  const expected = frames * dim * 4;
  if (buf.length < HEADER_BYTES + expected) {
    throw new Error(`truncated payload: need ${expected} bytes`);
  }
  const data = new Float32Array(frames * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
    if (!Number.isFinite(data[i])) throw new Error("non-finite embedding value");
  }
  return { modality: MODALITIES[modCode], fps, frames, dim, data };
}
