/** Minimal 16-bit PCM mono WAV reader/writer (16 kHz expected upstream). */

export interface Waveform {
  sampleRate: number;
  /** samples scaled to [-1, 1] */
  samples: Float64Array;
}

export function decodeWav(buf: Buffer): Waveform {
  if (buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error("not a RIFF/WAVE file");
  }
  let offset = 12;
  let sampleRate = 0;
  let channels = 0;
  let bits = 0;
  let format = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const id = buf.toString("ascii", offset, offset + 4);
    const size = buf.readUInt32LE(offset + 4);
    const body = buf.subarray(offset + 8, offset + 8 + size);
    if (id === "fmt ") {
      format = body.readUInt16LE(0);
      channels = body.readUInt16LE(2);
      sampleRate = body.readUInt32LE(4);
      bits = body.readUInt16LE(14);
    } else if (id === "data") {
      data = body;
    }
    offset += 8 + size + (size % 2);
  }
  if (format !== 1) throw new Error("only PCM WAV is supported");
  if (channels !== 1) throw new Error(`expected mono, got ${channels} channels`);
  if (bits !== 16) throw new Error(`expected 16-bit samples, got ${bits}-bit`);
  if (!data) throw new Error("missing data chunk");
  const n = Math.floor(data.length / 2);
  const samples = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    samples[i] = data.readInt16LE(2 * i) / 32768;
  }
  return { sampleRate, samples };
}

export function encodeWav(wave: Waveform): Buffer {
  const n = wave.samples.length;
  const buf = Buffer.alloc(44 + 2 * n);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + 2 * n, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20); // PCM
  buf.writeUInt16LE(1, 22); // mono
  buf.writeUInt32LE(wave.sampleRate, 24);
  buf.writeUInt32LE(wave.sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(2 * n, 40);
  for (let i = 0; i < n; i++) {
    const v = Math.max(-32768, Math.min(32767, Math.round(wave.samples[i] * 32768)));
    buf.writeInt16LE(v, 44 + 2 * i);
  }
  return buf;
}
