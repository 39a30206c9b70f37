/**
 * Synthesized talking-head fixtures: an amplitude-modulated noise "voice"
 * and a mouth whose opening tracks the same envelope. A lip-synced fake
 * keeps the audio but re-renders the mouth from an independent envelope.
 */

import { LumaVideo } from "../src/y4m.js";
import { Waveform } from "../src/wav.js";

export const SAMPLE_RATE = 16000;
export const FPS = 25;

/** deterministic PRNG (mulberry32) so fixtures are reproducible */
export function prng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** piecewise syllable envelope in [0, 1], one value per video frame */
export function syllableEnvelope(frames: number, seed: number): Float64Array {
  const rand = prng(seed);
  const env = new Float64Array(frames);
  let t = 0;
  while (t < frames) {
    const len = 3 + Math.floor(rand() * 8); // 0.12 s .. 0.4 s syllables
    const amp = 0.15 + 0.85 * rand();
    for (let i = 0; i < len && t + i < frames; i++) {
      env[t + i] = amp * Math.sin((Math.PI * (i + 0.5)) / len) ** 2;
    }
    t += len + 1 + Math.floor(rand() * 3); // short gap
  }
  return env;
}

export function makeVoice(envelope: Float64Array, seed: number): Waveform {
  const perFrame = SAMPLE_RATE / FPS;
  const samples = new Float64Array(envelope.length * perFrame);
  const rand = prng(seed);
  for (let i = 0; i < samples.length; i++) {
    const frame = Math.min(envelope.length - 1, Math.floor(i / perFrame));
    samples[i] = envelope[frame] * 0.5 * (2 * rand() - 1);
  }
  return { sampleRate: SAMPLE_RATE, samples };
}

export interface MouthVideoOptions {
  width?: number;
  height?: number;
  mouthX?: number;
  mouthY?: number;
}

/** gray background, dark elliptical mouth whose height follows the envelope */
export function makeMouthVideo(
  envelope: Float64Array,
  seed: number,
  opts: MouthVideoOptions = {},
): LumaVideo {
  const width = opts.width ?? 96;
  const height = opts.height ?? 96;
  const cx = opts.mouthX ?? width / 2;
  const cy = opts.mouthY ?? height / 2;
  const rand = prng(seed);
  const frames: Uint8Array[] = [];
  for (let t = 0; t < envelope.length; t++) {
    const frame = new Uint8Array(width * height);
    for (let i = 0; i < frame.length; i++) frame[i] = 150 + Math.floor(10 * rand());
    const rx = 18;
    const ry = 2 + 16 * envelope[t];
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        const dx = (x - cx) / rx;
        const dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1) frame[y * width + x] = 25;
      }
    }
    frames.push(frame);
  }
  return { width, height, fps: FPS, frames };
}

/** 1-based landmark sidecar lines for a mouth centered at (cx, cy) */
export function landmarksFor(
  frames: number,
  cx: number,
  cy: number,
  dropFrames: number[] = [],
): string {
  const dropped = new Set(dropFrames);
  const lines: string[] = [];
  for (let t = 0; t < frames; t++) {
    if (dropped.has(t)) continue;
    lines.push(
      JSON.stringify({
        frame: t,
        mouth_left: [cx - 18, cy],
        mouth_right: [cx + 18, cy],
      }),
    );
  }
  return lines.join("\n") + "\n";
}

/** fixed-offset matching score (tau window, zero-padding), for assertions */
export function fixedOffsetScore(
  visual: Float32Array,
  audio: Float32Array,
  frames: number,
  dim: number,
  tau = 15,
): number {
  const cos = (t: number, u: number): number => {
    let dot = 0;
    let nv = 0;
    let na = 0;
    for (let j = 0; j < dim; j++) {
      const a = visual[t * dim + j];
      const b = audio[u * dim + j];
      dot += a * b;
      nv += a * a;
      na += b * b;
    }
    if (nv === 0 || na === 0) return 0;
    return dot / Math.sqrt(nv * na);
  };
  let best = -Infinity;
  for (let delta = -tau; delta <= tau; delta++) {
    let sum = 0;
    for (let t = 0; t < frames; t++) {
      const u = t + delta;
      if (u >= 0 && u < frames) sum += cos(t, u);
    }
    best = Math.max(best, sum / frames);
  }
  return best;
}
