/**
 * Frame-rate-aligned features: MFCC at 100 Hz stacked in fours to 25 Hz for
 * audio, and per-crop mouth descriptors for video. Conventions match the
 * primary toolkit (25 ms window, 10 ms hop, HTK mel scale, orthonormal
 * DCT-II, pre-emphasis 0.97).
 */

import { Waveform } from "./wav.js";
import { CROP_SIZE } from "./crop.js";

const WINDOW_MS = 25;
const HOP_MS = 10;
const N_FFT = 512;
const N_MELS = 26;
const N_COEFFS = 13;
const LOG_FLOOR = 1e-10;
const PREEMPHASIS = 0.97;

function hzToMel(f: number): number {
  return 2595 * Math.log10(1 + f / 700);
}

function melToHz(m: number): number {
  return 700 * (10 ** (m / 2595) - 1);
}

function melFilterbank(sampleRate: number): Float64Array[] {
  const bins = N_FFT / 2 + 1;
  const edges: number[] = [];
  const lo = hzToMel(0);
  const hi = hzToMel(sampleRate / 2);
  for (let i = 0; i < N_MELS + 2; i++) {
    edges.push(melToHz(lo + ((hi - lo) * i) / (N_MELS + 1)));
  }
  const fb: Float64Array[] = [];
  for (let m = 0; m < N_MELS; m++) {
    const w = new Float64Array(bins);
    for (let k = 0; k < bins; k++) {
      const f = (k * sampleRate) / N_FFT;
      const rising = (f - edges[m]) / (edges[m + 1] - edges[m]);
      const falling = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      w[k] = Math.max(0, Math.min(rising, falling));
    }
    fb.push(w);
  }
  return fb;
}

/** radix-2 FFT magnitude of a real frame zero-padded to N_FFT */
function fftMagnitude(frame: Float64Array): Float64Array {
  const n = N_FFT;
  const re = new Float64Array(n);
  const im = new Float64Array(n);
  re.set(frame.subarray(0, Math.min(frame.length, n)));
  // bit reversal
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
  const mag = new Float64Array(n / 2 + 1);
  for (let k = 0; k <= n / 2; k++) mag[k] = Math.hypot(re[k], im[k]);
  return mag;
}

/** (frames x N_COEFFS) MFCC matrix at 100 Hz */
export function mfcc(wave: Waveform): Float64Array[] {
  const win = Math.round((WINDOW_MS * wave.sampleRate) / 1000);
  const hop = Math.round((HOP_MS * wave.sampleRate) / 1000);
  if (wave.samples.length < win) throw new Error("waveform shorter than one window");
  const emphasized = new Float64Array(wave.samples.length);
  emphasized[0] = wave.samples[0];
  for (let i = 1; i < wave.samples.length; i++) {
    emphasized[i] = wave.samples[i] - PREEMPHASIS * wave.samples[i - 1];
  }
  const window = new Float64Array(win);
  for (let i = 0; i < win; i++) window[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / win);
  const fb = melFilterbank(wave.sampleRate);
  const nFrames = Math.floor((wave.samples.length - win) / hop) + 1;
  const out: Float64Array[] = [];
  const frame = new Float64Array(win);
  for (let t = 0; t < nFrames; t++) {
    for (let i = 0; i < win; i++) frame[i] = emphasized[t * hop + i] * window[i];
    const mag = fftMagnitude(frame);
    const logE = new Float64Array(N_MELS);
    for (let m = 0; m < N_MELS; m++) {
      let e = 0;
      for (let k = 0; k < mag.length; k++) e += fb[m][k] * mag[k];
      logE[m] = Math.log(Math.max(e, LOG_FLOOR));
    }
    const coeffs = new Float64Array(N_COEFFS);
    for (let k = 0; k < N_COEFFS; k++) {
      let acc = 0;
      for (let m = 0; m < N_MELS; m++) {
        acc += logE[m] * Math.cos((Math.PI * k * (2 * m + 1)) / (2 * N_MELS));
      }
      coeffs[k] = acc * Math.sqrt(2 / N_MELS) * (k === 0 ? Math.SQRT1_2 : 1);
    }
    out.push(coeffs);
  }
  return out;
}

/** concatenate groups of `k` adjacent frames (remainder dropped) */
export function stackFrames(frames: Float64Array[], k = 4): Float64Array[] {
  if (frames.length < k) throw new Error(`cannot stack ${k} from ${frames.length} frames`);
  const out: Float64Array[] = [];
  for (let t = 0; t + k <= frames.length; t += k) {
    const row = new Float64Array(k * frames[0].length);
    for (let j = 0; j < k; j++) row.set(frames[t + j], j * frames[0].length);
    out.push(row);
  }
  return out;
}

/**
 * Per-crop mouth descriptors: mean intensity, openness proxy (vertical
 * gradient energy in the central band), horizontal gradient energy, and
 * center-vs-border contrast.
 */
export function mouthDescriptors(crop: Float32Array): Float64Array {
  const s = CROP_SIZE;
  let mean = 0;
  for (const v of crop) mean += v;
  mean /= crop.length;

  let vGrad = 0;
  let hGrad = 0;
  const lo = Math.floor(s / 4);
  const hi = Math.floor((3 * s) / 4);
  for (let y = lo; y < hi; y++) {
    for (let x = lo; x < hi; x++) {
      vGrad += Math.abs(crop[(y + 1) * s + x] - crop[y * s + x]);
      hGrad += Math.abs(crop[y * s + x + 1] - crop[y * s + x]);
    }
  }
  const area = (hi - lo) * (hi - lo);
  vGrad /= area;
  hGrad /= area;

  let center = 0;
  let centerCount = 0;
  for (let y = lo; y < hi; y++) {
    for (let x = lo; x < hi; x++) {
      center += crop[y * s + x];
      centerCount++;
    }
  }
  const contrast = mean - center / centerCount;
  return new Float64Array([mean, vGrad, hGrad, contrast]);
}
