/**
 * Embedding model interface plus the built-in reference backend.
 *
 * A backend turns mouth crops and an audio waveform into per-frame
 * embeddings of a shared dimensionality, one row per 25 fps frame, such
 * that matched content scores high under cosine similarity. Checkpoint-
 * backed models implement this interface; `createModel` is the registry.
 */

import { CROP_SIZE } from "./crop.js";
import { mfcc, mouthDescriptors, stackFrames } from "./features.js";
import { Waveform } from "./wav.js";

export interface EmbeddingModel {
  id: string;
  dim: number;
  /** embedding layer recorded in the export metadata */
  layer: string;
  embedVisual(crops: Float32Array[]): Float32Array[];
  embedAudio(wave: Waveform): Float32Array[];
}

function zScoreColumns(rows: Float64Array[]): void {
  if (rows.length === 0) return;
  const dim = rows[0].length;
  for (let j = 0; j < dim; j++) {
    let mean = 0;
    for (const r of rows) mean += r[j];
    mean /= rows.length;
    let varAcc = 0;
    for (const r of rows) varAcc += (r[j] - mean) ** 2;
    const std = Math.sqrt(varAcc / rows.length) || 1;
    for (const r of rows) r[j] = (r[j] - mean) / std;
  }
}

function withDeltas(rows: Float64Array[]): Float32Array[] {
  // [features, one-step deltas]: activity and its motion, per frame
  const dim = rows[0].length;
  return rows.map((row, t) => {
    const prev = rows[Math.max(0, t - 1)];
    const out = new Float32Array(2 * dim);
    for (let j = 0; j < dim; j++) {
      out[j] = row[j];
      out[dim + j] = row[j] - prev[j];
    }
    return out;
  });
}

/**
 * Deterministic DSP baseline: both modalities are reduced to per-frame
 * speech-activity descriptors on shared coordinates (activity level,
 * activity change), so synchronized mouth motion and audio energy land on
 * aligned embeddings without any learned weights. Serves as the executable
 * stand-in where no pretrained checkpoint is available; real checkpoints
 * plug in through the same interface.
 */
class DspReferenceModel implements EmbeddingModel {
  id = "ref-dsp-v1";
  dim = 4;
  layer = "dsp-activity-descriptors";

  embedVisual(crops: Float32Array[]): Float32Array[] {
    const rows = crops.map((c) => {
      const d = mouthDescriptors(c);
      // openness proxy and contrast carry the speech activity
      return new Float64Array([d[1], d[3]]);
    });
    zScoreColumns(rows);
    return withDeltas(rows);
  }

  embedAudio(wave: Waveform): Float32Array[] {
    const coeffs = stackFrames(mfcc(wave), 4);
    const rows = coeffs.map((row) => {
      // c0 across the 4 stacked subframes ~ frame loudness; the first
      // higher coefficient tracks spectral shape movement
      const c0 = (row[0] + row[13] + row[26] + row[39]) / 4;
      const c1 = (row[1] + row[14] + row[27] + row[40]) / 4;
      return new Float64Array([c0, c1]);
    });
    zScoreColumns(rows);
    return withDeltas(rows);
  }
}

export function createModel(id: string): EmbeddingModel {
  if (id === "ref-dsp-v1") return new DspReferenceModel();
  throw new Error(
    `unknown model id ${JSON.stringify(id)}; available: ref-dsp-v1 ` +
      "(checkpoint-backed models implement the EmbeddingModel interface)",
  );
}

export { CROP_SIZE };
