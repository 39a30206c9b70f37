/**
 * Export pipeline: mouth-cropped (or landmark-annotated) 25 fps video plus
 * 16 kHz audio -> one visual and one audio AVSF file with matching frame
 * counts, plus a metadata JSON recording the model and layer choice.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { encodeAvsf } from "./avsf.js";
import { CROP_SIZE, FrameLandmarks, cropVideo, parseLandmarksJsonl } from "./crop.js";
import { createModel } from "./model.js";
import { decodeWav } from "./wav.js";
import { decodeY4m } from "./y4m.js";

export const FPS = 25;
export const MAX_MISSING_FRACTION = 0.2;

export interface ExportJob {
  videoPath: string;
  audioPath: string;
  landmarksPath?: string;
  modelId: string;
  outPrefix: string;
}

export interface ExportResult {
  visualPath: string;
  audioPath: string;
  metaPath: string;
  frames: number;
  dim: number;
}

function flatten(rows: Float32Array[]): Float32Array {
  const dim = rows[0].length;
  const out = new Float32Array(rows.length * dim);
  rows.forEach((row, t) => out.set(row, t * dim));
  return out;
}

export function runExport(job: ExportJob): ExportResult {
  const video = decodeY4m(fs.readFileSync(job.videoPath));
  if (Math.abs(video.fps - FPS) > 1e-6) {
    throw new Error(`video must be ${FPS} fps, got ${video.fps} (convert upstream)`);
  }
  const wave = decodeWav(fs.readFileSync(job.audioPath));

  let crops: Float32Array[];
  let missing = 0;
  if (job.landmarksPath) {
    const landmarks = parseLandmarksJsonl(fs.readFileSync(job.landmarksPath, "utf-8"));
    const result = cropVideo(video, landmarks);
    missing = result.missingFrames.length;
    if (missing > MAX_MISSING_FRACTION * video.frames.length) {
      throw new Error(
        `face landmarks missing in ${missing}/${video.frames.length} frames ` +
          `(> ${MAX_MISSING_FRACTION * 100}% budget)`,
      );
    }
    crops = result.crops;
  } else {
    if (video.width !== CROP_SIZE || video.height !== CROP_SIZE) {
      throw new Error(
        `without landmarks the video must already be ${CROP_SIZE}x${CROP_SIZE} ` +
          `mouth crops, got ${video.width}x${video.height}`,
      );
    }
    crops = video.frames.map((f) => Float32Array.from(f, (v) => v / 255));
  }

  const model = createModel(job.modelId);
  const visual = model.embedVisual(crops);
  const audio = model.embedAudio(wave);
  const frames = Math.min(visual.length, audio.length);
  if (frames < 1) throw new Error("no overlapping frames after truncation");

  const visualPath = `${job.outPrefix}.visual.avsf`;
  const audioPath = `${job.outPrefix}.audio.avsf`;
  const metaPath = `${job.outPrefix}.meta.json`;
  fs.mkdirSync(path.dirname(path.resolve(visualPath)), { recursive: true });
  fs.writeFileSync(
    visualPath,
    encodeAvsf({
      modality: "visual",
      fps: FPS,
      frames,
      dim: model.dim,
      data: flatten(visual.slice(0, frames)),
    }),
  );
  fs.writeFileSync(
    audioPath,
    encodeAvsf({
      modality: "audio",
      fps: FPS,
      frames,
      dim: model.dim,
      data: flatten(audio.slice(0, frames)),
    }),
  );
  fs.writeFileSync(
    metaPath,
    JSON.stringify(
      {
        model_id: model.id,
        embedding_layer: model.layer,
        crop_size: CROP_SIZE,
        fps: FPS,
        frames,
        dim: model.dim,
        missing_landmark_frames: missing,
        video: path.basename(job.videoPath),
        audio: path.basename(job.audioPath),
      },
      null,
      2,
    ) + "\n",
  );
  return { visualPath, audioPath, metaPath, frames, dim: model.dim };
}

export interface BatchJob {
  id: string;
  label: "real" | "fake";
  category: string;
  video: string;
  audio: string;
  landmarks?: string;
}

export function parseJobsJsonl(text: string): BatchJob[] {
  const jobs: BatchJob[] = [];
  const seen = new Set<string>();
  for (const [lineno, raw] of text.split("\n").entries()) {
    const line = raw.trim();
    if (!line) continue;
    const obj = JSON.parse(line);
    for (const field of ["id", "label", "category", "video", "audio"]) {
      if (!(field in obj)) throw new Error(`jobs line ${lineno + 1}: missing ${field}`);
    }
    if (obj.label !== "real" && obj.label !== "fake") {
      throw new Error(`jobs line ${lineno + 1}: label must be "real" or "fake"`);
    }
    if (seen.has(obj.id)) throw new Error(`jobs line ${lineno + 1}: duplicate id ${obj.id}`);
    seen.add(obj.id);
    jobs.push(obj);
  }
  return jobs;
}

/** run every job, writing embeddings plus a manifest the primary toolkit loads */
export function runBatch(jobs: BatchJob[], baseDir: string, outDir: string, modelId: string) {
  fs.mkdirSync(outDir, { recursive: true });
  const manifestLines: string[] = [];
  for (const job of jobs) {
    const result = runExport({
      videoPath: path.resolve(baseDir, job.video),
      audioPath: path.resolve(baseDir, job.audio),
      landmarksPath: job.landmarks ? path.resolve(baseDir, job.landmarks) : undefined,
      modelId,
      outPrefix: path.join(outDir, job.id),
    });
    manifestLines.push(
      JSON.stringify({
        id: job.id,
        label: job.label,
        category: job.category,
        visual_path: path.basename(result.visualPath),
        audio_path: path.basename(result.audioPath),
      }),
    );
  }
  const manifestPath = path.join(outDir, "manifest.jsonl");
  fs.writeFileSync(manifestPath, manifestLines.join("\n") + "\n");
  return manifestPath;
}
