/**
 * Landmark-driven mouth cropping: a similarity transform maps the two mouth
 * corners to canonical positions in a crop_size x crop_size patch, frames
 * are warped with bilinear sampling. Face detection/landmarking itself is
 * external; a landmarks sidecar supplies per-frame points and frames without
 * landmarks count as detection failures.
 */

import { LumaVideo } from "./y4m.js";

export const CROP_SIZE = 96;

export interface FrameLandmarks {
  frame: number;
  mouthLeft: [number, number];
  mouthRight: [number, number];
}

export function parseLandmarksJsonl(text: string): Map<number, FrameLandmarks> {
  const out = new Map<number, FrameLandmarks>();
  for (const [lineno, raw] of text.split("\n").entries()) {
    const line = raw.trim();
    if (!line) continue;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`landmarks line ${lineno + 1}: invalid JSON`);
    }
    if (
      typeof obj.frame !== "number" ||
      !Array.isArray(obj.mouth_left) ||
      !Array.isArray(obj.mouth_right)
    ) {
      throw new Error(`landmarks line ${lineno + 1}: need frame, mouth_left, mouth_right`);
    }
    out.set(obj.frame, {
      frame: obj.frame,
      mouthLeft: [obj.mouth_left[0], obj.mouth_left[1]],
      mouthRight: [obj.mouth_right[0], obj.mouth_right[1]],
    });
  }
  return out;
}

/** canonical mouth-corner positions inside the crop */
const DST_LEFT: [number, number] = [CROP_SIZE * (1 / 3), CROP_SIZE / 2];
const DST_RIGHT: [number, number] = [CROP_SIZE * (2 / 3), CROP_SIZE / 2];

function bilinear(frame: Uint8Array, width: number, height: number, x: number, y: number): number {
  const x0 = Math.floor(x);
  const y0 = Math.floor(y);
  if (x0 < 0 || y0 < 0 || x0 >= width - 1 || y0 >= height - 1) {
    // clamp to border
    const cx = Math.min(width - 1, Math.max(0, Math.round(x)));
    const cy = Math.min(height - 1, Math.max(0, Math.round(y)));
    return frame[cy * width + cx];
  }
  const fx = x - x0;
  const fy = y - y0;
  const p00 = frame[y0 * width + x0];
  const p01 = frame[y0 * width + x0 + 1];
  const p10 = frame[(y0 + 1) * width + x0];
  const p11 = frame[(y0 + 1) * width + x0 + 1];
  return p00 * (1 - fx) * (1 - fy) + p01 * fx * (1 - fy) + p10 * (1 - fx) * fy + p11 * fx * fy;
}

/**
 * Warp one frame so the given mouth corners land on the canonical points.
 * Returns a CROP_SIZE^2 patch with values scaled to [0, 1].
 */
export function cropMouth(
  frame: Uint8Array,
  width: number,
  height: number,
  marks: FrameLandmarks,
): Float32Array {
  // similarity transform: solve scale/rotation mapping dst -> src so we can
  // sample the source at each crop pixel
  const [sx0, sy0] = marks.mouthLeft;
  const [sx1, sy1] = marks.mouthRight;
  const [dx0, dy0] = DST_LEFT;
  const [dx1, dy1] = DST_RIGHT;
  const dSrc: [number, number] = [sx1 - sx0, sy1 - sy0];
  const dDst: [number, number] = [dx1 - dx0, dy1 - dy0];
  const dstLen2 = dDst[0] * dDst[0] + dDst[1] * dDst[1];
  if (dSrc[0] === 0 && dSrc[1] === 0) throw new Error("degenerate mouth landmarks");
  // complex division (a+bi)/(c+di) gives the rotation+scale dst->src
  const a = (dSrc[0] * dDst[0] + dSrc[1] * dDst[1]) / dstLen2;
  const b = (dSrc[1] * dDst[0] - dSrc[0] * dDst[1]) / dstLen2;
  const out = new Float32Array(CROP_SIZE * CROP_SIZE);
  for (let y = 0; y < CROP_SIZE; y++) {
    for (let x = 0; x < CROP_SIZE; x++) {
      const rx = x - dx0;
      const ry = y - dy0;
      const srcX = sx0 + a * rx - b * ry;
      const srcY = sy0 + b * rx + a * ry;
      out[y * CROP_SIZE + x] = bilinear(frame, width, height, srcX, srcY) / 255;
    }
  }
  return out;
}

export interface CropResult {
  crops: Float32Array[];
  missingFrames: number[];
}

/**
 * Crop every frame; frames without landmarks reuse the nearest available
 * ones. The caller enforces the failure budget on missingFrames.
 */
export function cropVideo(video: LumaVideo, landmarks: Map<number, FrameLandmarks>): CropResult {
  const available = [...landmarks.keys()].sort((p, q) => p - q);
  if (available.length === 0) throw new Error("no landmarks at all");
  const missing: number[] = [];
  const crops: Float32Array[] = [];
  for (let t = 0; t < video.frames.length; t++) {
    let marks = landmarks.get(t);
    if (!marks) {
      missing.push(t);
      let nearest = available[0];
      for (const f of available) {
        if (Math.abs(f - t) < Math.abs(nearest - t)) nearest = f;
      }
      marks = landmarks.get(nearest)!;
    }
    crops.push(cropMouth(video.frames[t], video.width, video.height, marks));
  }
  return { crops, missingFrames: missing };
}
