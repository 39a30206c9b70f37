import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { spawnSync } from "node:child_process";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { decodeAvsf } from "../src/avsf.js";
import { cropVideo, parseLandmarksJsonl } from "../src/crop.js";
import { runExport, parseJobsJsonl, runBatch } from "../src/export.js";
import { encodeWav } from "../src/wav.js";
import { encodeY4m } from "../src/y4m.js";
import { main as cliMain } from "../src/cli.js";
import {
  fixedOffsetScore,
  landmarksFor,
  makeMouthVideo,
  makeVoice,
  syllableEnvelope,
} from "./fixtures.js";

let dir: string;

beforeAll(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "avsf-export-"));
});

afterAll(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function writeSample(
  name: string,
  frames: number,
  videoSeed: number,
  audioSeed: number,
  videoEnvelopeSeed: number,
  audioEnvelopeSeed: number,
) {
  const audioEnv = syllableEnvelope(frames, audioEnvelopeSeed);
  const videoEnv =
    videoEnvelopeSeed === audioEnvelopeSeed
      ? audioEnv
      : syllableEnvelope(frames, videoEnvelopeSeed);
  const videoPath = path.join(dir, `${name}.y4m`);
  const audioPath = path.join(dir, `${name}.wav`);
  fs.writeFileSync(videoPath, encodeY4m(makeMouthVideo(videoEnv, videoSeed)));
  fs.writeFileSync(audioPath, encodeWav(makeVoice(audioEnv, audioSeed)));
  return { videoPath, audioPath };
}

describe("export pipeline", () => {
  it("emits parseable AVSF pairs with matching frame counts", () => {
    const { videoPath, audioPath } = writeSample("real0", 100, 11, 12, 1, 1);
    const result = runExport({
      videoPath,
      audioPath,
      modelId: "ref-dsp-v1",
      outPrefix: path.join(dir, "out/real0"),
    });
    const visual = decodeAvsf(fs.readFileSync(result.visualPath));
    const audio = decodeAvsf(fs.readFileSync(result.audioPath));
    expect(visual.modality).toBe("visual");
    expect(audio.modality).toBe("audio");
    expect(visual.frames).toBe(audio.frames);
    expect(visual.dim).toBe(audio.dim);
    expect(visual.fps).toBe(25);
    // a 4 s clip at 25 fps: video has 100 frames, stacked audio 99; the
    // pair is truncated to the common count
    expect(visual.frames).toBe(99);
    const meta = JSON.parse(fs.readFileSync(result.metaPath, "utf-8"));
    expect(meta.model_id).toBe("ref-dsp-v1");
    expect(meta.crop_size).toBe(96);
    expect(meta.fps).toBe(25);
  });

  it("scores a real pair above its lip-synced fake", () => {
    const frames = 250; // 10 s
    const real = writeSample("real1", frames, 21, 22, 5, 5);
    // same audio, mouth re-rendered from an independent envelope
    const fake = writeSample("fake1", frames, 21, 22, 99, 5);
    const scores: Record<string, number> = {};
    for (const [name, sample] of Object.entries({ real: real, fake: fake })) {
      const result = runExport({
        videoPath: sample.videoPath,
        audioPath: sample.audioPath,
        modelId: "ref-dsp-v1",
        outPrefix: path.join(dir, `out/${name}1`),
      });
      const visual = decodeAvsf(fs.readFileSync(result.visualPath));
      const audio = decodeAvsf(fs.readFileSync(result.audioPath));
      scores[name] = fixedOffsetScore(
        visual.data,
        audio.data,
        visual.frames,
        visual.dim,
      );
    }
    expect(scores.real).toBeGreaterThan(scores.fake);
    expect(scores.real).toBeGreaterThan(0.3);
  });

  it("applies landmark cropping and enforces the missing-frame budget", () => {
    const frames = 50;
    const env = syllableEnvelope(frames, 7);
    const video = makeMouthVideo(env, 31, {
      width: 192,
      height: 144,
      mouthX: 120,
      mouthY: 80,
    });
    const videoPath = path.join(dir, "wide.y4m");
    fs.writeFileSync(videoPath, encodeY4m(video));
    const audioPath = path.join(dir, "wide.wav");
    fs.writeFileSync(audioPath, encodeWav(makeVoice(env, 32)));

    // a few missing frames reuse the nearest landmarks
    const fewMissing = path.join(dir, "wide.landmarks.jsonl");
    fs.writeFileSync(fewMissing, landmarksFor(frames, 120, 80, [3, 4, 5]));
    const result = runExport({
      videoPath,
      audioPath,
      landmarksPath: fewMissing,
      modelId: "ref-dsp-v1",
      outPrefix: path.join(dir, "out/wide"),
    });
    expect(result.frames).toBeGreaterThan(0);
    const meta = JSON.parse(
      fs.readFileSync(path.join(dir, "out/wide.meta.json"), "utf-8"),
    );
    expect(meta.missing_landmark_frames).toBe(3);

    // >20% missing fails the job
    const manyMissing = path.join(dir, "wide.bad.jsonl");
    const dropped = Array.from({ length: 15 }, (_, i) => i * 3);
    fs.writeFileSync(manyMissing, landmarksFor(frames, 120, 80, dropped));
    expect(() =>
      runExport({
        videoPath,
        audioPath,
        landmarksPath: manyMissing,
        modelId: "ref-dsp-v1",
        outPrefix: path.join(dir, "out/widebad"),
      }),
    ).toThrow(/landmarks missing/);
  });

  it("landmark crop centers the mouth like a pre-cropped input", () => {
    const frames = 30;
    const env = syllableEnvelope(frames, 9);
    const wide = makeMouthVideo(env, 41, {
      width: 192,
      height: 144,
      mouthX: 120,
      mouthY: 80,
    });
    const landmarks = parseLandmarksJsonl(landmarksFor(frames, 120, 80));
    const { crops } = cropVideo(wide, landmarks);
    expect(crops.length).toBe(frames);
    // the dark mouth ellipse lands in the central band of the crop
    const crop = crops[10];
    let centerMean = 0;
    let borderMean = 0;
    let centerN = 0;
    let borderN = 0;
    for (let y = 0; y < 96; y++) {
      for (let x = 0; x < 96; x++) {
        const v = crop[y * 96 + x];
        if (Math.abs(y - 48) < 12 && Math.abs(x - 48) < 20) {
          centerMean += v;
          centerN++;
        } else if (y < 8 || y > 88) {
          borderMean += v;
          borderN++;
        }
      }
    }
    expect(centerMean / centerN).toBeLessThan(borderMean / borderN);
  });

  it("rejects non-25fps and oversized videos without landmarks", () => {
    const env = syllableEnvelope(10, 1);
    const video = makeMouthVideo(env, 1);
    video.fps = 30;
    const videoPath = path.join(dir, "fps30.y4m");
    fs.writeFileSync(videoPath, encodeY4m(video));
    const audioPath = path.join(dir, "fps30.wav");
    fs.writeFileSync(audioPath, encodeWav(makeVoice(env, 2)));
    expect(() =>
      runExport({
        videoPath,
        audioPath,
        modelId: "ref-dsp-v1",
        outPrefix: path.join(dir, "out/fps30"),
      }),
    ).toThrow(/25 fps/);

    const big = makeMouthVideo(env, 1, { width: 128, height: 128 });
    const bigPath = path.join(dir, "big.y4m");
    fs.writeFileSync(bigPath, encodeY4m(big));
    expect(() =>
      runExport({
        videoPath: bigPath,
        audioPath,
        modelId: "ref-dsp-v1",
        outPrefix: path.join(dir, "out/big"),
      }),
    ).toThrow(/96x96/);
  });

  it("rejects unknown model ids", () => {
    const { videoPath, audioPath } = writeSample("m", 30, 1, 2, 3, 3);
    expect(() =>
      runExport({
        videoPath,
        audioPath,
        modelId: "nope",
        outPrefix: path.join(dir, "out/m"),
      }),
    ).toThrow(/unknown model/);
  });
});

describe("batch mode", () => {
  it("writes a manifest the primary toolkit can load", () => {
    const a = writeSample("batch_real", 60, 1, 2, 4, 4);
    const b = writeSample("batch_fake", 60, 1, 2, 77, 4);
    const jobs = [
      {
        id: "clip_real",
        label: "real",
        category: "real",
        video: path.basename(a.videoPath),
        audio: path.basename(a.audioPath),
      },
      {
        id: "clip_fake",
        label: "fake",
        category: "WL",
        video: path.basename(b.videoPath),
        audio: path.basename(b.audioPath),
      },
    ];
    const jobsPath = path.join(dir, "jobs.jsonl");
    fs.writeFileSync(jobsPath, jobs.map((j) => JSON.stringify(j)).join("\n") + "\n");
    const outDir = path.join(dir, "batch_out");
    const manifestPath = runBatch(
      parseJobsJsonl(fs.readFileSync(jobsPath, "utf-8")),
      dir,
      outDir,
      "ref-dsp-v1",
    );
    const lines = fs
      .readFileSync(manifestPath, "utf-8")
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l));
    expect(lines.length).toBe(2);
    expect(lines[0]).toEqual({
      id: "clip_real",
      label: "real",
      category: "real",
      visual_path: "clip_real.visual.avsf",
      audio_path: "clip_real.audio.avsf",
    });
    for (const line of lines) {
      const visual = decodeAvsf(fs.readFileSync(path.join(outDir, line.visual_path)));
      const audio = decodeAvsf(fs.readFileSync(path.join(outDir, line.audio_path)));
      expect(visual.frames).toBe(audio.frames);
    }
  });

  it("rejects duplicate ids and bad labels", () => {
    expect(() =>
      parseJobsJsonl(
        '{"id":"a","label":"real","category":"c","video":"v","audio":"a"}\n' +
          '{"id":"a","label":"fake","category":"c","video":"v","audio":"a"}\n',
      ),
    ).toThrow(/duplicate/);
    expect(() =>
      parseJobsJsonl('{"id":"a","label":"REAL","category":"c","video":"v","audio":"a"}\n'),
    ).toThrow(/label/);
  });
});

describe("cli", () => {
  it("export subcommand prints the output summary", () => {
    const { videoPath, audioPath } = writeSample("cli0", 40, 5, 6, 8, 8);
    const code = cliMain([
      "export",
      "--video",
      videoPath,
      "--audio-from",
      audioPath,
      "--out-prefix",
      path.join(dir, "out/cli0"),
    ]);
    expect(code).toBe(0);
    expect(fs.existsSync(path.join(dir, "out/cli0.visual.avsf"))).toBe(true);
  });

  it("unknown command exits nonzero", () => {
    expect(cliMain(["bogus"])).toBe(1);
  });
});

describe("conformance with the primary reader", () => {
  // spawning the primary CLI pays its import cost each time
  it("primary CLI parses exported files (skipped when avsf is absent)", { timeout: 120_000 }, () => {
    const probe = spawnSync("avsf", ["--help"], { encoding: "utf-8" });
    if (probe.error || probe.status !== 0) {
      console.warn("primary avsf CLI not on PATH; skipping cross-validation");
      return;
    }
    const { videoPath, audioPath } = writeSample("conf", 80, 3, 4, 6, 6);
    const result = runExport({
      videoPath,
      audioPath,
      modelId: "ref-dsp-v1",
      outPrefix: path.join(dir, "out/conf"),
    });
    const self = spawnSync(
      "avsf",
      ["score", "--visual", result.visualPath, "--audio", result.visualPath,
       "--alignment", "plain"],
      { encoding: "utf-8" },
    );
    expect(self.status).toBe(0);
    expect(self.stdout.trim()).toBe("1.0,");
    const cross = spawnSync(
      "avsf",
      ["score", "--visual", result.visualPath, "--audio", result.audioPath,
       "--alignment", "fixed", "--tau", "15"],
      { encoding: "utf-8" },
    );
    expect(cross.status).toBe(0);
    const score = parseFloat(cross.stdout.split(",")[0]);
    expect(Number.isFinite(score)).toBe(true);
    expect(score).toBeGreaterThanOrEqual(-1);
    expect(score).toBeLessThanOrEqual(1);
  });
});
