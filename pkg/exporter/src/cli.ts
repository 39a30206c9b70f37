#!/usr/bin/env node
/**
 * avsf-export: write AVSF embedding files from video+audio inputs.
 *
 *   avsf-export export --video v.y4m --audio-from a.wav [--landmarks l.jsonl]
 *                      --model ref-dsp-v1 --out-prefix out/v
 *   avsf-export batch --jobs jobs.jsonl --out-dir out/ [--model ref-dsp-v1]
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { parseJobsJsonl, runBatch, runExport } from "./export.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${argv[i]}`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new Error(`missing required flag --${name}`);
  return value;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "export") {
      const flags = parseFlags(rest);
      const result = runExport({
        videoPath: need(flags, "video"),
        audioPath: need(flags, "audio-from"),
        landmarksPath: flags.get("landmarks"),
        modelId: flags.get("model") ?? "ref-dsp-v1",
        outPrefix: need(flags, "out-prefix"),
      });
      process.stdout.write(
        `${result.visualPath},${result.audioPath},${result.frames}\n`,
      );
      return 0;
    }
    if (command === "batch") {
      const flags = parseFlags(rest);
      const jobsPath = need(flags, "jobs");
      const jobs = parseJobsJsonl(fs.readFileSync(jobsPath, "utf-8"));
      const manifest = runBatch(
        jobs,
        path.dirname(path.resolve(jobsPath)),
        need(flags, "out-dir"),
        flags.get("model") ?? "ref-dsp-v1",
      );
      process.stdout.write(`${manifest}\n`);
      return 0;
    }
    process.stderr.write(
      "usage: avsf-export export --video v.y4m --audio-from a.wav --out-prefix p\n" +
        "       avsf-export batch --jobs jobs.jsonl --out-dir dir\n",
    );
    return 1;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(js|ts)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
