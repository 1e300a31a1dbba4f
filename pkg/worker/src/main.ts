/**
 * Entry point.
 *
 * serve mode attaches to a search engine as an external evaluator:
 *   node dist/main.js serve [--dataset-root DIR]
 *
 * eval-file mode trains a stored architecture file once, by default
 * under the full regime scored on the test split, and prints metrics:
 *   node dist/main.js eval-file ARCH.json --dataset NAME \
 *       [--dataset-root DIR] [--regime brief|full] [--split validation|test] [--seed N]
 *
 * The dataset root falls back to $ASED_DATASET_ROOT, then ./data.
 */

import * as fs from "node:fs";
import * as tf from "@tensorflow/tfjs";
import { loadDataset } from "./data.js";
import { serve } from "./serve.js";
import { regimeFor, trainAndScore } from "./train.js";

interface Flags {
  positional: string[];
  options: Map<string, string>;
}

function parseArgs(argv: string[]): Flags {
  const positional: string[] = [];
  const options = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    if (arg.startsWith("--")) {
      const value = argv[i + 1];
      if (value === undefined) throw new Error(`flag ${arg} needs a value`);
      options.set(arg.slice(2), value);
      i++;
    } else {
      positional.push(arg);
    }
  }
  return { positional, options };
}

function datasetRootOf(flags: Flags): string {
  return flags.options.get("dataset-root") ?? process.env["ASED_DATASET_ROOT"] ?? "data";
}

async function evalFile(flags: Flags): Promise<void> {
  const archPath = flags.positional[0];
  if (!archPath) throw new Error("eval-file needs an architecture file path");
  const datasetName = flags.options.get("dataset");
  if (!datasetName) throw new Error("eval-file needs --dataset NAME");
  const payload = JSON.parse(fs.readFileSync(archPath, "utf-8")) as {
    layers: string;
    shortcuts?: Array<[number, number]>;
    channels?: number;
  };
  const regime = regimeFor(flags.options.get("regime") ?? "full");
  const split = (flags.options.get("split") ?? "test") as "validation" | "test";
  if (split !== "validation" && split !== "test") {
    throw new Error(`unknown split ${JSON.stringify(split)}`);
  }
  const seed = parseInt(flags.options.get("seed") ?? "0", 10);
  const data = loadDataset(datasetRootOf(flags), datasetName);
  const report = trainAndScore(
    {
      layers: payload.layers,
      shortcuts: payload.shortcuts ?? [],
      channels: payload.channels ?? 32,
      seed,
    },
    data,
    regime,
    split,
  );
  process.stdout.write(JSON.stringify({
    layers: payload.layers,
    regime: regime.name,
    split,
    accuracy: report.accuracy,
    matthews: report.matthews,
    params: report.params,
  }) + "\n");
}

async function main(): Promise<void> {
  tf.enableProdMode();
  await tf.setBackend("cpu");
  await tf.ready();
  const [command, ...rest] = process.argv.slice(2);
  const flags = parseArgs(rest);
  if (command === "serve") {
    await serve(datasetRootOf(flags));
    return;
  }
  if (command === "eval-file") {
    await evalFile(flags);
    return;
  }
  process.stderr.write("usage: main.js serve [--dataset-root DIR]\n");
  process.stderr.write("       main.js eval-file ARCH.json --dataset NAME [options]\n");
  process.exit(1);
}

main().catch((error) => {
  process.stderr.write(`worker: fatal: ${error instanceof Error ? error.message : error}\n`);
  process.exit(1);
});
