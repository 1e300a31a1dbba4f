/**
 * Serve loop: one request in flight at a time over stdio.
 *
 * Only protocol lines ever touch stdout; diagnostics go to stderr. A
 * shutdown message or end of input exits cleanly with code 0. Training
 * failures (bad layer strings, divergence, missing datasets) produce a
 * failed result for the request and the loop keeps serving.
 */

import * as readline from "node:readline";
import { loadDataset } from "./data.js";
import { failedResultLine, okResultLine, parseLine, readyLine } from "./protocol.js";
import { regimeFor, trainAndScore } from "./train.js";

function emit(line: string): void {
  process.stdout.write(line + "\n");
}

export async function serve(datasetRoot: string): Promise<void> {
  emit(readyLine());
  const rl = readline.createInterface({ input: process.stdin, crlfDelay: Infinity, terminal: false });
  for await (const raw of rl) {
    const line = raw.trim();
    if (!line) continue;
    const parsed = parseLine(line);
    if (parsed.kind === "skip") {
      process.stderr.write(`worker: ignoring line (${parsed.reason})\n`);
      continue;
    }
    if (parsed.kind === "reject") {
      emit(failedResultLine(parsed.id, parsed.reason));
      continue;
    }
    if (parsed.kind === "shutdown") {
      rl.close();
      process.exit(0);
    }
    const req = parsed.request;
    try {
      const data = loadDataset(datasetRoot, req.dataset);
      const regime = regimeFor(req.regime);
      const report = trainAndScore(
        { layers: req.layers, shortcuts: req.shortcuts, channels: req.channels, seed: req.seed },
        data,
        regime,
      );
      emit(okResultLine(req.id, report.accuracy, report.matthews, report.params));
    } catch (error) {
      emit(failedResultLine(req.id, error instanceof Error ? error.message : String(error)));
    }
  }
  process.exit(0);
}
