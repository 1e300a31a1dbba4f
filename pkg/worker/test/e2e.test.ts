/**
 * Desk-scale end-to-end: the search CLI drives this worker as its
 * external evaluator over a reduced configuration (population 20,
 * selection 5, three iterations, brief regime, 8 channels) on the local
 * digit dataset. The discovered architecture must train to a brief
 * validation accuracy above the median of the first iteration's
 * population, and the whole run must finish within the two-hour budget.
 */

import { spawn } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import { MAIN_JS, ResultMessage, WORKER_DIR, WorkerProcess } from "./helpers.js";

const BUDGET_SECONDS = 7200;
const DATA_ROOT = path.join(WORKER_DIR, "data");

// Async so the long search does not block the event loop (a synchronous
// spawn starves the runner's IPC for the entire run).
function runCommand(
  command: string,
  args: string[],
  timeoutMs: number,
): Promise<{ status: number | null; stderr: string }> {
  return new Promise((resolve, reject) => {
    const child = spawn(command, args, { timeout: timeoutMs });
    let stderr = "";
    child.stdout.resume();
    child.stderr.on("data", (chunk: Buffer) => { stderr += chunk.toString(); });
    child.on("error", reject);
    child.on("close", (status) => resolve({ status, stderr }));
  });
}

const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "ased-e2e-"));

afterAll(() => {
  fs.rmSync(scratch, { recursive: true, force: true });
});

function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = sorted.length >> 1;
  return sorted.length % 2 ? sorted[mid]! : (sorted[mid - 1]! + sorted[mid]!) / 2;
}

describe("desk-scale search with the real trainer", () => {
  it("beats the iteration-1 population median within budget", async () => {
    const started = Date.now();
    const configPath = path.join(scratch, "config.json");
    const runDir = path.join(scratch, "run");
    fs.writeFileSync(configPath, JSON.stringify({
      profile: "modified",
      k: 20,
      k_s: 5,
      k_init: 20,
      t_max: 3,
      channels: 8,
      dataset: "digits",
      regime: "brief",
      seed: 7,
      evaluator: {
        kind: "worker",
        command: `node ${MAIN_JS} serve --dataset-root ${DATA_ROOT}`,
        pool_size: 1,
        timeout: 1800,
      },
    }, null, 2));

    const search = await runCommand(
      "ased",
      ["search", "--config", configPath, "--out", runDir],
      BUDGET_SECONDS * 1000,
    );
    expect(search.status, `search failed:\n${search.stderr}`).toBe(0);

    // Median brief accuracy of the first iteration's 20 candidates.
    const rows = fs.readFileSync(path.join(runDir, "candidates.csv"), "utf-8")
      .trim().split("\n").slice(1).map((line) => line.split(","));
    const firstIteration = rows.filter((r) => r[0] === "1");
    expect(firstIteration.length).toBe(20);
    const baseline = median(firstIteration.map((r) => parseFloat(r[4]!)));

    const finalArch = JSON.parse(
      fs.readFileSync(path.join(runDir, "final_architecture.json"), "utf-8"),
    ) as { layers: string; shortcuts: Array<[number, number]>; channels: number };

    // Score the discovered architecture with one more brief training.
    const worker = new WorkerProcess(DATA_ROOT);
    let finalAccuracy: number;
    try {
      await worker.nextLine();
      worker.send({
        type: "eval",
        id: "final",
        layers: finalArch.layers,
        shortcuts: finalArch.shortcuts,
        channels: finalArch.channels,
        dataset: "digits",
        regime: "brief",
        seed: 990007,
      });
      const result = JSON.parse(await worker.nextLine(1_800_000)) as ResultMessage;
      expect(result.status).toBe("ok");
      finalAccuracy = result.accuracy!;
      worker.send({ type: "shutdown" });
      await worker.exitCode();
    } finally {
      worker.kill();
    }

    const elapsed = (Date.now() - started) / 1000;
    console.log(
      `e2e: ${elapsed.toFixed(0)}s total; iteration-1 median ${baseline.toFixed(3)}; ` +
      `final ${finalArch.layers} at ${finalAccuracy.toFixed(3)}`,
    );
    expect(finalAccuracy).toBeGreaterThan(baseline);
    expect(elapsed).toBeLessThan(BUDGET_SECONDS);
  }, BUDGET_SECONDS * 1000);
});
