/** Shared test plumbing: a line-oriented client around a worker process. */

import { ChildProcess, spawn } from "node:child_process";
import * as path from "node:path";
import * as readline from "node:readline";
import { fileURLToPath } from "node:url";

export const WORKER_DIR = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..");
export const MAIN_JS = path.join(WORKER_DIR, "dist", "main.js");

export class WorkerProcess {
  readonly child: ChildProcess;
  private readonly lines: string[] = [];
  private readonly waiters: Array<(line: string) => void> = [];
  private readonly stderrChunks: string[] = [];
  private ended = false;

  constructor(datasetRoot: string) {
    this.child = spawn("node", [MAIN_JS, "serve", "--dataset-root", datasetRoot], {
      cwd: WORKER_DIR,
      stdio: ["pipe", "pipe", "pipe"],
    });
    const rl = readline.createInterface({ input: this.child.stdout!, crlfDelay: Infinity });
    rl.on("line", (line) => {
      const waiter = this.waiters.shift();
      if (waiter) waiter(line);
      else this.lines.push(line);
    });
    rl.on("close", () => { this.ended = true; });
    this.child.stderr!.on("data", (chunk) => this.stderrChunks.push(String(chunk)));
  }

  send(message: unknown): void {
    const text = typeof message === "string" ? message : JSON.stringify(message);
    this.child.stdin!.write(text + "\n");
  }

  /** Next stdout line, or rejection after the timeout. */
  nextLine(timeoutMs = 60_000): Promise<string> {
    const buffered = this.lines.shift();
    if (buffered !== undefined) return Promise.resolve(buffered);
    if (this.ended) return Promise.reject(new Error("worker stdout closed"));
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const at = this.waiters.indexOf(entry);
        if (at >= 0) this.waiters.splice(at, 1);
        reject(new Error(`no worker output within ${timeoutMs}ms; stderr: ${this.stderr()}`));
      }, timeoutMs);
      const entry = (line: string) => {
        clearTimeout(timer);
        resolve(line);
      };
      this.waiters.push(entry);
    });
  }

  /** True if a line arrives within the window; used to prove silence. */
  async anyLineWithin(ms: number): Promise<boolean> {
    try {
      const line = await this.nextLine(ms);
      this.lines.unshift(line);
      return true;
    } catch {
      return false;
    }
  }

  stderr(): string {
    return this.stderrChunks.join("");
  }

  exitCode(timeoutMs = 15_000): Promise<number | null> {
    if (this.child.exitCode !== null) return Promise.resolve(this.child.exitCode);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("worker did not exit")), timeoutMs);
      this.child.once("exit", (code) => {
        clearTimeout(timer);
        resolve(code);
      });
    });
  }

  kill(): void {
    if (this.child.exitCode === null) this.child.kill("SIGKILL");
  }
}

export interface ResultMessage {
  type: string;
  id: string;
  accuracy?: number;
  matthews?: number;
  params?: number;
  status: string;
  error?: string;
}

export function evalRequest(id: string, layers: string, overrides: Record<string, unknown> = {}) {
  return {
    type: "eval",
    id,
    layers,
    shortcuts: [],
    channels: 8,
    dataset: "tinyset",
    regime: "brief",
    seed: 1234,
    ...overrides,
  };
}
