/**
 * Wire protocol: newline-delimited JSON over standard input/output.
 *
 * Handshake {"type":"ready","protocol":1}; requests {"type":"eval",...};
 * responses {"type":"result",...} with either the ok payload or a failed
 * status plus error text. Unknown fields on requests are ignored. A line
 * that cannot yield an id is logged and skipped; anything parseable with
 * an id but otherwise unusable earns a failed result for that id.
 */

export const PROTOCOL_VERSION = 1;

export interface EvalRequest {
  id: string;
  layers: string;
  shortcuts: Array<[number, number]>;
  channels: number;
  dataset: string;
  regime: string;
  seed: number;
}

export type ParsedLine =
  | { kind: "eval"; request: EvalRequest }
  | { kind: "shutdown" }
  | { kind: "reject"; id: string; reason: string }
  | { kind: "skip"; reason: string };

export function readyLine(): string {
  return JSON.stringify({ type: "ready", protocol: PROTOCOL_VERSION });
}

export function okResultLine(id: string, accuracy: number, matthews: number, params: number): string {
  return JSON.stringify({ type: "result", id, accuracy, matthews, params, status: "ok" });
}

export function failedResultLine(id: string, error: string): string {
  return JSON.stringify({ type: "result", id, status: "failed", error });
}

function idOf(value: unknown): string | null {
  if (typeof value === "object" && value !== null) {
    const id = (value as Record<string, unknown>)["id"];
    if (typeof id === "string" && id.length > 0) return id;
  }
  return null;
}

export function parseLine(line: string): ParsedLine {
  let value: unknown;
  try {
    value = JSON.parse(line);
  } catch {
    return { kind: "skip", reason: "not valid JSON" };
  }
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    return { kind: "skip", reason: "not a JSON object" };
  }
  const msg = value as Record<string, unknown>;
  const id = idOf(msg);
  if (msg["type"] === "shutdown") return { kind: "shutdown" };
  if (msg["type"] !== "eval") {
    const reason = `unknown message type ${JSON.stringify(msg["type"])}`;
    return id ? { kind: "reject", id, reason } : { kind: "skip", reason };
  }
  if (!id) return { kind: "skip", reason: "eval request without an id" };

  if (typeof msg["layers"] !== "string" || msg["layers"].length === 0) {
    return { kind: "reject", id, reason: "eval request needs a layers string" };
  }
  const shortcuts: Array<[number, number]> = [];
  const rawShortcuts = msg["shortcuts"] ?? [];
  if (!Array.isArray(rawShortcuts)) {
    return { kind: "reject", id, reason: "shortcuts must be an array of [start, end] pairs" };
  }
  for (const pair of rawShortcuts) {
    if (!Array.isArray(pair) || pair.length !== 2
        || !Number.isInteger(pair[0]) || !Number.isInteger(pair[1])) {
      return { kind: "reject", id, reason: "shortcuts must be an array of [start, end] pairs" };
    }
    shortcuts.push([pair[0], pair[1]]);
  }
  const channels = msg["channels"];
  if (!Number.isInteger(channels) || (channels as number) < 1) {
    return { kind: "reject", id, reason: "channels must be a positive integer" };
  }
  const dataset = msg["dataset"];
  if (typeof dataset !== "string" || dataset.length === 0) {
    return { kind: "reject", id, reason: "eval request needs a dataset name" };
  }
  const regime = msg["regime"];
  if (regime !== "brief" && regime !== "full") {
    return { kind: "reject", id, reason: `unknown training regime ${JSON.stringify(regime)}` };
  }
  const seed = msg["seed"];
  if (!Number.isInteger(seed)) {
    return { kind: "reject", id, reason: "seed must be an integer" };
  }
  return {
    kind: "eval",
    request: {
      id,
      layers: msg["layers"],
      shortcuts,
      channels: channels as number,
      dataset,
      regime,
      seed: seed as number,
    },
  };
}
