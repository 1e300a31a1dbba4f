/**
 * Layer shorthand grammar and shape bookkeeping.
 *
 * This mirrors the search engine's conventions exactly: convolutions are
 * zero-padded to preserve spatial dimensions, pools use stride 2, and a
 * pool whose output would drop below one pixel is demoted to identity
 * ("pool as identity"). Shortcut branches replay the pools the primary
 * path applied between their start and end, in order.
 */

export type LayerKind =
  | "identity"
  | "convolution"
  | "dilated_convolution"
  | "max_pool"
  | "avg_pool";

export interface LayerType {
  readonly shorthand: string;
  readonly kind: LayerKind;
  readonly kernel: number;
  readonly stride: number;
  readonly dilation: number;
}

const TOKEN_RE = /^(id|[cdma])(\d*)$/;

export function parseToken(token: string): LayerType {
  const m = TOKEN_RE.exec(token);
  if (!m) throw new Error(`unknown layer shorthand ${JSON.stringify(token)}`);
  const head = m[1]!;
  const digits = m[2]!;
  if (head === "id") {
    if (digits) throw new Error(`unknown layer shorthand ${JSON.stringify(token)}`);
    return { shorthand: token, kind: "identity", kernel: 1, stride: 1, dilation: 1 };
  }
  if (!digits) throw new Error(`unknown layer shorthand ${JSON.stringify(token)}`);
  const kernel = parseInt(digits, 10);
  if (kernel < 1) throw new Error(`unknown layer shorthand ${JSON.stringify(token)}`);
  switch (head) {
    case "c":
      return { shorthand: token, kind: "convolution", kernel, stride: 1, dilation: 1 };
    case "d":
      return { shorthand: token, kind: "dilated_convolution", kernel, stride: 1, dilation: 2 };
    case "m":
      return { shorthand: token, kind: "max_pool", kernel, stride: 2, dilation: 1 };
    default:
      return { shorthand: token, kind: "avg_pool", kernel, stride: 2, dilation: 1 };
  }
}

/** Parses hyphen-joined shorthand, e.g. "c3-m2-c5". */
export function parseLayers(text: string): LayerType[] {
  if (!text) throw new Error("empty layer string");
  return text.split("-").map(parseToken);
}

export function isConv(layer: LayerType): boolean {
  return layer.kind === "convolution" || layer.kind === "dilated_convolution";
}

export function isPool(layer: LayerType): boolean {
  return layer.kind === "max_pool" || layer.kind === "avg_pool";
}

/** Spatial size after the layer; convolutions and identity preserve it. */
export function outputSize(layer: LayerType, size: number): number {
  if (!isPool(layer)) return size;
  const pad = (layer.kernel - 1) >> 1;
  return Math.floor((size + 2 * pad - layer.kernel) / layer.stride) + 1;
}

export interface ShapeWalk {
  /** Layer sequence with demoted pools replaced by identity. */
  readonly effective: LayerType[];
  /** 1-based positions where a pool was demoted. */
  readonly substitutions: number[];
  /** (h, w) after each layer. */
  readonly shapes: Array<[number, number]>;
  /** Per layer: the pools applied so far along the primary path. */
  readonly poolingHistory: LayerType[][];
}

/** Walks the primary path, demoting infeasible pools to identity. */
export function walkShapes(layers: LayerType[], height: number, width: number): ShapeWalk {
  if (height < 1 || width < 1) throw new Error("input spatial dimensions must be >= 1");
  let h = height;
  let w = width;
  const effective: LayerType[] = [];
  const substitutions: number[] = [];
  const shapes: Array<[number, number]> = [];
  const poolingHistory: LayerType[][] = [];
  let poolsSoFar: LayerType[] = [];
  layers.forEach((layer, pos) => {
    if (isPool(layer)) {
      const nh = outputSize(layer, h);
      const nw = outputSize(layer, w);
      if (nh < 1 || nw < 1) {
        substitutions.push(pos + 1);
        effective.push(parseToken("id"));
      } else {
        h = nh;
        w = nw;
        poolsSoFar = poolsSoFar.concat([layer]);
        effective.push(layer);
      }
    } else {
      effective.push(layer);
    }
    shapes.push([h, w]);
    poolingHistory.push(poolsSoFar);
  });
  return { effective, substitutions, shapes, poolingHistory };
}

/** Pools a shortcut branch from s to e must replay before addition. */
export function replayFor(walk: ShapeWalk, s: number, e: number): LayerType[] {
  const before = walk.poolingHistory[s - 1]!;
  return walk.poolingHistory[e - 1]!.slice(before.length);
}
