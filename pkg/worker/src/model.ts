/**
 * Candidate materialization: turns a layer sequence plus shortcut pairs
 * into a trainable convolutional network.
 *
 * Conventions shared with the search engine: constant channel count for
 * every convolution, zero padding preserving spatial dimensions, and a
 * head of global average pooling, a 100-unit hidden layer, dropout 0.5
 * and a softmax classifier. Activations are per-channel parametric ReLU
 * initialized at 0.25 with He-initialized kernels. Shortcut signals are
 * pooled through the replay list and added at the endpoint before its
 * activation; batch normalization, when enabled, precedes the addition.
 */

import * as tf from "@tensorflow/tfjs";
import {
  LayerType,
  ShapeWalk,
  isConv,
  parseLayers,
  replayFor,
  walkShapes,
} from "./layers.js";
import { SeedStream } from "./rng.js";

export const HIDDEN_UNITS = 100;

export interface MaterializeSpec {
  layers: string;
  shortcuts: Array<[number, number]>;
  channels: number;
  inputSize: [number, number];
  inputChannels: number;
  classes: number;
  batchNorm: boolean;
  seeds: SeedStream;
}

interface BatchNormState {
  gamma: tf.Variable;
  beta: tf.Variable;
  movingMean: tf.Variable;
  movingVariance: tf.Variable;
}

interface ConvUnit {
  kind: "conv";
  weight: tf.Variable;
  bias: tf.Variable;
  slopes: tf.Variable;
  dilation: number;
  norm: BatchNormState | null;
}

interface PoolUnit {
  kind: "pool";
  layer: LayerType;
}

interface IdentityUnit {
  kind: "identity";
}

type Unit = ConvUnit | PoolUnit | IdentityUnit;

const BN_MOMENTUM = 0.99;
const BN_EPSILON = 1e-3;

let instanceCounter = 0;

function heNormal(shape: number[], fanIn: number, seed: number): tf.Tensor {
  return tf.randomNormal(shape, 0, Math.sqrt(2 / fanIn), "float32", seed);
}

/** Dimension-preserving convolution with a hand-written gradient.
 *
 * The CPU backend's conv backprop kernels are naive loops, far slower
 * than its forward kernel, and reject dilation rates above 1.  Both
 * gradients of a stride-1 same-padded convolution with an odd effective
 * kernel are themselves expressible as forward convolutions: the input
 * gradient convolves dy with the spatially flipped, channel-transposed
 * kernel, and the filter gradient is a stride-d valid convolution of
 * the padded input against dy with batch and channel axes swapped.  So
 * every pass runs on the backend's fast path. */
function convSame(x: tf.Tensor4D, weight: tf.Tensor4D, dilation: number): tf.Tensor4D {
  const k = weight.shape[0]!;
  const run = tf.customGrad((a, b, save) => {
    const xs = a as tf.Tensor4D;
    const ws = b as tf.Tensor4D;
    (save as tf.GradSaveFunc)([xs, ws]);
    const value = tf.conv2d(xs, ws, 1, "same", "NHWC", [dilation, dilation]);
    const gradFunc = (dy: tf.Tensor, saved: tf.Tensor[]) => {
      const [xv, wv] = saved as [tf.Tensor4D, tf.Tensor4D];
      const flipped = tf.transpose(tf.reverse(wv, [0, 1]), [0, 1, 3, 2]) as tf.Tensor4D;
      const dx = tf.conv2d(dy as tf.Tensor4D, flipped, 1, "same", "NHWC", [dilation, dilation]);
      const pad = dilation * (k - 1);
      const beg = pad >> 1;
      const xp = tf.pad(xv, [[0, 0], [beg, pad - beg], [beg, pad - beg], [0, 0]]);
      const xt = tf.transpose(xp, [3, 1, 2, 0]) as tf.Tensor4D;
      const dyt = tf.transpose(dy, [1, 2, 0, 3]) as tf.Tensor4D;
      const dw = tf.transpose(tf.conv2d(xt, dyt, dilation, "valid"), [1, 2, 0, 3]);
      return [dx, dw];
    };
    return { value, gradFunc };
  });
  return run(x, weight) as tf.Tensor4D;
}

function poolForward(layer: LayerType, x: tf.Tensor4D): tf.Tensor4D {
  // m2 on "valid" padding halves rounding down; 3-wide pools pad to
  // produce ceil(n/2), matching the search engine's shape arithmetic.
  const padding = layer.kernel === 2 ? "valid" : "same";
  if (layer.kind === "max_pool") {
    return tf.maxPool(x, layer.kernel, layer.stride, padding);
  }
  return tf.avgPool(x, layer.kernel, layer.stride, padding);
}

function applyBatchNorm(x: tf.Tensor4D, state: BatchNormState, training: boolean): tf.Tensor4D {
  if (!training) {
    return tf.batchNorm(
      x, state.movingMean, state.movingVariance, state.beta, state.gamma, BN_EPSILON,
    ) as tf.Tensor4D;
  }
  const { mean, variance } = tf.moments(x, [0, 1, 2]);
  const keep = BN_MOMENTUM;
  state.movingMean.assign(state.movingMean.mul(keep).add(mean.mul(1 - keep)));
  state.movingVariance.assign(state.movingVariance.mul(keep).add(variance.mul(1 - keep)));
  return tf.batchNorm(x, mean, variance, state.beta, state.gamma, BN_EPSILON) as tf.Tensor4D;
}

export class Network {
  readonly trainable: tf.Variable[] = [];
  /** Variables subject to weight decay: kernels and biases, never
   * activation slopes or normalization parameters. */
  readonly decayable = new Set<tf.Variable>();
  /** Kernels subject to the max-norm constraint. */
  readonly kernels: tf.Variable[] = [];
  /** Search-mode trainable weight count (excludes normalization). */
  readonly paramCount: number;

  private readonly units: Unit[];
  private readonly walk: ShapeWalk;
  private readonly shortcuts: Array<[number, number]>;
  private readonly hiddenWeight: tf.Variable;
  private readonly hiddenBias: tf.Variable;
  private readonly hiddenSlopes: tf.Variable;
  private readonly outWeight: tf.Variable;
  private readonly outBias: tf.Variable;
  private readonly nonTrainable: tf.Variable[] = [];

  constructor(spec: MaterializeSpec) {
    const parsed = parseLayers(spec.layers);
    const n = parsed.length;
    for (const [s, e] of spec.shortcuts) {
      if (!(1 <= s && s < e && e <= n)) {
        throw new Error(`shortcut (${s}, ${e}) out of range for ${n} layers`);
      }
    }
    if (spec.channels < 1) throw new Error("channels must be >= 1");
    if (spec.classes < 2) throw new Error("classes must be >= 2");
    this.walk = walkShapes(parsed, spec.inputSize[0], spec.inputSize[1]);
    this.shortcuts = spec.shortcuts;
    const tag = `net${instanceCounter++}`;

    const track = (v: tf.Variable, decay: boolean, kernel: boolean): tf.Variable => {
      this.trainable.push(v);
      if (decay) this.decayable.add(v);
      if (kernel) this.kernels.push(v);
      return v;
    };

    this.units = [];
    let channels = spec.inputChannels;
    let params = 0;
    this.walk.effective.forEach((layer, i) => {
      if (isConv(layer)) {
        const k = layer.kernel;
        const fanIn = k * k * channels;
        const weight = track(tf.variable(
          heNormal([k, k, channels, spec.channels], fanIn, spec.seeds()),
          true, `${tag}/conv${i + 1}/weight`,
        ), true, true);
        const bias = track(tf.variable(
          tf.zeros([spec.channels]), true, `${tag}/conv${i + 1}/bias`,
        ), true, false);
        const slopes = track(tf.variable(
          tf.fill([spec.channels], 0.25), true, `${tag}/conv${i + 1}/slopes`,
        ), false, false);
        let norm: BatchNormState | null = null;
        if (spec.batchNorm) {
          norm = {
            gamma: track(tf.variable(tf.ones([spec.channels]), true, `${tag}/bn${i + 1}/gamma`), false, false),
            beta: track(tf.variable(tf.zeros([spec.channels]), true, `${tag}/bn${i + 1}/beta`), false, false),
            movingMean: tf.variable(tf.zeros([spec.channels]), false, `${tag}/bn${i + 1}/mean`),
            movingVariance: tf.variable(tf.ones([spec.channels]), false, `${tag}/bn${i + 1}/var`),
          };
          this.nonTrainable.push(norm.movingMean, norm.movingVariance);
        }
        this.units.push({ kind: "conv", weight, bias, slopes, dilation: layer.dilation, norm });
        params += k * k * channels * spec.channels + spec.channels + spec.channels;
        channels = spec.channels;
      } else if (layer.kind === "identity") {
        this.units.push({ kind: "identity" });
      } else {
        this.units.push({ kind: "pool", layer });
      }
    });

    this.hiddenWeight = track(tf.variable(
      heNormal([channels, HIDDEN_UNITS], channels, spec.seeds()), true, `${tag}/hidden/weight`,
    ), true, true);
    this.hiddenBias = track(tf.variable(tf.zeros([HIDDEN_UNITS]), true, `${tag}/hidden/bias`), true, false);
    this.hiddenSlopes = track(tf.variable(tf.fill([HIDDEN_UNITS], 0.25), true, `${tag}/hidden/slopes`), false, false);
    this.outWeight = track(tf.variable(
      heNormal([HIDDEN_UNITS, spec.classes], HIDDEN_UNITS, spec.seeds()), true, `${tag}/softmax/weight`,
    ), true, true);
    this.outBias = track(tf.variable(tf.zeros([spec.classes]), true, `${tag}/softmax/bias`), true, false);
    params += channels * HIDDEN_UNITS + HIDDEN_UNITS;
    params += HIDDEN_UNITS;
    params += HIDDEN_UNITS * spec.classes + spec.classes;
    this.paramCount = params;
  }

  /** Forward pass to logits; dropout only fires when training. */
  apply(x: tf.Tensor4D, training: boolean, seeds?: SeedStream): tf.Tensor2D {
    const outputs: tf.Tensor4D[] = [x];
    this.units.forEach((unit, i) => {
      const prev = outputs[i]!;
      let y: tf.Tensor4D;
      if (unit.kind === "conv") {
        const kernel = unit.weight as unknown as tf.Tensor4D;
        y = convSame(prev, kernel, unit.dilation).add(unit.bias) as tf.Tensor4D;
        if (unit.norm) y = applyBatchNorm(y, unit.norm, training);
      } else if (unit.kind === "pool") {
        y = poolForward(unit.layer, prev);
      } else {
        y = prev;
      }
      for (const [s, e] of this.shortcuts) {
        if (e !== i + 1) continue;
        let branch = outputs[s]!;
        for (const pool of replayFor(this.walk, s, e)) {
          branch = poolForward(pool, branch);
        }
        // Segments that start before the first convolution carry the raw
        // input channel count; zero-pad so the parameter-free add works.
        const missing = y.shape[3]! - branch.shape[3]!;
        if (missing > 0) {
          branch = tf.pad(branch, [[0, 0], [0, 0], [0, 0], [0, missing]]) as tf.Tensor4D;
        }
        y = y.add(branch);
      }
      if (unit.kind === "conv") {
        y = tf.prelu(y, unit.slopes as unknown as tf.Tensor4D) as tf.Tensor4D;
      }
      outputs.push(y);
    });

    const pooled = outputs[outputs.length - 1]!.mean([1, 2]) as tf.Tensor2D;
    let hidden = pooled.matMul(this.hiddenWeight as unknown as tf.Tensor2D).add(this.hiddenBias) as tf.Tensor2D;
    hidden = tf.prelu(hidden, this.hiddenSlopes as unknown as tf.Tensor2D) as tf.Tensor2D;
    if (training) {
      if (!seeds) throw new Error("training forward pass needs a seed stream");
      hidden = tf.dropout(hidden, 0.5, undefined, seeds()) as tf.Tensor2D;
    }
    return hidden.matMul(this.outWeight as unknown as tf.Tensor2D).add(this.outBias) as tf.Tensor2D;
  }

  dispose(): void {
    for (const v of this.trainable) v.dispose();
    for (const v of this.nonTrainable) v.dispose();
  }
}

export function materialize(spec: MaterializeSpec): Network {
  return new Network(spec);
}
