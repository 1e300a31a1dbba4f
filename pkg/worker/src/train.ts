/**
 * Training regimes and the SGD loop.
 *
 * Both regimes minimize cross entropy with momentum 0.9. Brief training
 * is the search-time estimator: 20 epochs, rate 1e-2 for the first ten
 * and 1e-3 after, no weight decay, no batch normalization. Full training
 * is reserved for final evaluation: 200 epochs with the staged rates
 * 0.01 / 0.02 / 0.004 / 0.001 (the second stage really is higher than
 * the first), weight decay 1e-4 on kernels and biases but never on
 * activation slopes, a 0.5 max-norm cap on kernels, and batch
 * normalization after every convolution.
 */

import * as tf from "@tensorflow/tfjs";
import { Dataset } from "./data.js";
import { accuracyOf, confusionMatrix, matthewsOf } from "./matthews.js";
import { Network, materialize } from "./model.js";
import { shuffledIndices, splitmix32 } from "./rng.js";

export interface Regime {
  readonly name: "brief" | "full";
  readonly epochs: number;
  readonly momentum: number;
  readonly weightDecay: number;
  readonly maxNorm: number | null;
  readonly batchNorm: boolean;
  lrAt(epoch: number): number;
}

export const BRIEF: Regime = {
  name: "brief",
  epochs: 20,
  momentum: 0.9,
  weightDecay: 0,
  maxNorm: null,
  batchNorm: false,
  lrAt: (epoch) => (epoch <= 10 ? 1e-2 : 1e-3),
};

export const FULL: Regime = {
  name: "full",
  epochs: 200,
  momentum: 0.9,
  weightDecay: 1e-4,
  maxNorm: 0.5,
  batchNorm: true,
  lrAt: (epoch) => {
    if (epoch <= 60) return 0.01;
    if (epoch <= 120) return 0.02;
    if (epoch <= 160) return 0.004;
    return 0.001;
  },
};

export function regimeFor(name: string): Regime {
  if (name === "brief") return BRIEF;
  if (name === "full") return FULL;
  throw new Error(`unknown training regime ${JSON.stringify(name)}`);
}

export interface EvalJob {
  layers: string;
  shortcuts: Array<[number, number]>;
  channels: number;
  seed: number;
}

export interface ScoreReport {
  accuracy: number;
  matthews: number;
  params: number;
}

/** Clamps each output unit's incoming weight vector to the norm cap. */
function clampMaxNorm(kernel: tf.Variable, cap: number): void {
  const axes = kernel.shape.length === 4 ? [0, 1, 2] : [0];
  tf.tidy(() => {
    const norms = kernel.square().sum(axes, true).sqrt();
    const scale = tf.scalar(cap).div(tf.maximum(norms, cap));
    kernel.assign(kernel.mul(scale));
  });
}

function scoreSplit(net: Network, x: tf.Tensor4D, labels: Int32Array, classes: number): ScoreReport {
  const predictions = new Int32Array(labels.length);
  const chunk = 512;
  for (let start = 0; start < labels.length; start += chunk) {
    const size = Math.min(chunk, labels.length - start);
    tf.tidy(() => {
      const slice = x.slice([start, 0, 0, 0], [size, -1, -1, -1]) as tf.Tensor4D;
      const picked = net.apply(slice, false).argMax(1).dataSync();
      predictions.set(picked as Int32Array, start);
    });
  }
  const cm = confusionMatrix(labels, predictions, classes);
  return { accuracy: accuracyOf(cm), matthews: matthewsOf(cm), params: net.paramCount };
}

/** Trains one candidate and scores it on the requested split. */
export function trainAndScore(
  job: EvalJob,
  data: Dataset,
  regime: Regime,
  split: "validation" | "test" = "validation",
): ScoreReport {
  if (split === "test" && (!data.testX || !data.testLabels)) {
    throw new Error(`dataset ${data.name} carries no test split`);
  }
  const seeds = splitmix32(job.seed);
  const net = materialize({
    layers: job.layers,
    shortcuts: job.shortcuts,
    channels: job.channels,
    inputSize: [data.imageSize, data.imageSize],
    inputChannels: data.channels,
    classes: data.classes,
    batchNorm: regime.batchNorm,
    seeds,
  });
  const velocities: tf.Tensor[] = net.trainable.map((v) => tf.zeros(v.shape));
  const n = data.fitLabels.length;
  const batch = data.batchSize;

  try {
    for (let epoch = 1; epoch <= regime.epochs; epoch++) {
      const lr = regime.lrAt(epoch);
      const order = shuffledIndices(n, seeds);
      for (let start = 0; start < n; start += batch) {
        const picks = order.slice(start, Math.min(start + batch, n));
        const loss = tf.tidy(() => {
          const idx = tf.tensor1d(picks, "int32");
          const xb = tf.gather(data.fitX, idx) as tf.Tensor4D;
          const yb = tf.gather(data.fitOneHot, idx) as tf.Tensor2D;
          const { value, grads } = tf.variableGrads(() => {
            const logits = net.apply(xb, true, seeds);
            return tf.losses.softmaxCrossEntropy(yb, logits) as tf.Scalar;
          }, net.trainable);
          net.trainable.forEach((v, i) => {
            let g = grads[v.name];
            if (!g) return;
            if (regime.weightDecay > 0 && net.decayable.has(v)) {
              g = g.add(v.mul(regime.weightDecay));
            }
            const vel = velocities[i]!.mul(regime.momentum).add(g);
            v.assign(v.sub(vel.mul(lr)));
            tf.keep(vel);
            tf.dispose(velocities[i]!);
            velocities[i] = vel;
          });
          return value.dataSync()[0]!;
        });
        if (!Number.isFinite(loss)) {
          throw new Error(`numeric divergence at epoch ${epoch}: loss ${loss}`);
        }
        if (regime.maxNorm !== null) {
          for (const kernel of net.kernels) clampMaxNorm(kernel, regime.maxNorm);
        }
      }
    }
    if (split === "test") {
      return scoreSplit(net, data.testX!, data.testLabels!, data.classes);
    }
    return scoreSplit(net, data.valX, data.valLabels, data.classes);
  } finally {
    for (const vel of velocities) tf.dispose(vel);
    net.dispose();
  }
}
