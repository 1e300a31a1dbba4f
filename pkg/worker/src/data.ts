/**
 * Dataset loading and split management.
 *
 * Datasets live as JSON files under the dataset root, one per name
 * (e.g. digits.json for requests naming "digits"). Each file carries
 * integer or float pixel rows plus an optional scale divisor. The
 * validation split takes the first fifth of every class in file order:
 * deterministic, class balanced, and identical across worker processes,
 * so candidate rankings are comparable. Test data is only touched by
 * explicit final evaluation, never during search.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

const VALIDATION_FRACTION = 0.2;

interface RawSplit {
  images: number[][];
  labels: number[];
}

interface RawDataset {
  imageSize: number;
  channels: number;
  classes: number;
  scale?: number;
  train: RawSplit;
  test?: RawSplit;
}

export interface Dataset {
  readonly name: string;
  readonly imageSize: number;
  readonly channels: number;
  readonly classes: number;
  readonly batchSize: number;
  readonly fitX: tf.Tensor4D;
  readonly fitLabels: Int32Array;
  readonly fitOneHot: tf.Tensor2D;
  readonly valX: tf.Tensor4D;
  readonly valLabels: Int32Array;
  readonly testX: tf.Tensor4D | null;
  readonly testLabels: Int32Array | null;
}

const cache = new Map<string, Dataset>();

function toTensor(split: RawSplit, picks: number[], raw: RawDataset): tf.Tensor4D {
  const scale = raw.scale ?? 1;
  const pixels = raw.imageSize * raw.imageSize * raw.channels;
  const buf = new Float32Array(picks.length * pixels);
  picks.forEach((row, i) => {
    const image = split.images[row]!;
    if (image.length !== pixels) {
      throw new Error(`image ${row} has ${image.length} values, expected ${pixels}`);
    }
    for (let j = 0; j < pixels; j++) buf[i * pixels + j] = image[j]! / scale;
  });
  return tf.tensor4d(buf, [picks.length, raw.imageSize, raw.imageSize, raw.channels]);
}

function labelsOf(split: RawSplit, picks: number[]): Int32Array {
  const out = new Int32Array(picks.length);
  picks.forEach((row, i) => { out[i] = split.labels[row]!; });
  return out;
}

/** First fifth of each class, in file order, becomes validation. */
function splitValidation(labels: number[], classes: number): { fit: number[]; val: number[] } {
  const perClass: number[][] = [];
  for (let c = 0; c < classes; c++) perClass.push([]);
  labels.forEach((label, i) => {
    if (!(label >= 0 && label < classes)) throw new Error(`label ${label} out of range`);
    perClass[label]!.push(i);
  });
  const valSet = new Set<number>();
  for (const rows of perClass) {
    const take = Math.floor(rows.length * VALIDATION_FRACTION);
    for (let i = 0; i < take; i++) valSet.add(rows[i]!);
  }
  if (valSet.size === 0) throw new Error("validation split is empty; dataset too small");
  const fit: number[] = [];
  const val: number[] = [];
  labels.forEach((_, i) => (valSet.has(i) ? val : fit).push(i));
  return { fit, val };
}

export function loadDataset(root: string, name: string): Dataset {
  const key = `${root}::${name}`;
  const hit = cache.get(key);
  if (hit) return hit;
  const file = path.join(root, `${name}.json`);
  if (!fs.existsSync(file)) {
    throw new Error(`dataset ${JSON.stringify(name)} not found under ${root}`);
  }
  const raw = JSON.parse(fs.readFileSync(file, "utf-8")) as RawDataset;
  if (!raw.train || !Array.isArray(raw.train.images) || raw.train.images.length === 0) {
    throw new Error(`dataset ${name} has no training images`);
  }
  if (raw.train.images.length !== raw.train.labels.length) {
    throw new Error(`dataset ${name} train images and labels disagree`);
  }
  const { fit, val } = splitValidation(raw.train.labels, raw.classes);
  const hasTest = !!raw.test && raw.test.images.length > 0;
  const testPicks = hasTest ? raw.test!.images.map((_, i) => i) : [];
  const dataset: Dataset = {
    name,
    imageSize: raw.imageSize,
    channels: raw.channels,
    classes: raw.classes,
    batchSize: name === "cifar100" ? 128 : 64,
    fitX: toTensor(raw.train, fit, raw),
    fitLabels: labelsOf(raw.train, fit),
    fitOneHot: tf.oneHot(tf.tensor1d(labelsOf(raw.train, fit), "int32"), raw.classes) as tf.Tensor2D,
    valX: toTensor(raw.train, val, raw),
    valLabels: labelsOf(raw.train, val),
    testX: hasTest ? toTensor(raw.test!, testPicks, raw) : null,
    testLabels: hasTest ? labelsOf(raw.test!, testPicks) : null,
  };
  cache.set(key, dataset);
  return dataset;
}
