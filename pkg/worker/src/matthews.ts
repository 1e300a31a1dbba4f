/**
 * Multi-class Matthews correlation from a confusion matrix.
 *
 * Same algorithm as the search engine's ranking metric: exact integer
 * marginals keep the result inside [-1, 1] (counts here are far below
 * 2^53, so JavaScript numbers stay exact), with degenerate marginals
 * mapping to -1 and Cauchy-Schwarz equality short-circuiting to +-1.
 */

export function confusionMatrix(
  labels: ArrayLike<number>,
  predictions: ArrayLike<number>,
  classes: number,
): number[][] {
  if (labels.length !== predictions.length) {
    throw new Error("labels and predictions must have equal length");
  }
  const cm: number[][] = [];
  for (let i = 0; i < classes; i++) cm.push(new Array<number>(classes).fill(0));
  for (let i = 0; i < labels.length; i++) {
    cm[labels[i]!]![predictions[i]!]! += 1;
  }
  return cm;
}

export function accuracyOf(cm: number[][]): number {
  let trace = 0;
  let total = 0;
  for (let i = 0; i < cm.length; i++) {
    for (let j = 0; j < cm.length; j++) total += cm[i]![j]!;
    trace += cm[i]![i]!;
  }
  if (total === 0) throw new Error("confusion matrix holds no observations");
  return trace / total;
}

export function matthewsOf(cm: number[][]): number {
  const n = cm.length;
  const rows = new Array<number>(n).fill(0);
  const cols = new Array<number>(n).fill(0);
  let trace = 0;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      rows[i]! += cm[i]![j]!;
      cols[j]! += cm[i]![j]!;
    }
    trace += cm[i]![i]!;
  }
  const total = rows.reduce((a, b) => a + b, 0);
  let dot = 0;
  let rr = 0;
  let cc = 0;
  for (let i = 0; i < n; i++) {
    dot += rows[i]! * cols[i]!;
    rr += rows[i]! * rows[i]!;
    cc += cols[i]! * cols[i]!;
  }
  const numerator = trace * total - dot;
  const left = total * total - rr;
  const right = total * total - cc;
  if (left === 0 || right === 0) return -1.0;
  if (numerator * numerator >= left * right) return numerator > 0 ? 1.0 : -1.0;
  const value = numerator / (Math.sqrt(left) * Math.sqrt(right));
  return Math.min(1.0, Math.max(-1.0, value));
}
