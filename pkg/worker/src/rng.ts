/**
 * Deterministic randomness for training runs.
 *
 * Every evaluation request owns a single splitmix32 stream keyed by the
 * request seed. All randomness in a run (weight init seeds, per-epoch
 * shuffles, dropout masks) is drawn from that stream in a fixed order, so
 * the same request always produces the same training trajectory.
 */

export type SeedStream = () => number;

/** Returns a generator of uint32 values. */
export function splitmix32(seed: number): SeedStream {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    z = z ^ (z >>> 15);
    return z >>> 0;
  };
}

function uniform01(next: SeedStream): number {
  return next() / 4294967296;
}

/** Fisher-Yates permutation of 0..n-1 driven by the stream. */
export function shuffledIndices(n: number, next: SeedStream): Int32Array {
  const order = new Int32Array(n);
  for (let i = 0; i < n; i++) order[i] = i;
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(uniform01(next) * (i + 1));
    const tmp = order[i]!;
    order[i] = order[j]!;
    order[j] = tmp;
  }
  return order;
}
