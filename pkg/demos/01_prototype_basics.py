"""Sampling architectures from a prototype and refitting it to a selection.

The prototype is a row-stochastic matrix: row i holds the categorical
distribution over layer types at depth i.  This script draws a batch of
candidate layer sequences, pretends the ones with the most convolutions
won, refits the matrix to those winners, and shows how the row norms
move away from the uniform floor.  It ends with a snapshot round-trip.
"""

import tempfile
from pathlib import Path

import numpy as np

from ased import default_library, mean_l2_norm, row_l2_norm, sample, uniform, update_from_selection
from ased import prototype as proto

library = default_library()
rng = np.random.default_rng(42)

p = uniform(n_layers=4, library_size=library.size)
print(f"library: {' '.join(library.tokens)}")
print(f"uniform 4-layer prototype, mean row norm {mean_l2_norm(p):.4f} "
      f"(floor is 1/sqrt({library.size}) = {1 / np.sqrt(library.size):.4f})")

draws = sample(p, k=12, rng=rng)
print("\n12 sampled candidates:")
for row in draws:
    print("  " + "-".join(library.tokens[j] for j in row))

conv_indices = [j for j, t in enumerate(library.entries) if t.kind.value.endswith("convolution")]
conv_count = np.isin(draws, conv_indices).sum(axis=1)
winners = draws[np.argsort(-conv_count)[:4]]
print("\nselected the 4 most convolution-heavy; refitting the prototype:")
p2 = update_from_selection(p, winners)
for i in range(p2.n_layers):
    top = np.argsort(-p2.probs[i])[:3]
    desc = ", ".join(f"{library.tokens[j]}={p2.probs[i, j]:.2f}" for j in top)
    print(f"  row {i + 1}: norm {row_l2_norm(p2, i):.4f}  top entries: {desc}")
print(f"mean row norm after refit: {mean_l2_norm(p2):.4f}")

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "snapshot.txt"
    proto.save(p2, library.tokens, path)
    restored, tokens = proto.load(path)
    assert np.allclose(restored.probs, p2.probs) and tokens == library.tokens
    print(f"\nsnapshot round-trip through {path.name} preserved all "
          f"{p2.n_layers}x{p2.library_size} entries")
