"""Generates the shared parameter-count corpus.

Fifty candidates spanning depths, kernel mixes, channel counts, input
shapes and shortcut patterns, each annotated with the search engine's
parameter count. The worker's tests materialize every entry and must
reproduce the counts exactly; a mismatch means the two sides disagree
about what a candidate is.

Usage:
    python3 scripts/make_param_corpus.py --out test/fixtures/param_corpus.json
"""

import argparse
import json
from pathlib import Path

import numpy as np

from ased.architecture import (
    CandidateArchitecture,
    ShortcutPattern,
    apply_pattern,
    format_layers,
    parameter_count,
    trace_shapes,
)
from ased.layer_library import default_library

CORPUS_SIZE = 50


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=90210)
    args = parser.parse_args()

    library = default_library()
    rng = np.random.default_rng(args.seed)
    entries = []
    patterns = [ShortcutPattern("none"), ShortcutPattern("residual", 2),
                ShortcutPattern("residual", 3), ShortcutPattern("semi_dense", 2),
                ShortcutPattern("semi_dense", 3)]
    while len(entries) < CORPUS_SIZE:
        depth = int(rng.integers(1, 17))
        layers = tuple(int(i) for i in rng.integers(0, library.size, size=depth))
        channels = int(rng.choice([8, 16, 32]))
        size = int(rng.choice([8, 16, 32]))
        in_channels = int(rng.choice([1, 3]))
        classes = int(rng.choice([10, 100]))
        pattern = patterns[int(rng.integers(0, len(patterns)))]
        arch = apply_pattern(layers, pattern, channels, (size, size, in_channels))
        trace = trace_shapes(arch, library)
        entries.append({
            "layers": format_layers(arch.layers, library),
            "shortcuts": [[s, e] for s, e in arch.shortcuts],
            "channels": channels,
            "imageSize": size,
            "inputChannels": in_channels,
            "classes": classes,
            "demoted": list(trace.substitutions),
            "params": parameter_count(arch, library, classes),
        })

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"seed": args.seed, "entries": entries}, indent=1) + "\n")
    demoted = sum(1 for e in entries if e["demoted"])
    print(f"wrote {out}: {len(entries)} entries, {demoted} with demoted pools")


if __name__ == "__main__":
    main()
