"""Materializes sampled layer sequences into validated candidate networks.

Covers the structural side of a candidate: shortcut generation from fixed
patterns, spatial shape tracking through pooling, replay bookkeeping that
keeps shortcut branches addition-compatible with the primary path, and
trainable parameter counting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .layer_library import LayerKind, LayerLibrary

# Classification head attached after the sampled layers: global average
# pooling, one hidden fully connected layer, dropout, softmax.
HIDDEN_UNITS = 100

PATTERN_KINDS = ("none", "residual", "semi_dense")
POLICY_POOL_AS_IDENTITY = "pool_as_identity"
POLICY_REJECT = "reject"


class InfeasibleArchitecture(ValueError):
    """A pooling layer would shrink a spatial dimension below 1."""


@dataclass(frozen=True)
class ShortcutPattern:
    """Fixed shortcut-generating rule, parameterized by the span d >= 1."""

    kind: str = "none"
    d: int = 1

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"unknown shortcut pattern {self.kind!r}")
        if self.d < 1:
            raise ValueError("pattern parameter d must be >= 1")


@dataclass(frozen=True)
class CandidateArchitecture:
    """A sampled layer-type sequence plus its generated shortcut edges.

    Shortcut endpoints are 1-based over layer outputs; the raw network
    input is never a shortcut start.
    """

    layers: tuple
    shortcuts: tuple = ()
    channels: int = 32
    input_shape: tuple = (32, 32, 3)

    def __post_init__(self):
        layers = tuple(int(i) for i in self.layers)
        if not layers:
            raise ValueError("candidate needs at least one layer")
        shortcuts = tuple(sorted({(int(s), int(e)) for s, e in self.shortcuts}))
        for s, e in shortcuts:
            if not 1 <= s < e <= len(layers):
                raise ValueError(f"shortcut ({s}, {e}) out of range for {len(layers)} layers")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "shortcuts", shortcuts)
        object.__setattr__(self, "input_shape", tuple(self.input_shape))


@dataclass(frozen=True)
class ShapeTrace:
    """Per-layer spatial shapes and the pooling bookkeeping for shortcuts."""

    input_size: tuple
    shapes: tuple                 # (h, w) after each layer
    pooling_history: tuple        # per layer: library indices of pools applied so far
    substitutions: tuple = ()     # 1-based positions of pools demoted to identity
    shortcuts: tuple = ()

    def replay_for(self, shortcut) -> tuple:
        """Pooling ops the shortcut signal must replay before the endpoint.

        These are the poolings the primary path undergoes after the
        shortcut's start output and up to its end output, in order.
        """
        s, e = shortcut
        before = self.pooling_history[s - 1]
        return self.pooling_history[e - 1][len(before):]


def effective_depth(layers, library: LayerLibrary) -> int:
    """Number of non-identity layers in the sequence."""
    return sum(1 for i in layers if library.entries[i].kind is not LayerKind.IDENTITY)


def generate_residual(n: int, d: int) -> list:
    """Chained residual shortcuts (1, 1+d), (1+d, 1+2d), ... with end <= n.

    Consecutive shortcuts share endpoints but never nest: no start lies
    strictly inside another shortcut's span.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    out = []
    start = 1
    while start + d <= n:
        out.append((start, start + d))
        start += d
    return out


def generate_semi_dense(n: int, d: int) -> list:
    """Semi-dense shortcuts: tiles of d layers all feeding the next output.

    Tiles start at 1, d+2, 2(d+1)+1, ...; every layer of a tile connects
    to the output of the layer right after the tile.  A trailing tile
    whose endpoint would exceed n is dropped.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    out = []
    start = 1
    while start + d <= n:
        end = start + d
        out.extend((i, end) for i in range(start, start + d))
        start += d + 1
    return out


def apply_pattern(layers, pattern: ShortcutPattern, channels: int = 32,
                  input_shape=(32, 32, 3)) -> CandidateArchitecture:
    """Attaches the pattern's generated shortcut list to a layer sequence."""
    layers = tuple(int(i) for i in layers)
    if pattern.kind == "none":
        shortcuts = []
    elif pattern.kind == "residual":
        shortcuts = generate_residual(len(layers), pattern.d)
    else:
        shortcuts = generate_semi_dense(len(layers), pattern.d)
    return CandidateArchitecture(layers, tuple(shortcuts), channels, tuple(input_shape))


def trace_shapes(arch: CandidateArchitecture, library: LayerLibrary,
                 policy: str = POLICY_POOL_AS_IDENTITY) -> ShapeTrace:
    """Tracks spatial dimensions layer by layer.

    Convolutions preserve dimensions (zero padding); pooling downsamples
    per the library geometry.  A pooling whose output would have a
    dimension < 1 is either demoted to identity (`pool_as_identity`,
    recorded in `substitutions`) or rejected (`reject`).  The returned
    trace records, per layer, every pooling applied so far, from which the
    replay list of any shortcut is derived.
    """
    if policy not in (POLICY_POOL_AS_IDENTITY, POLICY_REJECT):
        raise ValueError(f"unknown infeasibility policy {policy!r}")
    h, w = int(arch.input_shape[0]), int(arch.input_shape[1])
    if h < 1 or w < 1:
        raise ValueError("input spatial dimensions must be >= 1")
    shapes = []
    history = []
    substitutions = []
    pools_so_far = ()
    for pos, idx in enumerate(arch.layers):
        entry = library.entries[idx]
        if entry.is_downsampling:
            nh, nw = entry.output_size(h), entry.output_size(w)
            if nh < 1 or nw < 1:
                if policy == POLICY_REJECT:
                    raise InfeasibleArchitecture(
                        f"layer {pos + 1} ({entry.shorthand}) on {h}x{w} input"
                    )
                substitutions.append(pos + 1)
            else:
                h, w = nh, nw
                pools_so_far = pools_so_far + (idx,)
        shapes.append((h, w))
        history.append(pools_so_far)
    return ShapeTrace(
        input_size=(int(arch.input_shape[0]), int(arch.input_shape[1])),
        shapes=tuple(shapes),
        pooling_history=tuple(history),
        substitutions=tuple(substitutions),
        shortcuts=arch.shortcuts,
    )


def parameter_count(arch: CandidateArchitecture, library: LayerLibrary,
                    num_classes: int) -> int:
    """Trainable weight count of the materialized network.

    Convolutions contribute k*k*C_in*C_out kernel weights, C_out biases
    and C_out per-channel activation slopes; identity and pooling layers
    contribute nothing.  The head adds a C_last -> HIDDEN_UNITS fully
    connected layer with per-unit activation slopes and the softmax
    classifier.
    """
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    channels = int(arch.input_shape[2])
    out_channels = arch.channels
    total = 0
    for idx in arch.layers:
        entry = library.entries[idx]
        if entry.kind in (LayerKind.CONVOLUTION, LayerKind.DILATED_CONVOLUTION):
            total += entry.kernel * entry.kernel * channels * out_channels
            total += out_channels          # biases
            total += out_channels          # activation slopes
            channels = out_channels
    total += channels * HIDDEN_UNITS + HIDDEN_UNITS   # hidden layer
    total += HIDDEN_UNITS                             # hidden activation slopes
    total += HIDDEN_UNITS * num_classes + num_classes  # softmax classifier
    return total


def format_layers(layers, library: LayerLibrary) -> str:
    """Hyphen-joined shorthand notation, e.g. ``c3-m2-c5``."""
    return "-".join(library.entries[i].shorthand for i in layers)


def parse_layers(text: str, library: LayerLibrary) -> tuple:
    """Inverse of `format_layers`."""
    tokens = text.split("-") if text else []
    if not tokens:
        raise ValueError("empty layer string")
    return tuple(library.index_of(t) for t in tokens)


def shortcuts_to_json(shortcuts) -> str:
    return json.dumps([[int(s), int(e)] for s, e in shortcuts])


def shortcuts_from_json(text: str) -> tuple:
    data = json.loads(text)
    return tuple((int(s), int(e)) for s, e in data)


def save_architecture(arch: CandidateArchitecture, library: LayerLibrary, path) -> None:
    """Writes an architecture file: shorthand layers plus shortcut pairs."""
    payload = {
        "layers": format_layers(arch.layers, library),
        "shortcuts": [[s, e] for s, e in arch.shortcuts],
        "channels": arch.channels,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_architecture(path, library: LayerLibrary, input_shape=(32, 32, 3)) -> CandidateArchitecture:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return CandidateArchitecture(
        parse_layers(payload["layers"], library),
        tuple((int(s), int(e)) for s, e in payload.get("shortcuts", [])),
        int(payload.get("channels", 32)),
        tuple(input_shape),
    )
