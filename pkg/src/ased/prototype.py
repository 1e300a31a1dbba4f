"""The prototype: a row-stochastic matrix of per-layer type distributions.

Row i holds the categorical distribution of layer i's type over the
library; the matrix as a whole stands for a family of networks.  All
operators here are pure: each returns a new Prototype and never mutates
its input, so instances can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_SUM_TOL = 1e-9
CONVERGENCE_TOL = 1e-12


@dataclass(frozen=True)
class CapConfig:
    """Probability caps [p_min, p_max] used by capping and inversion.

    The lower cap is tied to the upper one: p_min = (1 - p_max)/(|L| - 1),
    so that a row saturated at p_max with every other entry at p_min still
    sums to one.
    """

    p_max: float
    p_min: float

    def __post_init__(self):
        if not 0.0 < self.p_min <= self.p_max < 1.0:
            raise ValueError("caps must satisfy 0 < p_min <= p_max < 1")

    @classmethod
    def for_library(cls, p_max: float, library_size: int) -> "CapConfig":
        if library_size < 2:
            raise ValueError("library_size must be >= 2")
        if not 1.0 / library_size < p_max < 1.0:
            raise ValueError(f"p_max must lie in (1/{library_size}, 1)")
        return cls(p_max=p_max, p_min=(1.0 - p_max) / (library_size - 1))

    def check_against(self, library_size: int) -> None:
        expected = (1.0 - self.p_max) / (library_size - 1)
        if abs(self.p_min - expected) > 1e-12:
            raise ValueError(
                f"p_min={self.p_min} inconsistent with p_max={self.p_max} "
                f"for library size {library_size}"
            )


@dataclass(frozen=True)
class Prototype:
    probs: np.ndarray
    fresh_rows: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ValueError("prototype must be a 2-D matrix")
        n, l = probs.shape
        if n < 1 or l < 2:
            raise ValueError(f"invalid prototype dimensions {probs.shape}")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("prototype entries must lie in [0, 1]")
        if np.max(np.abs(probs.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("prototype rows must sum to 1")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "fresh_rows", frozenset(self.fresh_rows))

    @property
    def n_layers(self) -> int:
        return self.probs.shape[0]

    @property
    def library_size(self) -> int:
        return self.probs.shape[1]


def uniform(n_layers: int, library_size: int) -> Prototype:
    """A prototype with every entry at 1/|L|."""
    if n_layers < 1 or library_size < 2:
        raise ValueError("need n_layers >= 1 and library_size >= 2")
    return Prototype(np.full((n_layers, library_size), 1.0 / library_size))


def sample(p: Prototype, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draws k layer-type sequences from the prototype.

    Position i of each sequence is drawn from the categorical
    distribution of row i, independently across positions and samples.
    Output has shape (k, N) and is a deterministic function of the
    generator state.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cumulative = np.cumsum(p.probs, axis=1)
    # Guard against row sums a hair below 1 so the draw always lands in a bin.
    cumulative /= cumulative[:, -1][:, None]
    draws = rng.random((k, p.n_layers))
    out = np.empty((k, p.n_layers), dtype=np.intp)
    for i in range(p.n_layers):
        out[:, i] = np.searchsorted(cumulative[i], draws[:, i], side="right")
    return out


def update_from_selection(p: Prototype, selected) -> Prototype:
    """Recomputes every row as the empirical marginal of the selection.

    Entry (i, j) becomes the fraction of selected sequences whose i-th
    position is type j.  Rows previously marked fresh are recomputed like
    any other, so the fresh-row set is cleared.
    """
    sel = np.asarray(selected, dtype=np.intp)
    if sel.ndim != 2 or sel.shape[0] == 0:
        raise ValueError("selection must be a non-empty batch of sequences")
    if sel.shape[1] != p.n_layers:
        raise ValueError(
            f"sequences of length {sel.shape[1]} do not match prototype depth {p.n_layers}"
        )
    if sel.min() < 0 or sel.max() >= p.library_size:
        raise ValueError("layer index out of library range")
    counts = np.zeros((p.n_layers, p.library_size))
    for i in range(p.n_layers):
        counts[i] = np.bincount(sel[:, i], minlength=p.library_size)
    return Prototype(counts / sel.shape[0])


def grow(p: Prototype, n_new_rows: int) -> Prototype:
    """Appends uniformly distributed rows, recording them as fresh."""
    if n_new_rows < 0:
        raise ValueError("n_new_rows must be >= 0")
    if n_new_rows == 0:
        return p
    new = np.full((n_new_rows, p.library_size), 1.0 / p.library_size)
    fresh = p.fresh_rows | set(range(p.n_layers, p.n_layers + n_new_rows))
    return Prototype(np.vstack([p.probs, new]), fresh)


def _cap_row(row: np.ndarray, p_min: float, max_passes: int) -> np.ndarray:
    """Row-wise proportional normalization with a floor at p_min.

    First rescales the row to sum one, then repeatedly sets entries at or
    below p_min to exactly p_min while scaling the remainder by
    m = (sum_big + sum_small - n_small*p_min) / sum_big, until no entry
    falls below p_min - 1e-12.  Entries that drop into the floor during a
    pass migrate into the floored set of the next pass, so the loop ends
    within |L| passes.
    """
    row = row / row.sum()
    for _ in range(max_passes):
        if row.min() >= p_min - CONVERGENCE_TOL:
            break
        small = row <= p_min
        big_sum = row[~small].sum()
        m = (big_sum + row[small].sum() - small.sum() * p_min) / big_sum
        row = np.where(small, p_min, row * m)
    return row


def cap_normalize(p: Prototype, cap: CapConfig) -> Prototype:
    """Clamps every row away from the extreme values 0 and 1.

    After normalization each entry is at least p_min (up to 1e-12), so no
    layer choice ever becomes unreachable, and each row still sums to one.
    """
    cap.check_against(p.library_size)
    probs = np.array([_cap_row(row, cap.p_min, p.library_size + 1) for row in p.probs])
    return Prototype(probs, p.fresh_rows)


def _invert_row(row: np.ndarray, cap: CapConfig, library_size: int) -> np.ndarray:
    return _cap_row(1.0 - row, cap.p_min, library_size + 1)


def invert_full(p: Prototype, cap: CapConfig) -> Prototype:
    """Replaces each probability with its complement, then re-normalizes.

    Dominant choices become the least likely ones, steering sampling into
    the regions the search had discarded.  The capping normalization that
    follows keeps every entry strictly positive, so previously reachable
    structures stay reachable.
    """
    cap.check_against(p.library_size)
    probs = np.array([_invert_row(row, cap, p.library_size) for row in p.probs])
    return Prototype(probs, p.fresh_rows)


def invert_partial(p: Prototype, cap: CapConfig) -> Prototype:
    """Inverts only the floor(sqrt(N)) rows with the highest L2 norm.

    The norm measures how converged a row is, so this variant perturbs
    the most certain layer choices while leaving tentative ones alone.
    Ties on the norm are broken towards the lower row index.
    """
    cap.check_against(p.library_size)
    n_invert = int(np.sqrt(p.n_layers))
    norms = np.linalg.norm(p.probs, axis=1)
    chosen = np.argsort(-norms, kind="stable")[:n_invert]
    probs = p.probs.copy()
    for i in chosen:
        probs[i] = _invert_row(p.probs[i], cap, p.library_size)
    return Prototype(probs, p.fresh_rows)


def row_l2_norm(p: Prototype, row: int) -> float:
    """Euclidean norm of one row; spans [1/sqrt(|L|), 1].

    The lower bound is attained by the uniform distribution, the upper
    bound only by a fully converged (one-hot) row.
    """
    if not 0 <= row < p.n_layers:
        raise IndexError(f"row {row} out of range for {p.n_layers} rows")
    return float(np.linalg.norm(p.probs[row]))


def mean_l2_norm(p: Prototype, exclude_fresh: bool = True) -> float:
    """Mean row norm, optionally ignoring freshly appended uniform rows."""
    include = [i for i in range(p.n_layers) if not (exclude_fresh and i in p.fresh_rows)]
    if not include:
        raise ValueError("no rows left to average after excluding fresh rows")
    return float(np.mean(np.linalg.norm(p.probs[include], axis=1)))


def is_fully_converged(p: Prototype) -> bool:
    """True iff every entry is (numerically) exactly 0 or 1."""
    probs = p.probs
    return bool(np.all((probs <= CONVERGENCE_TOL) | (probs >= 1.0 - CONVERGENCE_TOL)))


def argmax_architecture(p: Prototype) -> tuple:
    """Most probable layer sequence; ties go to the lowest library index."""
    return tuple(int(i) for i in np.argmax(p.probs, axis=1))


def to_text(p: Prototype, library_tokens) -> str:
    """Serializes a prototype snapshot.

    Header line: ``N |L| token token ...``; then N lines of |L|
    probabilities written with full round-trip precision.
    """
    tokens = tuple(library_tokens)
    if len(tokens) != p.library_size:
        raise ValueError("token count does not match library size")
    lines = [f"{p.n_layers} {p.library_size} " + " ".join(tokens)]
    for row in p.probs:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> tuple[Prototype, tuple]:
    """Parses a snapshot produced by `to_text`.

    Returns the prototype and the library tokens from the header.  Raises
    ValueError on malformed input, including rows that fail the
    row-stochasticity check.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty prototype snapshot")
    head = lines[0].split()
    if len(head) < 2:
        raise ValueError("malformed snapshot header")
    try:
        n, l = int(head[0]), int(head[1])
    except ValueError as exc:
        raise ValueError("malformed snapshot header") from exc
    tokens = tuple(head[2:])
    if len(tokens) != l:
        raise ValueError(f"header announces {l} tokens but lists {len(tokens)}")
    if len(lines) - 1 != n:
        raise ValueError(f"expected {n} probability rows, found {len(lines) - 1}")
    try:
        probs = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise ValueError("malformed probability row") from exc
    if probs.shape != (n, l):
        raise ValueError("row width does not match header")
    return Prototype(probs), tokens


def save(p: Prototype, library_tokens, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_text(p, library_tokens))


def load(path) -> tuple[Prototype, tuple]:
    with open(path, "r", encoding="utf-8") as fh:
        return from_text(fh.read())
