"""Candidate fitness measures and population ranking.

Candidates are ranked by the multi-class Matthews coefficient computed
from their validation confusion matrix; plain accuracy is tracked
alongside as metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STATUS_OK = "ok"
STATUS_FAILED = "failed"

# Candidate log CSV schema, one row per evaluated candidate.
CANDIDATE_LOG_COLUMNS = (
    "iteration",
    "candidate_id",
    "layers",
    "matthews",
    "accuracy",
    "parameter_count",
    "status",
    "wall_time",
)


@dataclass(frozen=True)
class EvaluationResult:
    """Outcome of evaluating one candidate network."""

    candidate_id: str
    accuracy: float
    matthews: float
    parameter_count: int
    status: str = STATUS_OK
    wall_time: float = 0.0
    error: str = ""

    def __post_init__(self):
        if self.status not in (STATUS_OK, STATUS_FAILED):
            raise ValueError(f"unknown status {self.status!r}")
        if not -1.0 <= self.matthews <= 1.0:
            raise ValueError("matthews must lie in [-1, 1]")


def failed_result(candidate_id: str, error: str = "", wall_time: float = 0.0) -> EvaluationResult:
    """A placeholder result for a candidate whose evaluation failed.

    Failed candidates score the minimum Matthews value of -1 so they sort
    last while keeping the population size constant.
    """
    return EvaluationResult(
        candidate_id,
        accuracy=0.0,
        matthews=-1.0,
        parameter_count=0,
        status=STATUS_FAILED,
        wall_time=wall_time,
        error=error,
    )


def accuracy(confmat) -> float:
    """Classification accuracy from a confusion matrix.

    Arguments
    ----------
    confmat: array-like
        Square matrix of non-negative counts, true classes along rows.

    Returns
    ----------
    trace / total, the fraction of correctly classified samples.
    """
    c = np.asarray(confmat, dtype=float)
    total = c.sum()
    if total <= 0:
        raise ValueError("confusion matrix has no counts")
    return float(np.trace(c) / total)


def matthews_multiclass(confmat) -> float:
    """Multi-class Matthews coefficient of a confusion matrix.

    Numerator and denominator are computed from the marginal sums:
    numerator = trace*total - sum_k row_k*col_k, denominator the product
    of sqrt(total^2 - sum_k row_k^2) and sqrt(total^2 - sum_k col_k^2).
    This equals the triple-sum form
    sum_klm (C_kk*C_lm - C_kl*C_mk) over the two square-root terms.

    Arguments
    ----------
    confmat: array-like
        Square matrix of non-negative integer counts, true classes along
        rows.

    Returns
    ----------
    A value in [-1, 1].  When the denominator vanishes (all mass in one
    predicted or one true class), returns the lowest possible value -1.
    """
    c = np.asarray(confmat)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("confusion matrix must be square")
    if c.min() < 0:
        raise ValueError("confusion matrix entries must be >= 0")
    if not np.all(np.equal(np.mod(c, 1), 0)):
        raise ValueError("confusion matrix must hold integer counts")
    # Exact integer arithmetic keeps the result inside [-1, 1]: by the
    # Cauchy-Schwarz inequality numerator^2 <= left*right, with equality
    # exactly when the coefficient is +-1.
    rows = [int(v) for v in c.sum(axis=1)]
    cols = [int(v) for v in c.sum(axis=0)]
    total = sum(rows)
    trace = sum(int(c[i, i]) for i in range(c.shape[0]))
    numerator = trace * total - sum(r * k for r, k in zip(rows, cols))
    left = total * total - sum(r * r for r in rows)
    right = total * total - sum(k * k for k in cols)
    if left == 0 or right == 0:
        return -1.0
    if numerator * numerator >= left * right:
        return 1.0 if numerator > 0 else -1.0
    value = numerator / (math.sqrt(left) * math.sqrt(right))
    # The true value is strictly inside (-1, 1) here; min/max only
    # squeezes out float rounding of the square roots.
    return min(1.0, max(-1.0, value))


def rank_candidates(results, k_s: int) -> list[str]:
    """Selects the identifiers of the top k_s candidates.

    Sort keys, in order: Matthews descending, accuracy descending,
    parameter count ascending, candidate id ascending.  The composite key
    makes the ranking a deterministic function of its input.
    """
    if k_s > len(results):
        raise ValueError(f"k_s={k_s} exceeds population size {len(results)}")
    ordered = sorted(
        results,
        key=lambda r: (-r.matthews, -r.accuracy, r.parameter_count, r.candidate_id),
    )
    return [r.candidate_id for r in ordered[:k_s]]


def candidate_log_row(iteration: int, layers: str, result: EvaluationResult) -> list[str]:
    """One candidate log CSV row; floats keep full precision via repr."""
    return [
        str(iteration),
        result.candidate_id,
        layers,
        repr(result.matthews),
        repr(result.accuracy),
        str(result.parameter_count),
        result.status,
        repr(result.wall_time),
    ]
