"""Pure scoring kernels: cosine similarity, sparsity measures of embedding
differences, and the combined retrieval score.

All kernels accumulate in double precision regardless of the caller's dtype,
and every function here is pure, so concurrent use needs no locking.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroVector

# Below this L2 norm a difference (or a vector, for cosine) is treated as zero.
DEGENERATE_NORM = 1e-12


class SparsityKind(enum.Enum):
    """Which sparsity measure scores the difference of sparse-space embeddings."""

    HOYER = "hoyer"
    L2_OVER_L1 = "l2_over_l1"
    KAPPA4 = "kappa4"


@dataclass(frozen=True)
class ScoreWeights:
    """Weight and kind of the sparsity term in the combined score.

    alpha is any non-negative scalar; the tuner produces values in [0, 10].
    """

    alpha: float = 1.0
    kind: SparsityKind = SparsityKind.HOYER

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha) or self.alpha < 0.0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")


def _as_f64(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    va = _as_f64(a, "a")
    vb = _as_f64(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatch(f"dims differ: {va.shape[0]} vs {vb.shape[0]}")
    return va, vb


def cosine(a, b) -> float:
    """Cosine similarity of two embeddings, clamped to [-1, 1].

    Raises ZeroVector if either argument has L2 norm below 1e-12.
    """
    va, vb = _pair(a, b)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        raise ZeroVector("cosine undefined for a (near-)zero vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def hoyer(a, b) -> float:
    """Hoyer sparsity of the difference a - b, in [0, 1].

    (sqrt(d) - |delta|_1 / |delta|_2) / (sqrt(d) - 1). Returns 1 for a 1-sparse
    difference, 0 for a constant-magnitude one, and 0 by convention when the
    difference is degenerate (identical embeddings carry no contradiction
    signal).
    """
    va, vb = _pair(a, b)
    d = va.shape[0]
    if d < 2:
        raise DimensionMismatch("hoyer needs dimension >= 2")
    delta = va - vb
    # Norms via explicit square/sum so the row-vectorized variant in
    # sparsity_rows reproduces these values bit for bit.
    l2 = float(np.sqrt((delta * delta).sum()))
    if l2 < DEGENERATE_NORM:
        return 0.0
    l1 = float(np.abs(delta).sum())
    rt = math.sqrt(d)
    return float(np.clip((rt - l1 / l2) / (rt - 1.0), 0.0, 1.0))


def l2_over_l1(a, b) -> float:
    """Ratio |delta|_2 / |delta|_1 of the difference, in [1/sqrt(d), 1].

    Returns 0 for a degenerate difference, matching the hoyer convention.
    """
    va, vb = _pair(a, b)
    delta = va - vb
    l2 = float(np.sqrt((delta * delta).sum()))
    if l2 < DEGENERATE_NORM:
        return 0.0
    return float(l2 / np.abs(delta).sum())


def kappa4(a, b, printed_exponent: bool = False) -> float:
    """Fourth-moment sparsity |delta|_4^4 / |delta|_2^4 of the difference.

    In [1/d, 1] for a nonzero difference; 1 iff the difference is 1-sparse;
    invariant under scaling the difference. ``printed_exponent=True`` selects
    the |delta|_4^4 / |delta|_2^2 variant, which is not scale invariant and
    exists only for comparison.
    """
    va, vb = _pair(a, b)
    delta = va - vb
    sq = delta * delta
    l2sq = float(sq.sum())
    if math.sqrt(l2sq) < DEGENERATE_NORM:
        return 0.0
    l4_4 = float((sq * sq).sum())
    denom = l2sq if printed_exponent else l2sq * l2sq
    return float(l4_4 / denom)


_SPARSITY_FUNCS = {
    SparsityKind.HOYER: hoyer,
    SparsityKind.L2_OVER_L1: l2_over_l1,
    SparsityKind.KAPPA4: kappa4,
}


def sparsity(a, b, kind: SparsityKind = SparsityKind.HOYER) -> float:
    """Dispatch to the sparsity measure selected by ``kind``."""
    return _SPARSITY_FUNCS[kind](a, b)


def sparsity_rows(
    q, mat: np.ndarray, kind: SparsityKind = SparsityKind.HOYER
) -> np.ndarray:
    """sparsity(q, row, kind) for every row of a matrix, vectorized.

    Produces bitwise the same values as the per-row scalar calls (both paths
    share one arithmetic order), so reranking a block and scoring pairs one
    at a time can never disagree.
    """
    vq = _as_f64(q, "q")
    m = np.asarray(mat, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch("mat must be a 2-d row matrix")
    d = vq.shape[0]
    if m.shape[1] != d:
        raise DimensionMismatch(f"dims differ: {d} vs {m.shape[1]}")
    if d < 2:
        raise DimensionMismatch("sparsity needs dimension >= 2")
    delta = vq[None, :] - m
    sq = delta * delta
    l2sq = sq.sum(axis=1)
    l2 = np.sqrt(l2sq)
    ok = l2 >= DEGENERATE_NORM
    out = np.zeros(m.shape[0])
    if kind is SparsityKind.HOYER:
        l1 = np.abs(delta).sum(axis=1)
        rt = math.sqrt(d)
        out[ok] = np.clip((rt - l1[ok] / l2[ok]) / (rt - 1.0), 0.0, 1.0)
    elif kind is SparsityKind.L2_OVER_L1:
        l1 = np.abs(delta).sum(axis=1)
        out[ok] = l2[ok] / l1[ok]
    elif kind is SparsityKind.KAPPA4:
        l4_4 = (sq * sq).sum(axis=1)
        out[ok] = l4_4[ok] / (l2sq[ok] * l2sq[ok])
    else:
        raise KeyError(kind)
    return out


def combined_score(cos_a, cos_b, sp_a, sp_b, w: ScoreWeights) -> float:
    """Retrieval score cosine(cos_a, cos_b) + alpha * sparsity(sp_a, sp_b).

    The cosine-space and sparse-space embeddings may have different
    dimensions; each pair must agree internally. With alpha == 0 the sparsity
    term is skipped and the result equals the cosine exactly.
    """
    c = cosine(cos_a, cos_b)
    if w.alpha == 0.0:
        return c
    return c + w.alpha * sparsity(sp_a, sp_b, w.kind)
