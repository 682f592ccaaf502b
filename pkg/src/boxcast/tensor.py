"""Probability vectors, dense joint tables, and classical divergence primitives.

All divergences are in bits (base-2 logarithms).  The convention
``0 * log(0/q) = 0`` is used throughout, and a support violation
(``p > 0`` where ``q = 0``) yields ``float('inf')`` rather than an
exception so that optimizers can treat it as a barrier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

#: Entries may drift from an exact simplex by at most this much and still pass as-is.
SIMPLEX_TOL = 1e-12
#: Drift below this is silently renormalized; anything larger is rejected.
RENORM_TOL = 1e-9


def _clean_weights(weights, what: str) -> np.ndarray:
    arr = np.array(weights, dtype=float)
    if arr.size == 0:
        raise ValidationError(f"{what} must be non-empty")
    if np.any(arr < 0.0):
        raise ValidationError(f"{what} has negative entries (min {arr.min():.3e})")
    total = float(arr.sum())
    drift = abs(total - 1.0)
    if drift > SIMPLEX_TOL:
        if drift >= RENORM_TOL:
            raise ValidationError(f"{what} has total mass {total!r}, too far from 1")
        arr = arr / total
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Finite probability distribution, immutable after construction."""

    weights: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if arr.ndim != 1:
            raise DimensionError(f"probability vector must be 1-d, got shape {arr.shape}")
        object.__setattr__(self, "weights", _clean_weights(arr, "probability vector"))

    def __len__(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense joint distribution over a rectangular index grid."""

    weights: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=float)
        if arr.ndim < 1:
            raise DimensionError("joint table needs at least one index")
        object.__setattr__(self, "weights", _clean_weights(arr, "joint table"))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    def flatten(self) -> ProbVector:
        return ProbVector(self.weights.ravel())


def _kl_terms(p: np.ndarray, q: np.ndarray) -> float:
    """Sum of p*log2(p/q) over the support of p; +inf on support violation."""
    sup = p > 0.0
    if np.any(q[sup] == 0.0):
        return float("inf")
    ps = p[sup]
    return float(np.sum(ps * np.log2(ps / q[sup])))


def kl_divergence(p: ProbVector, q: ProbVector) -> float:
    """Kullback-Leibler divergence of p from q, in bits."""
    if len(p) != len(q):
        raise DimensionError(f"length mismatch: {len(p)} vs {len(q)}")
    return _kl_terms(p.weights, q.weights)


def chain_rule_split(p: JointTable, q: JointTable) -> tuple[float, float]:
    """Split the divergence of two-factor joints into marginal and conditional parts.

    Returns ``(marginal_kl, conditional_kl_avg)`` where the first term is the
    divergence of the first-factor marginals and the second is the average,
    under p's marginal, of the divergences of the conditional distributions.
    Their sum equals the divergence of the flattened joints.  Conditionals at
    zero-probability rows of p carry no weight and are skipped.
    """
    if p.shape != q.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {q.shape}")
    if p.weights.ndim != 2:
        raise DimensionError("chain rule split expects exactly two factors")
    pa = p.weights.sum(axis=1)
    qa = q.weights.sum(axis=1)
    marginal = _kl_terms(pa, qa)
    conditional = 0.0
    for a in range(p.shape[0]):
        if pa[a] == 0.0:
            continue
        if qa[a] == 0.0:
            conditional = float("inf")
            break
        conditional += pa[a] * _kl_terms(p.weights[a] / pa[a], q.weights[a] / qa[a])
    return marginal, float(conditional)
