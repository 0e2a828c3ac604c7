"""Evaluation of f-divergences on finite distributions.

    D_f(P, Q) = sum_{q_j > 0} q_j f(p_j / q_j) + f*(0) sum_{q_j = 0} p_j

with the conventions that an atom with ``p_j = q_j = 0`` contributes nothing,
``q_j f(0)`` is used when ``p_j = 0 < q_j`` and ``0 * inf = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .generators import Generator

__all__ = [
    "NORMALIZATION_TOL",
    "DiscreteDistribution",
    "DivergencePoint",
    "TrianglePoint",
    "divergence",
    "divergence_batch",
    "divergence_pair",
    "two_point_pair",
    "two_point_values",
    "block_mixture",
]

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite probability vector.  Zero atoms are kept."""

    masses: np.ndarray

    def __post_init__(self):
        arr = np.array(self.masses, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("distribution needs at least one atom")
        if np.isnan(arr).any():
            raise ValueError("distribution contains NaN")
        if (arr < 0).any():
            raise ValueError("distribution has negative mass")
        total = arr.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "masses", arr)

    def __len__(self) -> int:
        return self.masses.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.masses, other.masses)

    def __repr__(self) -> str:
        return f"DiscreteDistribution({self.masses.tolist()})"


DistLike = Union[DiscreteDistribution, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class DivergencePoint:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class TrianglePoint:
    """``(p, q)`` with ``0 <= p <= q <= 1``: ``P = (1-p, p)``, ``Q = (1-q, q)``."""

    p: float
    q: float

    def __post_init__(self):
        if not (0.0 <= self.p <= self.q <= 1.0):
            raise ValueError(f"({self.p}, {self.q}) is not in the triangle 0 <= p <= q <= 1")

    @classmethod
    def reflected(cls, p: float, q: float) -> "TrianglePoint":
        """Map any ``(p, q)`` into the triangle, swapping atoms when ``p > q``."""
        if p > q:
            return cls(1.0 - p, 1.0 - q)
        return cls(p, q)

    def distributions(self) -> tuple[DiscreteDistribution, DiscreteDistribution]:
        return (
            DiscreteDistribution([1.0 - self.p, self.p]),
            DiscreteDistribution([1.0 - self.q, self.q]),
        )


def _as_masses(d: DistLike) -> np.ndarray:
    if isinstance(d, DiscreteDistribution):
        return d.masses
    return DiscreteDistribution(d).masses


def _atom_terms(f: Generator, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-atom contributions, same shape as ``p``; may contain ``inf``."""
    pos_q = q > 0
    with np.errstate(all="ignore"):
        ratio = np.where(pos_q, p / np.where(pos_q, q, 1.0), 0.0)
        body = q * f.eval(ratio)
        # 0 * inf = 0 for atoms carrying no mass under P
        fstar = np.where(p > 0, p * f.conjugate_at_zero, 0.0)
        if math.isfinite(f.conjugate_at_zero):
            # p / q overflowed: q f(p/q) equals p f*(0) to double precision
            body = np.where(np.isinf(ratio), fstar, body)
    return np.where(pos_q, body, fstar)


def divergence_batch(f: Generator, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise ``D_f`` for arrays of shape ``(..., d)``; no validation."""
    terms = _atom_terms(f, np.asarray(P, dtype=float), np.asarray(Q, dtype=float))
    return terms.sum(axis=-1)


def divergence(f: Generator, P: DistLike, Q: DistLike) -> float:
    """``D_f(P, Q)`` as a float, ``inf`` when any atom contributes ``inf``."""
    p, q = _as_masses(P), _as_masses(Q)
    if p.size != q.size:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    return float(divergence_batch(f, p, q))


def divergence_pair(f: Generator, g: Generator, P: DistLike, Q: DistLike) -> DivergencePoint:
    p, q = _as_masses(P), _as_masses(Q)
    if p.size != q.size:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    return DivergencePoint(float(divergence_batch(f, p, q)), float(divergence_batch(g, p, q)))


def two_point_values(f: Generator, p, q, p_comp=None, q_comp=None) -> np.ndarray:
    """Vectorised ``D_f((1-p, p), (1-q, q))``.

    ``p_comp``/``q_comp`` optionally supply ``1-p``/``1-q`` exactly, for points
    closer to ``q = 1`` than double precision can resolve.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pc = 1.0 - p if p_comp is None else np.asarray(p_comp, dtype=float)
    qc = 1.0 - q if q_comp is None else np.asarray(q_comp, dtype=float)
    return _atom_terms(f, pc, qc) + _atom_terms(f, p, q)


def two_point_pair(f: Generator, g: Generator, t: TrianglePoint) -> DivergencePoint:
    return DivergencePoint(
        float(two_point_values(f, t.p, t.q)), float(two_point_values(g, t.p, t.q))
    )


def block_mixture(
    P0: DistLike, Q0: DistLike, P1: DistLike, Q1: DistLike, alpha: float
) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """Place ``(P0, Q0)`` and ``(P1, Q1)`` on disjoint atom blocks.

    The result satisfies ``D_f(P_a, Q_a) = (1-a) D_f(P0, Q0) + a D_f(P1, Q1)``
    for every generator.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    p0, q0, p1, q1 = (_as_masses(d) for d in (P0, Q0, P1, Q1))
    if p0.size != q0.size or p1.size != q1.size:
        raise ValueError("each block needs P and Q of equal length")
    P = np.concatenate([(1.0 - alpha) * p0, alpha * p1])
    Q = np.concatenate([(1.0 - alpha) * q0, alpha * q1])
    return DiscreteDistribution(P), DiscreteDistribution(Q)
