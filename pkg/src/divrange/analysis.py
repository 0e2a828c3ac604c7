"""Differential and asymptotic analysis of the two-point map.

Covers the Jacobian of ``(p, q) -> (D_f, D_g)`` on the triangle and its
singular locus, limit ratios ``g(t) / f(t)`` at ``0`` and ``inf`` with the
recession behaviour they imply, linear-bound existence, explicit 4-atom
achieving pairs, and Monte Carlo membership checks.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage, optimize
from scipy.spatial import cKDTree

from .divergence import (
    DiscreteDistribution,
    DivergencePoint,
    TrianglePoint,
    block_mixture,
    divergence_batch,
    divergence_pair,
    two_point_values,
)
from .generators import Generator
from .jointrange import ConvexRegion, Membership, classify, joint_range

__all__ = [
    "LimitRatios",
    "MixturePair",
    "SingularLocus",
    "MembershipReport",
    "AchieveError",
    "jacobian_det",
    "jacobian_det_grid",
    "singular_locus",
    "limit_ratios",
    "ratio_bound_exists",
    "unboundedness_witness",
    "achieve",
    "verify_membership",
    "thread_count",
]

DIVERGED = 1e12
TAIL = 10
FD_STEP = 1e-6


def thread_count() -> int:
    """Worker cap from ``DIVRANGE_THREADS`` (``0`` or unset means one per CPU)."""
    raw = os.environ.get("DIVRANGE_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"DIVRANGE_THREADS must be >= 0, got {raw!r}")
    return n or (os.cpu_count() or 1)


# --------------------------------------------------------------------------
# Jacobian and singular locus


def _closed_partials(f: Generator, p, q):
    r = p / q
    u = (1.0 - p) / (1.0 - q)
    fr, fu = f.fn(r), f.fn(u)
    dr, du = f.deriv1(r), f.deriv1(u)
    d_dp = dr - du
    d_dq = fr - r * dr - fu + u * du
    return d_dp, d_dq


def _fd_partials(f: Generator, p, q, h):
    d_dp = (two_point_values(f, p + h, q) - two_point_values(f, p - h, q)) / (2 * h)
    d_dq = (two_point_values(f, p, q + h) - two_point_values(f, p, q - h)) / (2 * h)
    return d_dp, d_dq


def _partials(f, g, p, q, h, method):
    closed = f.deriv1 is not None and g.deriv1 is not None
    if method == "closed" and not closed:
        raise ValueError("closed-form derivatives unavailable for this pair")
    with np.errstate(all="ignore"):
        if method == "fd" or (method == "auto" and not closed):
            step = np.minimum(h * np.maximum(1.0, np.maximum(p, q)),
                              0.5 * np.minimum(np.minimum(p, q - p), 1.0 - q))
            fp, fq = _fd_partials(f, p, q, step)
            gp, gq = _fd_partials(g, p, q, step)
        else:
            fp, fq = _closed_partials(f, p, q)
            gp, gq = _closed_partials(g, p, q)
    return fp, fq, gp, gq


def jacobian_det_grid(f, g, p, q, h: float = FD_STEP, method: str = "auto"):
    """Vectorised determinant and a rounding-noise scale for its sign."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    fp, fq, gp, gq = _partials(f, g, p, q, h, method)
    a, b = fp * gq, gp * fq
    return a - b, np.abs(a) + np.abs(b)


def jacobian_det(f: Generator, g: Generator, t: TrianglePoint, h: float = FD_STEP,
                 method: str = "auto") -> float:
    """``dD_f/dp * dD_g/dq - dD_g/dp * dD_f/dq`` at an interior triangle point.

    Closed-form generator derivatives are used when both generators supply
    them (``method="auto"``); otherwise central differences with step
    ``h`` shrunk to half the distance to the triangle's boundary.
    """
    if not (0.0 < t.p < t.q < 1.0):
        raise ValueError(f"{t} is not interior to the triangle")
    if not h > 0:
        raise ValueError("step must be positive")
    det, _ = jacobian_det_grid(f, g, t.p, t.q, h, method)
    det = float(det)
    if not math.isfinite(det):
        raise FloatingPointError(f"non-finite divergence near {t}")
    return det


@dataclass(frozen=True, eq=False)
class SingularLocus:
    """Refined zero crossings of the Jacobian, tagged by grid component."""

    p: np.ndarray
    q: np.ndarray
    component: np.ndarray

    def __len__(self) -> int:
        return self.p.size

    @property
    def points(self) -> list[TrianglePoint]:
        return [TrianglePoint(a, b) for a, b in zip(self.p.tolist(), self.q.tolist())]


def singular_locus(f: Generator, g: Generator, n: int = 64, tol: float = 1e-10,
                   method: str = "auto") -> SingularLocus:
    """Locate interior points where the Jacobian determinant changes sign.

    The determinant is sampled on an offset ``n x n`` lattice (offsets keep
    lattice nodes off the lines ``q = 1/2`` and ``p + q = 1``); each lattice
    edge with a reliable sign change is bisected to width ``tol``.
    """
    if n < 8:
        raise ValueError(f"grid size must be >= 8, got {n}")
    ps = (np.arange(n) + 1.0 / 3.0) / n
    qs = (np.arange(n) + 0.5) / n
    P, Q = np.meshgrid(ps, qs, indexing="ij")
    valid = P < Q
    det, scale = jacobian_det_grid(f, g, np.where(valid, P, 0.25), np.where(valid, Q, 0.75),
                                   method=method)
    sign = np.where(valid & np.isfinite(det) & (np.abs(det) > 1e-12 * scale), np.sign(det), 0.0)

    lo_list, hi_list, fixed_list, axis_list, cell_list = [], [], [], [], []
    # edges along p (q fixed) and along q (p fixed)
    for axis in (0, 1):
        s0 = sign[:-1, :] if axis == 0 else sign[:, :-1]
        s1 = sign[1:, :] if axis == 0 else sign[:, 1:]
        hit = (s0 * s1) < 0
        ii, jj = np.nonzero(hit)
        if axis == 0:
            lo_list.append(ps[ii]); hi_list.append(ps[ii + 1]); fixed_list.append(qs[jj])
        else:
            lo_list.append(qs[jj]); hi_list.append(qs[jj + 1]); fixed_list.append(ps[ii])
        axis_list.append(np.full(ii.size, axis))
        cell_list.append(np.column_stack([ii, jj]))
    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    fixed = np.concatenate(fixed_list)
    axis = np.concatenate(axis_list)
    cells = np.concatenate(cell_list).astype(int)
    if lo.size == 0:
        empty = np.empty(0)
        return SingularLocus(empty, empty, np.empty(0, dtype=int))

    def det_at(var):
        p = np.where(axis == 0, var, fixed)
        q = np.where(axis == 0, fixed, var)
        return jacobian_det_grid(f, g, p, q, method=method)[0]

    s_lo = np.sign(det_at(lo))
    while np.max(hi - lo) >= tol:
        mid = 0.5 * (lo + hi)
        s_mid = np.sign(det_at(mid))
        left = s_mid == s_lo
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo <= 0):
            break
    root = 0.5 * (lo + hi)
    p = np.where(axis == 0, root, fixed)
    q = np.where(axis == 0, fixed, root)

    mask = np.zeros((n, n), dtype=bool)
    mask[cells[:, 0], cells[:, 1]] = True
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3)))
    comp = labels[cells[:, 0], cells[:, 1]]
    return SingularLocus(p, q, comp)


# --------------------------------------------------------------------------
# Limit ratios


@dataclass(frozen=True)
class LimitRatios:
    """Tail estimates of ``liminf``/``limsup`` of ``g(t) / f(t)`` at both ends.

    ``trend_*`` is ``"converged"``, ``"diverged"`` (ratio -> inf),
    ``"vanishing"`` (ratio -> 0) or ``"indeterminate"``.
    """

    beta0_at_zero: float
    beta0_at_inf: float
    gamma0_at_zero: float
    gamma0_at_inf: float
    f_zero_infinite: bool
    f_conj_infinite: bool
    g_zero_infinite: bool
    g_conj_infinite: bool
    trend_at_zero: str
    trend_at_inf: str


def _tail_ratio(f: Generator, g: Generator, ts: np.ndarray, rel_tol: float = 1e-6):
    fv = np.asarray(f.eval(ts))
    gv = np.asarray(g.eval(ts))
    ok = (fv != 0) & np.isfinite(fv) & np.isfinite(gv)
    r = gv[ok] / fv[ok]
    if r.size < TAIL:
        return math.nan, math.nan, "indeterminate"
    tail = r[-TAIL:]
    lo, hi = float(tail.min()), float(tail.max())
    steps = np.diff(tail)
    if (steps > 0).all() and tail[-1] > DIVERGED:
        return math.inf, math.inf, "diverged"
    if (steps < 0).all() and tail[-1] < 1.0 / DIVERGED:
        return 0.0, 0.0, "vanishing"
    if hi - lo <= rel_tol * max(1.0, abs(hi)):
        return lo, hi, "converged"
    return lo, hi, "indeterminate"


def _end_ratio(f_lim: float, g_lim: float, numeric):
    f_inf, g_inf = math.isinf(f_lim), math.isinf(g_lim)
    if g_inf and not f_inf:
        return math.inf, math.inf, "diverged"
    if f_inf and not g_inf:
        return 0.0, 0.0, "vanishing"
    if not f_inf and f_lim > 0:
        r = g_lim / f_lim
        return r, r, "converged"
    return numeric


def limit_ratios(f: Generator, g: Generator) -> LimitRatios:
    """Estimate the limits of ``g / f`` at ``t -> 0`` and ``t -> inf``.

    The ratio is sampled at ``2**-k`` and ``2**k`` for ``k = 1..60``.  Where
    the stored generator limits decide the answer (one side finite, the other
    infinite, or both finite) they override the numeric tail.
    """
    k = np.arange(1, 61, dtype=float)
    zero = _end_ratio(f.value_at_zero, g.value_at_zero, _tail_ratio(f, g, np.exp2(-k)))
    inf = _end_ratio(f.conjugate_at_zero, g.conjugate_at_zero, _tail_ratio(f, g, np.exp2(k)))
    return LimitRatios(
        beta0_at_zero=zero[0],
        beta0_at_inf=inf[0],
        gamma0_at_zero=zero[1],
        gamma0_at_inf=inf[1],
        f_zero_infinite=math.isinf(f.value_at_zero),
        f_conj_infinite=math.isinf(f.conjugate_at_zero),
        g_zero_infinite=math.isinf(g.value_at_zero),
        g_conj_infinite=math.isinf(g.conjugate_at_zero),
        trend_at_zero=zero[2],
        trend_at_inf=inf[2],
    )


def _second_at_one(f: Generator, h: float = 1e-4) -> float:
    closed = f.derivative(1.0, order=2)
    if closed is not None:
        return closed
    return float((f.eval(1.0 + h) - 2.0 * f.eval(1.0) + f.eval(1.0 - h)) / h**2)


def ratio_bound_exists(f: Generator, g: Generator) -> Optional[float]:
    """Candidate ``beta > 0`` with ``D_g >= beta D_f`` for all pairs, or ``None``.

    Requires positive curvature of both generators at ``t = 1``.  The value
    is the minimum of ``g / f`` over a log grid, the tail liminf estimates
    and the curvature ratio ``g''(1) / f''(1)``.
    """
    f2, g2 = _second_at_one(f), _second_at_one(g)
    if not (f2 > 0 and g2 > 0):
        raise ValueError(f"second derivative at 1 is not positive (f: {f2}, g: {g2})")
    lim = limit_ratios(f, g)
    ends = (lim.beta0_at_zero, lim.beta0_at_inf)
    if any(not (b > 0) for b in ends):
        return None
    t = np.logspace(-18, 18, 20001)
    t = t[np.abs(t - 1.0) > 1e-3]
    fv, gv = np.asarray(f.eval(t)), np.asarray(g.eval(t))
    ok = (fv > 0) & np.isfinite(fv) & np.isfinite(gv)
    candidates = [float(np.min(gv[ok] / fv[ok])), g2 / f2, *ends]
    beta = min(candidates)
    return beta if beta > 0 else None


def unboundedness_witness(f: Generator, g: Generator, gamma: float, depth: int = 1000):
    """Best binary pair for ``D_g - gamma D_f`` on the triangle's edges.

    Searches ``p = q 2**-k`` (towards ``p = 0``) and ``1 - q = (1 - p) 2**-k``
    (towards ``q = 1``, with the small atom stored exactly).  Returns
    ``(P, Q, x, y, excess)`` for the finite candidate with largest excess.
    """
    base = np.linspace(1.0 / 64, 63.0 / 64, 63)
    scale = np.exp2(-np.arange(1, depth + 1, dtype=float))
    B, S = np.meshgrid(base, scale, indexing="ij")
    # toward p = 0: q = B, p = B * S
    p1, q1 = (B * S).ravel(), B.ravel()
    # toward q = 1: p = B, 1 - q = (1 - B) * S
    p2 = B.ravel()
    qc2 = ((1.0 - B) * S).ravel()
    p = np.concatenate([p1, p2])
    q = np.concatenate([q1, 1.0 - qc2])
    pc = np.concatenate([1.0 - p1, 1.0 - p2])
    qc = np.concatenate([1.0 - q1, qc2])
    x = two_point_values(f, p, q, pc, qc)
    y = two_point_values(g, p, q, pc, qc)
    with np.errstate(invalid="ignore"):
        excess = np.where(np.isfinite(x) & np.isfinite(y), y - gamma * x, -np.inf)
    i = int(np.argmax(excess))
    P = np.array([pc[i], p[i]])
    Q = np.array([qc[i], q[i]])
    return P, Q, float(x[i]), float(y[i]), float(excess[i])


# --------------------------------------------------------------------------
# Achieving distributions


class AchieveError(RuntimeError):
    def __init__(self, message: str, residual: float = math.inf):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class MixturePair:
    """``target ~ alpha F(t1) + (1 - alpha) F(t2)`` realised on four atoms."""

    t1: TrianglePoint
    t2: TrianglePoint
    alpha: float
    P: DiscreteDistribution
    Q: DiscreteDistribution
    residual: float


def _to_triangle(u: float, s: float) -> TrianglePoint:
    u = min(max(u, 0.0), 1.0)
    s = min(max(s, 0.0), 1.0)
    return TrianglePoint(u, min(1.0, u + s * (1.0 - u)))


def _from_triangle(p: float, q: float) -> tuple[float, float]:
    return p, (0.0 if p >= 1.0 else (q - p) / (1.0 - p))


def _image(f, g, u, s):
    q = u + s * (1.0 - u)
    return two_point_values(f, u, q), two_point_values(g, u, q)


def _assemble(f, g, t1, t2, alpha, target) -> MixturePair:
    P1, Q1 = t1.distributions()
    P2, Q2 = t2.distributions()
    P, Q = block_mixture(P2, Q2, P1, Q1, alpha)
    got = divergence_pair(f, g, P, Q)
    res = math.hypot(got.x - target[0], got.y - target[1])
    if not math.isfinite(res):
        res = math.inf
    return MixturePair(t1, t2, alpha, P, Q, res)


def achieve(f: Generator, g: Generator, target, tol: float = 1e-6,
            region: Optional[ConvexRegion] = None, n: int = 256,
            max_iter: int = 10_000) -> MixturePair:
    """Construct a 4-atom pair whose divergences are within ``tol`` of ``target``.

    Search order: nearest cloud point; direct solve for a single binary pair
    from nearby cloud seeds; then pairs of cloud points whose segment passes
    near the target, refined jointly in both endpoints and the weight.
    """
    tx, ty = (float(v) for v in target)
    if not (math.isfinite(tx) and math.isfinite(ty)):
        raise ValueError("target must be finite")
    if region is None:
        region = joint_range(f, g, n)
    if classify(region, tx, ty, tol)[0] != Membership.INSIDE.value:
        raise AchieveError(f"target ({tx}, {ty}) is not inside the computed region")
    z = np.array([tx, ty])
    cloud = region.cloud
    pts = np.vstack([cloud.points, region.hull])
    pre = np.vstack([np.column_stack([cloud.p, cloud.q]), region.preimages])
    tree = cKDTree(pts)
    best: Optional[MixturePair] = None

    def consider(mp: MixturePair) -> bool:
        nonlocal best
        if best is None or mp.residual < best.residual:
            best = mp
        return mp.residual <= tol

    dist, i = tree.query(z)
    t = TrianglePoint(*pre[i])
    if dist <= tol and consider(_assemble(f, g, t, t, 1.0, z)):
        return best

    budget = [max_iter]

    def solve_single(p0, q0):
        def resid(v):
            x, y = _image(f, g, v[0], v[1])
            return np.array([x - tx, y - ty])

        sol = optimize.least_squares(resid, _from_triangle(p0, q0), bounds=([0, 0], [1, 1]),
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                     max_nfev=min(200, budget[0]))
        budget[0] -= sol.nfev
        return _to_triangle(*sol.x)

    _, seeds = tree.query(z, k=min(8, len(pts)))
    for j in np.atleast_1d(seeds):
        if budget[0] <= 0:
            break
        t = solve_single(*pre[j])
        if consider(_assemble(f, g, t, t, 1.0, z)):
            return best

    # segment search between candidate endpoints
    _, near = tree.query(z, k=min(64, len(pts)))
    cand = np.unique(np.concatenate([np.atleast_1d(near), np.arange(len(cloud), len(pts))]))
    A = pts[cand]
    d = A[None, :, :] - A[:, None, :]
    w = z[None, None, :] - A[:, None, :]
    dd = (d**2).sum(-1)
    lam = np.clip(np.where(dd > 0, (w * d).sum(-1) / np.where(dd > 0, dd, 1.0), 0.0), 0, 1)
    gap = np.hypot(*(A[:, None, :] + lam[..., None] * d - z[None, None, :]).transpose(2, 0, 1))
    order = np.argsort(gap, axis=None)[:20]
    for flat in order:
        if budget[0] <= 0:
            break
        a, b = np.unravel_index(flat, gap.shape)
        # target ~ (1 - lam) A[a] + lam A[b]; alpha weights endpoint t1 = b
        u1, s1 = _from_triangle(*pre[cand[b]])
        u2, s2 = _from_triangle(*pre[cand[a]])

        def resid(v):
            x1, y1 = _image(f, g, v[0], v[1])
            x2, y2 = _image(f, g, v[2], v[3])
            al = v[4]
            return np.array([al * x1 + (1 - al) * x2 - tx, al * y1 + (1 - al) * y2 - ty])

        sol = optimize.least_squares(resid, [u1, s1, u2, s2, lam[a, b]],
                                     bounds=([0] * 5, [1] * 5), xtol=1e-15, ftol=1e-15,
                                     gtol=1e-15, max_nfev=min(500, budget[0]))
        budget[0] -= sol.nfev
        v = sol.x
        mp = _assemble(f, g, _to_triangle(v[0], v[1]), _to_triangle(v[2], v[3]),
                       float(np.clip(v[4], 0, 1)), z)
        if consider(mp):
            return best
    raise AchieveError(
        f"residual {best.residual:.3g} above tol {tol:g} for target ({tx}, {ty})",
        best.residual,
    )


# --------------------------------------------------------------------------
# Monte Carlo membership


@dataclass(frozen=True)
class MembershipReport:
    inside: int
    outside: int
    unknown: int
    infinite: int
    worst_margin: float
    trials: int
    dim: int
    seed: int


CHUNK = 8192
WORST_CANDIDATES = 512


def _chunk_counts(f, g, region, d, m, seed, idx, tol):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(idx,)))
    E = rng.standard_exponential((2, m, d))
    P = E[0] / E[0].sum(axis=1, keepdims=True)
    Q = E[1] / E[1].sum(axis=1, keepdims=True)
    x = divergence_batch(f, P, Q)
    y = divergence_batch(g, P, Q)
    finite = np.isfinite(x) & np.isfinite(y)
    fx, fy = x[finite], y[finite]
    labels = classify(region, fx, fy, tol)
    X, Y = region.window
    cert = (fx <= 0.9 * X) & (fy <= 0.9 * Y)
    worst = -math.inf
    if cert.any():
        cx, cy = fx[cert], fy[cert]
        # exact margins only for the points closest to the boundary
        gap = region.ray_gap(cx, cy)
        pick = np.argsort(-gap)[:WORST_CANDIDATES]
        worst = float(region.margin(cx[pick], cy[pick]).max())
    return (
        int(np.count_nonzero(labels == Membership.INSIDE.value)),
        int(np.count_nonzero(labels == Membership.OUTSIDE.value)),
        int(np.count_nonzero(labels == Membership.UNKNOWN.value)),
        int(np.count_nonzero(~finite)),
        worst,
    )


def verify_membership(f: Generator, g: Generator, d: int, trials: int, seed: int,
                      region: Optional[ConvexRegion] = None, tol: float = 1e-6,
                      n: int = 512) -> MembershipReport:
    """Sample uniform pairs on the ``d``-simplex and classify their divergences.

    Each chunk of trials draws from its own seed-derived substream, so the
    report does not depend on how chunks are scheduled across threads.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if region is None:
        region = joint_range(f, g, n)
    sizes = [min(CHUNK, trials - s) for s in range(0, trials, CHUNK)]
    jobs = [(f, g, region, d, m, seed, i, tol) for i, m in enumerate(sizes)]
    workers = min(thread_count(), max(1, len(jobs)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _chunk_counts(*a), jobs))
    else:
        parts = [_chunk_counts(*a) for a in jobs]
    tot = np.array([p[:4] for p in parts], dtype=int).reshape(-1, 4).sum(axis=0)
    worst = max((p[4] for p in parts), default=-math.inf)
    return MembershipReport(int(tot[0]), int(tot[1]), int(tot[2]), int(tot[3]),
                            worst, trials, d, seed)
