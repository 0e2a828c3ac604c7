"""Joint range of ``(D_f, D_g)`` as the convex hull of two-point images.

Every achievable pair is a convex combination of pairs realised by binary
distributions, so the range is recovered by sampling the triangle
``0 <= p <= q <= 1``, hulling the finite images inside a window and
attaching the recession directions found by the limit-ratio analysis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np

from . import kernels
from .divergence import DivergencePoint, TrianglePoint, two_point_values
from .generators import Generator

__all__ = [
    "DEFAULT_WINDOW",
    "HULL_TOL",
    "TriangleGrid",
    "PointCloud",
    "ConvexRegion",
    "Envelope",
    "Membership",
    "sample_triangle",
    "cloud_2achievable",
    "hull",
    "joint_range",
    "envelope",
    "lower_envelope",
    "classify",
    "upper_envelope",
    "contains",
]

DEFAULT_WINDOW = (20.0, 20.0)
HULL_TOL = 1e-12
REFINE_DEPTH = 40
# refinement stops once no inserted sample bulges an edge by more than this
REFINE_SAG = 1e-8
# direction components below this are treated as zero
_DIR_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class TriangleGrid:
    """Sample of the triangle as parallel ``p``/``q`` arrays."""

    p: np.ndarray
    q: np.ndarray

    def __len__(self) -> int:
        return self.p.size

    def __iter__(self) -> Iterator[TrianglePoint]:
        for p, q in zip(self.p.tolist(), self.q.tolist()):
            yield TrianglePoint(p, q)


def sample_triangle(n: int) -> TriangleGrid:
    """Uniform ``n x n`` lattice on the triangle plus geometric edge refinement.

    Coordinates ``2**-k`` and ``1 - 2**-k`` (``k <= 40``) are added to the
    lattice values, and every resulting ``p`` is paired with ``p + 2**-k``, so
    the edges ``p = 0``, ``q = 1`` and ``p = q`` are all approached
    geometrically.  The corners ``(0, 0)``, ``(0, 1)``, ``(1, 1)`` are exact.
    """
    if n < 2:
        raise ValueError(f"grid size must be >= 2, got {n}")
    steps = np.ldexp(1.0, -np.arange(1, REFINE_DEPTH + 1))
    coords = np.unique(np.concatenate([np.arange(n + 1) / n, steps, 1.0 - steps]))
    i, j = np.triu_indices(coords.size)
    p_parts = [coords[i]]
    q_parts = [coords[j]]
    # offsets off the diagonal, below lattice resolution
    pp = np.repeat(coords, steps.size)
    qq = pp + np.tile(steps, coords.size)
    ok = qq <= 1.0
    p_parts.append(pp[ok])
    q_parts.append(qq[ok])
    pp = np.repeat(coords, steps.size) - np.tile(steps, coords.size)
    qq = np.repeat(coords, steps.size)
    ok = pp >= 0.0
    p_parts.append(pp[ok])
    q_parts.append(qq[ok])
    p = np.concatenate(p_parts)
    q = np.concatenate(q_parts)
    order = np.lexsort((q, p))
    p, q = p[order], q[order]
    keep = np.ones(p.size, dtype=bool)
    keep[1:] = (np.diff(p) != 0) | (np.diff(q) != 0)
    return TriangleGrid(np.ascontiguousarray(p[keep]), np.ascontiguousarray(q[keep]))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Images of triangle samples, split into finite points and a ledger.

    ``ledger_axis`` holds ``"x"``, ``"y"`` or ``"both"`` naming the infinite
    coordinate(s) for each ledger entry.
    """

    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    q: np.ndarray
    ledger_p: np.ndarray
    ledger_q: np.ndarray
    ledger_axis: np.ndarray

    def __len__(self) -> int:
        return self.x.size

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @property
    def ledger_counts(self) -> dict[str, int]:
        return {k: int(np.count_nonzero(self.ledger_axis == k)) for k in ("x", "y", "both")}


def cloud_2achievable(f: Generator, g: Generator, pts) -> PointCloud:
    """Map triangle points through ``(D_f, D_g)`` on binary distributions."""
    if isinstance(pts, TriangleGrid):
        p, q = pts.p, pts.q
    else:
        arr = np.array([(t.p, t.q) for t in pts], dtype=float).reshape(-1, 2)
        p, q = arr[:, 0], arr[:, 1]
    x = two_point_values(f, p, q)
    y = two_point_values(g, p, q)
    fx, fy = np.isfinite(x), np.isfinite(y)
    if np.isnan(x).any() or np.isnan(y).any():
        raise FloatingPointError("NaN divergence value in cloud")
    keep = fx & fy
    bad = ~keep
    axis = np.where(~fx[bad] & ~fy[bad], "both", np.where(~fx[bad], "x", "y"))
    return PointCloud(x[keep], y[keep], p[keep], q[keep], p[bad], q[bad], axis)


def _hull_indices(x: np.ndarray, y: np.ndarray, tol: float = HULL_TOL) -> np.ndarray:
    order = np.lexsort((y, x))
    idx = kernels.monotone_chain(x[order], y[order], tol)
    return order[idx]


def hull(points, tol: float = HULL_TOL) -> np.ndarray:
    """Counterclockwise convex hull from the lexicographic minimum.

    Near-collinear points (turn sine within ``tol``) are dropped, so a
    collinear input yields its two endpoints and a single point itself.
    """
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("hull of an empty point set")
    if not np.isfinite(arr).all():
        raise ValueError("hull needs finite points")
    return arr[_hull_indices(arr[:, 0], arr[:, 1], tol)]


def _direction(ratio: float) -> tuple[float, float]:
    if np.isposinf(ratio):
        return (0.0, 1.0)
    v = np.array([1.0, ratio])
    v /= np.hypot(*v)
    return (float(v[0]), float(v[1]))


@dataclass(frozen=True, eq=False)
class ConvexRegion:
    """Certified hull inside ``window`` plus recession directions.

    ``preimages`` gives, per hull vertex, the triangle point it came from.
    """

    hull: np.ndarray
    rays: tuple[tuple[float, float], ...]
    window: tuple[float, float]
    preimages: Optional[np.ndarray] = None
    cloud: Optional[PointCloud] = field(default=None, repr=False)

    @cached_property
    def cone(self) -> Optional[tuple[float, float]]:
        """Angles ``(lo, hi)`` spanning the recession cone, or ``None``."""
        if not self.rays:
            return None
        ang = [float(np.arctan2(dy, dx)) for dx, dy in self.rays]
        return (min(ang), max(ang))

    @cached_property
    def halfplanes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Outward normals and offsets of ``hull + cone``: inside iff all ``n.z <= c``."""
        h = self.hull
        k = h.shape[0]
        normals = []
        if k >= 2:
            d = np.roll(h, -1, axis=0) - h
            if k == 2:
                d = d[:1]
            length = np.hypot(d[:, 0], d[:, 1])
            edge_n = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
            normals.append(edge_n)
            if k == 2:
                normals.append(-edge_n)
                u = d[0] / length[0]
                normals.append(np.array([u, -u]))
        else:
            normals.append(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
        normals = np.vstack(normals)
        if self.cone is not None:
            lo, hi = self.cone
            dirs = np.array([[np.cos(lo), np.sin(lo)], [np.cos(hi), np.sin(hi)]])
            keep = (normals @ dirs.T <= _DIR_EPS).all(axis=1)
            normals = np.vstack(
                [normals[keep], [[np.sin(lo), -np.cos(lo)], [-np.sin(hi), np.cos(hi)]]]
            )
        offsets = np.empty(normals.shape[0])
        step = max(1, 4_000_000 // max(k, 1))
        for i in range(0, normals.shape[0], step):
            offsets[i:i + step] = (normals[i:i + step] @ h.T).max(axis=1)
        return (
            np.ascontiguousarray(normals[:, 0]),
            np.ascontiguousarray(normals[:, 1]),
            offsets,
        )

    def margin(self, x, y) -> np.ndarray:
        """Signed distance-like margin: ``<= 0`` inside ``hull + cone``."""
        nx, ny, c = self.halfplanes
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return kernels.halfplane_margin(x.ravel(), y.ravel(), nx, ny, c).reshape(x.shape)

    @cached_property
    def outline(self) -> Optional[tuple[np.ndarray, np.ndarray, float, float]]:
        """Polygon of ``hull + cone`` truncated far away, for angular lookup.

        Returns ``(vertices, angles, cx, cy)`` with vertices counterclockwise
        sorted by angle about the interior point ``(cx, cy)``, or ``None`` when
        the region has no interior.
        """
        h = self.hull
        pts = [h]
        if self.cone is not None:
            reach = 1e6 * max(1.0, *self.window)
            for a in self.cone:
                pts.append(h + reach * np.array([np.cos(a), np.sin(a)]))
        pts = np.vstack(pts)
        verts = pts[_hull_indices(pts[:, 0], pts[:, 1])]
        if verts.shape[0] < 3:
            return None
        c = verts.mean(axis=0) if self.cone is None else h.mean(axis=0)
        if self.cone is not None:
            lo, hi = self.cone
            mid = 0.5 * (lo + hi)
            c = c + 1e-3 * max(1.0, *self.window) * np.array([np.cos(mid), np.sin(mid)])
        ang = np.arctan2(verts[:, 1] - c[1], verts[:, 0] - c[0])
        start = int(np.argmin(ang))
        verts = np.roll(verts, -start, axis=0)
        ang = np.roll(ang, -start)
        if np.any(np.diff(ang) <= 0):
            return None
        return verts, ang, float(c[0]), float(c[1])

    def inside_fast(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Exact membership of finite points in ``hull + cone`` (no tolerance)."""
        return self.ray_gap(x, y) <= 0.0

    def ray_gap(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Signed distance to the outline edge hit by the ray from its centre.

        The sign is exact (positive outside); the magnitude bounds the
        distance to the boundary from above for inside points.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self.outline
        if out is None:
            return self.margin(x, y)
        verts, ang, cx, cy = out
        a = np.arctan2(y - cy, x - cx)
        k = (np.searchsorted(ang, a, side="right") - 1) % ang.size
        v0 = verts[k]
        v1 = verts[(k + 1) % ang.size]
        ex, ey = v1[..., 0] - v0[..., 0], v1[..., 1] - v0[..., 1]
        cross = ex * (y - v0[..., 1]) - ey * (x - v0[..., 0])
        return -cross / np.hypot(ex, ey)

    @property
    def x_extent(self) -> tuple[float, float]:
        lo = float(self.hull[:, 0].min())
        hi = float(self.hull[:, 0].max())
        if any(dx > _DIR_EPS for dx, _ in self.rays):
            hi = np.inf
        return lo, hi

    @property
    def vertical_ray(self) -> bool:
        return any(abs(dx) <= _DIR_EPS and dy > 0 for dx, dy in self.rays)

    def _chains(self) -> tuple[np.ndarray, np.ndarray]:
        h = self.hull
        imax = int(np.lexsort((h[:, 1], h[:, 0]))[-1])
        lower = h[: imax + 1]
        upper = np.vstack([h[imax:], h[:1]])[::-1]
        if lower.shape[0] >= 2 and lower[-1, 0] == lower[-2, 0]:
            lower = lower[:-1]
        if upper.shape[0] >= 2 and upper[0, 0] == upper[1, 0]:
            upper = upper[1:]
        return lower, upper


def _support_search(f, g, nx, ny, p, q, radius, window, iters: int = 24):
    """Pattern search maximising ``n . (D_f, D_g)`` over the triangle near ``(p, q)``."""
    X, Y = window
    step = np.array([-1.0, 0.0, 1.0])
    dp, dq = (a.ravel() for a in np.meshgrid(step, step, indexing="ij"))

    def score(pp, qq):
        x = two_point_values(f, pp, qq)
        y = two_point_values(g, pp, qq)
        with np.errstate(invalid="ignore"):
            val = nx[:, None] * x + ny[:, None] * y
        ok = np.isfinite(x) & np.isfinite(y) & (x <= X) & (y <= Y)
        return np.where(ok, val, -np.inf)

    best = score(p[:, None], q[:, None])[:, 0]
    r = radius.copy()
    for _ in range(iters):
        cp = np.clip(p[:, None] + r[:, None] * dp[None, :], 0.0, 1.0)
        cq = np.clip(q[:, None] + r[:, None] * dq[None, :], cp, 1.0)
        vals = score(cp, cq)
        j = np.argmax(vals, axis=1)
        rows = np.arange(p.size)
        better = vals[rows, j] > best
        p = np.where(better, cp[rows, j], p)
        q = np.where(better, cq[rows, j], q)
        best = np.where(better, vals[rows, j], best)
        r = np.where(better, r, 0.5 * r)
    return p, q


def _refine_hull(f, g, x, y, p, q, window, rounds: int = 40, per_edge: int = 3,
                 sag: float = REFINE_SAG):
    """Add samples that push hull edges outward until every edge is stable.

    Each unchecked edge gets points interpolated between its endpoint
    preimages plus a local search for the triangle point maximising the
    edge's outward normal; points bulging past the edge by more than ``sag``
    are kept and the hull is rebuilt.
    """
    X, Y = window
    s = np.linspace(0.0, 1.0, per_edge + 2)[1:-1]
    ids = np.arange(x.size)
    next_id = x.size
    idx = _hull_indices(x, y)
    x, y, p, q, ids = x[idx], y[idx], p[idx], q[idx], ids[idx]
    checked: set[tuple[int, int]] = set()
    for _ in range(rounds):
        k = x.size
        if k < 2:
            break
        nxt = np.roll(np.arange(k), -1)
        fresh = np.array([(a, b) not in checked for a, b in zip(ids.tolist(), ids[nxt].tolist())])
        checked.update(zip(ids.tolist(), ids[nxt].tolist()))
        e = np.flatnonzero(fresh)
        if e.size == 0:
            break
        en = nxt[e]
        dx, dy = x[en] - x[e], y[en] - y[e]
        length = np.hypot(dx, dy)
        ok = length > 0
        nrm_x = np.where(ok, dy / np.where(ok, length, 1.0), 0.0)
        nrm_y = np.where(ok, -dx / np.where(ok, length, 1.0), 0.0)
        cp = p[e, None] + s[None, :] * (p[en] - p[e])[:, None]
        cq = q[e, None] + s[None, :] * (q[en] - q[e])[:, None]
        radius = np.maximum(np.hypot(p[en] - p[e], q[en] - q[e]), 1e-9)
        sp, sq = _support_search(f, g, nrm_x, nrm_y, 0.5 * (p[e] + p[en]),
                                 0.5 * (q[e] + q[en]), radius, (X, Y))
        cp = np.column_stack([cp, sp])
        cq = np.column_stack([cq, sq])
        cx = two_point_values(f, cp, cq)
        cy = two_point_values(g, cp, cq)
        with np.errstate(invalid="ignore"):
            beyond = (cx - x[e, None]) * nrm_x[:, None] + (cy - y[e, None]) * nrm_y[:, None]
        good = np.isfinite(cx) & np.isfinite(cy) & (cx <= X) & (cy <= Y)
        if k == 2:
            beyond = np.abs(beyond)
        gain = good & (beyond > sag)
        if not gain.any():
            continue
        m = int(gain.sum())
        x = np.concatenate([x, cx[gain]])
        y = np.concatenate([y, cy[gain]])
        p = np.concatenate([p, cp[gain]])
        q = np.concatenate([q, cq[gain]])
        ids = np.concatenate([ids, np.arange(next_id, next_id + m)])
        next_id += m
        idx = _hull_indices(x, y)
        x, y, p, q, ids = x[idx], y[idx], p[idx], q[idx], ids[idx]
    return x, y, p, q


def recession_rays(limits) -> tuple[tuple[float, float], ...]:
    """Recession directions implied by a :class:`~divrange.analysis.LimitRatios`.

    At an end where only ``g`` blows up the range is unbounded upward; where
    only ``f`` blows up it is unbounded to the right; where both blow up the
    limiting ratio sets the slope, and no ray is attached unless the ratio
    tail has settled (converged, diverged or vanished).
    """
    rays: list[tuple[float, float]] = []
    ends = (
        (limits.f_zero_infinite, limits.g_zero_infinite, limits.beta0_at_zero,
         limits.gamma0_at_zero, limits.trend_at_zero),
        (limits.f_conj_infinite, limits.g_conj_infinite, limits.beta0_at_inf,
         limits.gamma0_at_inf, limits.trend_at_inf),
    )
    for f_inf, g_inf, lo, hi, trend in ends:
        if not (f_inf or g_inf):
            continue
        if g_inf and not f_inf:
            rays.append((0.0, 1.0))
        elif f_inf and not g_inf:
            rays.append((1.0, 0.0))
        elif trend != "indeterminate":
            rays.append(_direction(lo))
            rays.append(_direction(hi))
    return tuple(sorted(set(rays)))


def joint_range(
    f: Generator,
    g: Generator,
    n: int = 512,
    window: tuple[float, float] = DEFAULT_WINDOW,
    refine: bool = True,
) -> ConvexRegion:
    """Convex region of achievable ``(D_f, D_g)`` certified inside ``window``."""
    from .analysis import limit_ratios

    X, Y = float(window[0]), float(window[1])
    if not (X > 0 and Y > 0):
        raise ValueError(f"window must be positive, got {window!r}")
    cloud = cloud_2achievable(f, g, sample_triangle(n))
    inside = (cloud.x <= X) & (cloud.y <= Y)
    x, y, p, q = cloud.x[inside], cloud.y[inside], cloud.p[inside], cloud.q[inside]
    if refine:
        x, y, p, q = _refine_hull(f, g, x, y, p, q, (X, Y))
    else:
        idx = _hull_indices(x, y)
        x, y, p, q = x[idx], y[idx], p[idx], q[idx]
    rays = recession_rays(limit_ratios(f, g))
    return ConvexRegion(
        hull=np.column_stack([x, y]),
        rays=rays,
        window=(X, Y),
        preimages=np.column_stack([p, q]),
        cloud=cloud,
    )


@dataclass(frozen=True, eq=False)
class Envelope:
    xs: np.ndarray
    y_lower: np.ndarray
    y_upper: np.ndarray


def _check_grid(region: ConvexRegion, xs) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lo, hi = region.x_extent
    tol = 1e-12 * max(1.0, abs(lo), abs(hi) if np.isfinite(hi) else 1.0)
    bad = (xs < lo - tol) | (xs > hi + tol)
    if bad.any():
        raise ValueError(f"x={xs[bad][0]!r} outside the region's x-extent [{lo}, {hi}]")
    return xs


def _ray_slopes(region: ConvexRegion) -> list[float]:
    return [dy / dx for dx, dy in region.rays if dx > _DIR_EPS]


def _walk(chain: np.ndarray, xs: np.ndarray, fill: float) -> np.ndarray:
    if chain.shape[0] == 1:
        return np.where(xs == chain[0, 0], chain[0, 1], fill)
    inside = (xs >= chain[0, 0]) & (xs <= chain[-1, 0])
    vals = np.interp(xs, chain[:, 0], chain[:, 1])
    return np.where(inside, vals, fill)


def envelope(region: ConvexRegion, xs) -> Envelope:
    """Per-``x`` minimal and maximal ``D_g`` over the region."""
    xs = _check_grid(region, xs)
    lower, upper = region._chains()
    lo = _walk(lower, xs, np.inf)
    hi = _walk(upper, xs, -np.inf)
    h = region.hull
    for slope in _ray_slopes(region):
        # vertex v swept along (1, slope) reaches x at height v_y + slope (x - v_x)
        reach = h[None, :, 1] + slope * (xs[:, None] - h[None, :, 0])
        valid = h[None, :, 0] <= xs[:, None]
        lo = np.minimum(lo, np.where(valid, reach, np.inf).min(axis=1))
        hi = np.maximum(hi, np.where(valid, reach, -np.inf).max(axis=1))
    if region.vertical_ray:
        hi = np.full_like(xs, np.inf)
    return Envelope(xs, lo, hi)


def lower_envelope(region: ConvexRegion, xs) -> Envelope:
    return envelope(region, xs)


def upper_envelope(region: ConvexRegion, xs) -> Envelope:
    return envelope(region, xs)


class Membership(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    UNKNOWN = "unknown"


def _infinite_covered(region: ConvexRegion, x: float, y: float) -> bool:
    cone = region.cone
    if cone is None or np.isnan(x) or np.isnan(y):
        return False
    lo, hi = cone
    h = region.hull
    if np.isinf(x) and np.isinf(y):
        return lo < np.pi / 2 - _DIR_EPS and hi > _DIR_EPS
    if np.isinf(x):
        if lo > _DIR_EPS:
            return False
        return h[:, 1].min() <= y and (y <= h[:, 1].max() or hi > _DIR_EPS)
    if hi < np.pi / 2 - _DIR_EPS:
        return False
    return h[:, 0].min() <= x and (x <= h[:, 0].max() or lo < np.pi / 2 - _DIR_EPS)


def classify(region: ConvexRegion, x, y, tol: float = 1e-6) -> np.ndarray:
    """Vectorised :func:`contains`; returns a string array of membership values."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    X, Y = region.window
    out = np.full(x.shape, Membership.UNKNOWN.value, dtype="<U7")
    finite = np.isfinite(x) & np.isfinite(y)
    m = np.full(x.shape, np.inf)
    if finite.any():
        fx, fy = x[finite], y[finite]
        mf = np.where(region.inside_fast(fx, fy), -np.inf, np.nan)
        rest = np.isnan(mf)
        if rest.any():
            mf[rest] = region.margin(fx[rest], fy[rest])
        m[finite] = mf
    certified = finite & (x <= 0.9 * X) & (y <= 0.9 * Y)
    out[certified & (m <= tol)] = Membership.INSIDE.value
    out[certified & (m > tol)] = Membership.OUTSIDE.value
    out[finite & ~certified & (m <= tol)] = Membership.INSIDE.value
    for i in np.flatnonzero(~finite):
        if _infinite_covered(region, x[i], y[i]):
            out[i] = Membership.INSIDE.value
    return out


def contains(region: ConvexRegion, pt, tol: float = 1e-6) -> Membership:
    """Membership of a divergence pair in the region.

    Inside ``0.9 * window`` the answer is decided by the half-planes of
    ``hull + cone`` expanded by ``tol``.  Beyond that box the same test can
    only confirm membership, so failures there are ``unknown``.  Infinite
    coordinates count as inside when the recession rays reach them.
    """
    x, y = pt
    return Membership(classify(region, x, y, tol)[0])
