"""Pure-Python reference versions of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np


def monotone_chain(xs, ys, tol):
    """Convex hull indices of points pre-sorted by (x, y), counterclockwise.

    A turn is kept only when its cross product exceeds ``tol * |oa| * |ob|``,
    so near-collinear points are dropped independent of scale.
    """
    xs = np.asarray(xs, dtype=float).tolist()
    ys = np.asarray(ys, dtype=float).tolist()
    n = len(xs)
    if n < 3:
        if n == 2 and xs[0] == xs[1] and ys[0] == ys[1]:
            return np.array([0], dtype=np.int64)
        return np.arange(n, dtype=np.int64)

    def chain(order):
        out = []
        for i in order:
            x, y = xs[i], ys[i]
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                ax, ay = xs[a] - xs[o], ys[a] - ys[o]
                bx, by = x - xs[o], y - ys[o]
                cross = ax * by - ay * bx
                if cross > tol * math.hypot(ax, ay) * math.hypot(bx, by):
                    break
                out.pop()
            if out and xs[out[-1]] == x and ys[out[-1]] == y:
                continue
            out.append(i)
        return out

    lower = chain(range(n))
    upper = chain(range(n - 1, -1, -1))
    hull = lower[:-1] + upper[:-1]
    if not hull:
        hull = lower[:1]
    return np.array(hull, dtype=np.int64)


def halfplane_margin(px, py, nx, ny, offsets):
    """``max_k (nx[k] * px + ny[k] * py - offsets[k])`` for every point."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    out = np.full(px.shape, -np.inf)
    chunk = max(1, 2_000_000 // max(nx.size, 1))
    for start in range(0, px.size, chunk):
        sx = px[start:start + chunk, None]
        sy = py[start:start + chunk, None]
        vals = sx * nx[None, :] + sy * ny[None, :] - offsets[None, :]
        out[start:start + chunk] = vals.max(axis=1) if nx.size else -np.inf
    return out
