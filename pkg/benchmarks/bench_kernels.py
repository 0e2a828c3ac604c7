"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Reports the best-of-``repeat`` wall time for each kernel and input size, the
speedup, and an end-to-end ``joint_range`` timing with each backend swapped
in.  Results for both backends are checked for equality before timing.
"""
from __future__ import annotations

import argparse
import time
from contextlib import contextmanager

import numpy as np

from divrange import _kernels_py, joint_range, kernels, parse_spec

try:
    from divrange import _kernels as _compiled
except ImportError:  # pragma: no cover - extension not built
    _compiled = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def hull_input(n, rng):
    pts = rng.normal(size=(n, 2))
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return np.ascontiguousarray(pts[order, 0]), np.ascontiguousarray(pts[order, 1])


def margin_input(m, k, rng):
    ang = np.linspace(0, 2 * np.pi, k, endpoint=False)
    return (rng.normal(size=m), rng.normal(size=m), np.cos(ang), np.sin(ang), np.ones(k))


@contextmanager
def backend(module):
    saved = kernels.monotone_chain, kernels.halfplane_margin
    kernels.monotone_chain, kernels.halfplane_margin = module.monotone_chain, module.halfplane_margin
    try:
        yield
    finally:
        kernels.monotone_chain, kernels.halfplane_margin = saved


def row(label, t_c, t_py):
    print(f"{label:<34} {t_c * 1e3:>11.2f} {t_py * 1e3:>11.2f} {t_py / t_c:>8.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    if _compiled is None:
        raise SystemExit("compiled extension not available; build with pip install -e .")

    rng = np.random.default_rng(0)
    sizes = (10_000, 100_000) if args.quick else (10_000, 100_000, 1_000_000)
    print(f"{'kernel':<34} {'cython ms':>11} {'python ms':>11} {'speedup':>9}")
    for n in sizes:
        x, y = hull_input(n, rng)
        a = _compiled.monotone_chain(x, y, 1e-12)
        b = _kernels_py.monotone_chain(x, y, 1e-12)
        assert np.array_equal(np.asarray(a), np.asarray(b))
        row(f"monotone_chain n={n:,}",
            best_of(lambda: _compiled.monotone_chain(x, y, 1e-12), args.repeat),
            best_of(lambda: _kernels_py.monotone_chain(x, y, 1e-12), args.repeat))

    shapes = ((10_000, 100), (100_000, 1_000)) if args.quick else \
        ((10_000, 100), (100_000, 1_000), (100_000, 10_000))
    for m, k in shapes:
        data = margin_input(m, k, rng)
        np.testing.assert_allclose(_compiled.halfplane_margin(*data),
                                   _kernels_py.halfplane_margin(*data), atol=1e-12)
        row(f"halfplane_margin {m:,} x {k:,}",
            best_of(lambda: _compiled.halfplane_margin(*data), args.repeat),
            best_of(lambda: _kernels_py.halfplane_margin(*data), args.repeat))

    f, g = parse_spec("tv"), parse_spec("chi2")
    n = 256 if args.quick else 512
    times = {}
    for name, mod in (("cython", _compiled), ("python", _kernels_py)):
        with backend(mod):
            times[name] = best_of(lambda: joint_range(f, g, n=n), 1)
    row(f"joint_range(tv, chi2) n={n}", times["cython"], times["python"])


if __name__ == "__main__":
    main()
