"""Command-line front end: ``divrange <command> --f SPEC --g SPEC ...``.

Tables are written as CSV (header row, LF endings), reports as JSON objects
and plots as static SVG.  Floats use the shortest round-trip decimal form;
infinities are written as ``"inf"``.  Every file is written atomically.

Exit codes: 0 success, 1 ``verify`` found an outside point, 2 bad generator
spec or arguments, 3 I/O failure, 4 ``achieve`` missed the tolerance.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .analysis import (
    AchieveError,
    achieve,
    limit_ratios,
    ratio_bound_exists,
    singular_locus,
    verify_membership,
)
from .divergence import two_point_values
from .generators import Generator, GeneratorSpecError, parse_spec
from .jointrange import DEFAULT_WINDOW, ConvexRegion, envelope, joint_range

EXIT_OK = 0
EXIT_OUTSIDE = 1
EXIT_SPEC = 2
EXIT_IO = 3
EXIT_ACHIEVE = 4

COMMANDS = ("range", "envelope", "singular", "limits", "achieve", "verify")
ENVELOPE_POINTS = 201
SVG_CLOUD_POINTS = 4000


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    command: str
    f_spec: str
    g_spec: str
    grid: int = 512
    window: tuple[float, float] = DEFAULT_WINDOW
    tol: float = 1e-6
    seed: int = 0
    dim: int = 3
    trials: int = 100_000
    target: Optional[tuple[float, float]] = None
    out: Optional[str] = None
    format: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        checks = {"grid": self.grid, "tol": self.tol, "dim": self.dim, "trials": self.trials}
        for name, value in checks.items():
            if not value > 0:
                raise ValueError(f"--{name} must be positive, got {value!r}")
        if not all(w > 0 for w in self.window):
            raise ValueError(f"--window must be positive, got {self.window!r}")
        if self.command == "verify" and self.dim < 2:
            raise ValueError("--dim must be at least 2")
        if self.command == "achieve" and self.target is None:
            raise ValueError("achieve needs --target X,Y")


# ---------------------------------------------------------------- formatting

def fmt(v) -> str:
    """Shortest decimal that round-trips, with ``inf``/``-inf``/``nan`` spelled out."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v) or math.isnan(v):
            return fmt(v)
        return v
    return v


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def to_csv(header: Sequence[str], columns: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_text(path: Optional[str], text: str) -> None:
    """Write ``text`` to ``path`` via temp file + rename; ``None`` or ``-`` is stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=target.parent if str(target.parent) else ".",
                                   prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            umask = os.umask(0)
            os.umask(umask)
            os.chmod(tmp, 0o666 & ~umask)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


# ---------------------------------------------------------------- fixtures

def _tv_chi2_bound(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x <= 1.0, 0.5 * x * x, x / (2.0 * (2.0 - x)))


# Known tight lower boundaries keyed by canonical generator names.
FIXTURES: dict[tuple[str, str], tuple[str, Callable, float]] = {
    ("power:2", "power:3"): ("y = 2x(x+1)/3", lambda x: 2.0 / 3.0 * x * (x + 1.0), math.inf),
    ("tv", "power:2"): ("tv-chi2 lower bound", _tv_chi2_bound, 2.0),
    ("tv", "lecam"): ("y = x^2/8", lambda x: np.asarray(x) ** 2 / 8.0, 2.0),
    ("tv", "power:1"): ("Pinsker y = x^2/2", lambda x: np.asarray(x) ** 2 / 2.0, 2.0),
}


_ALIASES = {"kl": "power:1", "rkl": "power:0", "hellinger": "power:0.5", "chi2": "power:2"}


def fixture_for(f: Generator, g: Generator):
    """Known boundary curve for the pair, if any, as ``(label, curve, x_max)``."""
    return FIXTURES.get((_ALIASES.get(f.name, f.name), _ALIASES.get(g.name, g.name)))


# ---------------------------------------------------------------- svg

def _ticks(lo: float, hi: float) -> list[float]:
    span = hi - lo
    if not span > 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span))
    if span / step < 4:
        step /= 2 if span / step >= 2 else 5
    first = math.ceil(lo / step)
    return [k * step for k in range(first, int(math.floor(hi / step)) + 1)]


def render_svg(title: str, window: tuple[float, float],
               datasets: Sequence[tuple[str, np.ndarray, np.ndarray]]) -> str:
    """Static plot of ``datasets`` on the box ``[0, X] x [0, Y]``, one polyline each."""
    W, H, M = 640.0, 480.0, 48.0
    X, Y = window

    def sx(v):
        return M + (W - 2 * M) * v / X

    def sy(v):
        return H - M - (H - 2 * M) * v / Y

    colors = ("#888888", "#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:g}" height="{H:g}" '
        f'viewBox="0 0 {W:g} {H:g}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="{M:g}" y="{M:g}" width="{W - 2 * M:g}" height="{H - 2 * M:g}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _ticks(0.0, X):
        out.append(f'<line x1="{sx(t):.2f}" y1="{H - M:g}" x2="{sx(t):.2f}" '
                   f'y2="{H - M + 5:g}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{H - M + 18:g}" font-size="10" '
                   f'text-anchor="middle">{t:g}</text>')
    for t in _ticks(0.0, Y):
        out.append(f'<line x1="{M - 5:g}" y1="{sy(t):.2f}" x2="{M:g}" y2="{sy(t):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{M - 8:g}" y="{sy(t) + 3:.2f}" font-size="10" '
                   f'text-anchor="end">{t:g}</text>')
    for i, (label, xs, ys) in enumerate(datasets):
        ok = np.isfinite(xs) & np.isfinite(ys)
        xs, ys = np.clip(xs[ok], 0, X), np.clip(ys[ok], 0, Y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline data-label="{escape(label)}" fill="none" '
                   f'stroke="{colors[i % len(colors)]}" stroke-width="1" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- commands

def _generators(cfg: RunConfig) -> tuple[Generator, Generator]:
    try:
        return parse_spec(cfg.f_spec), parse_spec(cfg.g_spec)
    except GeneratorSpecError as exc:
        raise CliError(f"bad generator spec: {exc}", EXIT_SPEC) from exc


def _region(cfg: RunConfig, f, g) -> ConvexRegion:
    return joint_range(f, g, n=cfg.grid, window=cfg.window)


def _base(cfg: RunConfig, default: str) -> str:
    out = cfg.out or default
    for ext in (".csv", ".json", ".svg"):
        if out.endswith(ext):
            return out[: -len(ext)]
    return out


def cmd_range(cfg: RunConfig) -> int:
    f, g = _generators(cfg)
    region = _region(cfg, f, g)
    base = _base(cfg, "range")
    cloud = region.cloud
    inf_x = np.isin(cloud.ledger_axis, ("x", "both"))
    inf_y = np.isin(cloud.ledger_axis, ("y", "both"))
    lx = np.where(inf_x, np.inf, 0.0)
    ly = np.where(inf_y, np.inf, 0.0)
    # finite coordinates of ledger entries are still reported
    lx = np.where(inf_x, lx, two_point_values(f, cloud.ledger_p, cloud.ledger_q))
    ly = np.where(inf_y, ly, two_point_values(g, cloud.ledger_p, cloud.ledger_q))
    n_fin, n_inf = len(cloud), cloud.ledger_p.size
    write_text(f"{base}.cloud.csv", to_csv(
        ("p", "q", "x", "y", "finite_flag"),
        (np.concatenate([cloud.p, cloud.ledger_p]), np.concatenate([cloud.q, cloud.ledger_q]),
         np.concatenate([cloud.x, lx]), np.concatenate([cloud.y, ly]),
         np.concatenate([np.ones(n_fin, dtype=int), np.zeros(n_inf, dtype=int)])),
    ))
    write_text(f"{base}.hull.csv", to_csv(("x", "y"), (region.hull[:, 0], region.hull[:, 1])))
    write_text(f"{base}.rays.json", to_json({
        "f": f.name, "g": g.name, "window": list(region.window),
        "rays": [list(r) for r in region.rays],
    }))
    if cfg.format == "svg":
        stride = max(1, n_fin // SVG_CLOUD_POINTS)
        order = np.lexsort((cloud.y, cloud.x))[::stride]
        h = region.hull
        closed = np.vstack([h, h[:1]])
        data = [("cloud", cloud.x[order], cloud.y[order]), ("hull", closed[:, 0], closed[:, 1])]
        fix = fixture_for(f, g)
        if fix is not None:
            label, curve, xmax = fix
            lower, _ = region._chains()
            xs = lower[:, 0][lower[:, 0] <= xmax]
            data.append((label, xs, curve(xs)))
        write_text(f"{base}.svg", render_svg(f"joint range {f.name} vs {g.name}",
                                             region.window, data))
    return EXIT_OK


def _envelope_grid(region: ConvexRegion) -> np.ndarray:
    """Decimal grid over the region's x-extent (clipped to the window).

    The step is a power of ten giving roughly 100 to 1000 points, so round
    abscissae such as 1.0 fall exactly on the grid.
    """
    lo, hi = region.x_extent
    hi = min(hi, region.window[0])
    if not hi > lo:
        return np.array([lo])
    m = 2 - math.floor(math.log10(hi - lo))
    scale = 10.0 ** m if m >= 0 else None
    if scale is None:
        step = 10.0 ** (-m)
        xs = np.arange(math.ceil(lo / step), math.floor(hi / step) + 1) * step
    else:
        xs = np.arange(math.ceil(lo * scale), math.floor(hi * scale) + 1) / scale
    return np.unique(np.concatenate([[lo], xs[(xs >= lo) & (xs <= hi)], [hi]]))


def cmd_envelope(cfg: RunConfig) -> int:
    f, g = _generators(cfg)
    region = _region(cfg, f, g)
    env = envelope(region, _envelope_grid(region))
    fmt_ = cfg.format or "csv"
    if fmt_ == "csv":
        text = to_csv(("x", "y_lower", "y_upper_or_inf"), (env.xs, env.y_lower, env.y_upper))
    elif fmt_ == "json":
        text = to_json({"f": f.name, "g": g.name, "x": env.xs, "y_lower": env.y_lower,
                        "y_upper_or_inf": env.y_upper})
    else:
        data = [("y_lower", env.xs, env.y_lower), ("y_upper", env.xs, env.y_upper)]
        text = render_svg(f"envelope {f.name} vs {g.name}", region.window, data)
    write_text(cfg.out, text)
    return EXIT_OK


def cmd_singular(cfg: RunConfig) -> int:
    f, g = _generators(cfg)
    loc = singular_locus(f, g, n=max(8, min(cfg.grid, 256)))
    if (cfg.format or "csv") == "json":
        text = to_json({"f": f.name, "g": g.name, "p": loc.p, "q": loc.q,
                        "component": loc.component})
    else:
        text = to_csv(("p", "q", "component"), (loc.p, loc.q, loc.component))
    write_text(cfg.out, text)
    return EXIT_OK


def cmd_limits(cfg: RunConfig) -> int:
    f, g = _generators(cfg)
    lim = limit_ratios(f, g)
    report = {fl.name: getattr(lim, fl.name) for fl in fields(lim)}
    try:
        beta = ratio_bound_exists(f, g)
    except ValueError:
        beta = None
    report["ratio_bound"] = beta
    write_text(cfg.out, to_json(report))
    return EXIT_OK


def _dist_json(d) -> list:
    return [float(v) for v in d.masses]


def cmd_achieve(cfg: RunConfig) -> int:
    f, g = _generators(cfg)
    try:
        pair = achieve(f, g, cfg.target, tol=cfg.tol, region=_region(cfg, f, g))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_SPEC) from exc
    except AchieveError as exc:
        write_text(cfg.out, to_json({"target": list(cfg.target), "error": str(exc),
                                     "residual": exc.residual}))
        return EXIT_ACHIEVE
    report = {
        "t1": {"p": pair.t1.p, "q": pair.t1.q},
        "t2": {"p": pair.t2.p, "q": pair.t2.q},
        "alpha": pair.alpha,
        "P": _dist_json(pair.P),
        "Q": _dist_json(pair.Q),
        "residual": pair.residual,
    }
    write_text(cfg.out, to_json(report))
    return EXIT_OK if pair.residual <= cfg.tol else EXIT_ACHIEVE


def cmd_verify(cfg: RunConfig) -> int:
    f, g = _generators(cfg)
    region = _region(cfg, f, g)
    rep = verify_membership(f, g, cfg.dim, cfg.trials, cfg.seed, region=region, tol=cfg.tol)
    write_text(cfg.out, to_json({fl.name: getattr(rep, fl.name) for fl in fields(rep)}))
    return EXIT_OUTSIDE if rep.outside else EXIT_OK


HANDLERS = {
    "range": cmd_range,
    "envelope": cmd_envelope,
    "singular": cmd_singular,
    "limits": cmd_limits,
    "achieve": cmd_achieve,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------- parsing

def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, EXIT_SPEC)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="divrange", description="Joint ranges of pairs of f-divergences.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--f", required=True, dest="f_spec", help="first generator spec")
        p.add_argument("--g", required=True, dest="g_spec", help="second generator spec")
        p.add_argument("--grid", type=int, default=512)
        p.add_argument("--window", type=_pair, default=DEFAULT_WINDOW)
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dim", type=int, default=3)
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--target", type=_pair)
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "json", "svg"))
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    try:
        return RunConfig(**vars(ns))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_SPEC) from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
        return HANDLERS[cfg.command](cfg)
    except CliError as exc:
        print(f"divrange: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
