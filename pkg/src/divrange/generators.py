"""Convex generator functions for f-divergences.

A generator is a convex ``f`` on ``(0, inf)`` with ``f(1) = 0``.  Each entry
stores its two boundary limits analytically:

* ``value_at_zero``      -- ``f(0) = lim_{t->0} f(t)``
* ``conjugate_at_zero``  -- ``f*(0) = lim_{t->inf} f(t) / t``

where ``f*(t) = t f(1/t)`` is the conjugate generator.  All evaluation is
vectorised over numpy arrays; overflow saturates to ``+inf``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Generator",
    "GeneratorSpecError",
    "make_power",
    "make_total_variation",
    "make_lecam",
    "make_jensen_shannon",
    "conjugate",
    "parse_spec",
    "CATALOG",
]

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _saturate(values: np.ndarray) -> np.ndarray:
    # inf - inf style cancellations only occur where the true value is +inf
    return np.where(np.isnan(values), np.inf, values)


@dataclass(frozen=True)
class Generator:
    """Immutable convex generator with analytic boundary limits."""

    name: str
    fn: ArrayFn
    value_at_zero: float
    conjugate_at_zero: float
    deriv1: Optional[ArrayFn] = None
    deriv2: Optional[ArrayFn] = None

    def eval(self, t):
        """Evaluate ``f(t)``; ``t = 0`` returns the stored limit ``f(0)``."""
        arr = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = _saturate(np.asarray(self.fn(np.where(arr > 0, arr, 1.0)), dtype=float))
        out = np.where(arr == 0, self.value_at_zero, out)
        out = np.where(np.isposinf(arr), np.inf, out)
        if out.ndim == 0:
            return float(out)
        return out

    __call__ = eval

    def derivative(self, t, order: int = 1):
        """Closed-form derivative if the entry provides one, else ``None``."""
        rule = self.deriv1 if order == 1 else self.deriv2
        if rule is None:
            return None
        arr = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(rule(arr), dtype=float)
        return float(out) if out.ndim == 0 else out

    def __repr__(self) -> str:
        return f"Generator({self.name!r})"


def _expm1_over(a: float, log_t: np.ndarray) -> np.ndarray:
    """``expm1(a * log_t) / a``, accurate down to subnormal ``a``."""
    y = a * log_t
    series = log_t * (1.0 + y / 2.0 + y * y / 6.0)
    return np.where(np.abs(y) < 1e-8, series, np.expm1(y) / a)


def make_power(alpha: float) -> Generator:
    """Power generator of order ``alpha``.

    ``alpha = 1`` gives Kullback-Leibler, ``alpha = 0`` reverse KL,
    ``alpha = 2`` the chi-square generator ``(t - 1)**2 / 2`` and
    ``alpha = 1/2`` the Hellinger generator ``2 (sqrt(t) - 1)**2``.
    """
    a = float(alpha)
    if not math.isfinite(a):
        raise ValueError(f"power order must be finite, got {alpha!r}")
    label = f"power:{a:g}"

    if a == 0.0:
        fn = lambda t: -np.log(t) + t - 1.0
        d1 = lambda t: 1.0 - 1.0 / t
    elif a == 1.0:
        fn = lambda t: t * np.log(t) - t + 1.0
        d1 = lambda t: np.log(t)
    else:
        e = a - 1.0

        # expm1(x L) / x stays accurate as x -> 0, so the orders near 0 and
        # near 1 are written around whichever of a, a - 1 is small
        if abs(a) <= abs(e):
            def fn(t):
                return (_expm1_over(a, np.log(t)) - (t - 1.0)) / e
        else:
            def fn(t):
                return (t * _expm1_over(e, np.log(t)) - (t - 1.0)) / a

        d1 = lambda t: _expm1_over(e, np.log(t))
    d2 = lambda t: np.exp((a - 2.0) * np.log(t))

    at_zero = math.inf if a <= 0 else 1.0 / a
    conj_zero = math.inf if a >= 1 else 1.0 / (1.0 - a)
    return Generator(label, fn, at_zero, conj_zero, d1, d2)


def make_total_variation() -> Generator:
    """``f(t) = |t - 1|``; the divergence is the L1 distance."""
    return Generator(
        "tv",
        lambda t: np.abs(t - 1.0),
        1.0,
        1.0,
        lambda t: np.sign(t - 1.0),
        lambda t: np.zeros_like(t),
    )


def make_lecam() -> Generator:
    """LeCam generator ``(t - 1)**2 / (4 (t + 1))``."""
    return Generator(
        "lecam",
        lambda t: (t - 1.0) ** 2 / (4.0 * (t + 1.0)),
        0.25,
        0.25,
        lambda t: (t - 1.0) * (t + 3.0) / (4.0 * (t + 1.0) ** 2),
        lambda t: 2.0 / (t + 1.0) ** 3,
    )


def make_jensen_shannon() -> Generator:
    """Jensen-Shannon generator ``(t ln t - (t + 1) ln((t + 1) / 2)) / 2``."""

    def fn(t):
        return 0.5 * (t * np.log(t) - (t + 1.0) * (np.log1p(t) - math.log(2.0)))

    half_ln2 = 0.5 * math.log(2.0)
    return Generator(
        "js",
        fn,
        half_ln2,
        half_ln2,
        lambda t: 0.5 * (np.log(2.0 * t) - np.log1p(t)),
        lambda t: 1.0 / (2.0 * t * (t + 1.0)),
    )


def conjugate(g: Generator) -> Generator:
    """Return ``g*(t) = t g(1/t)``, swapping the two boundary limits."""
    fn = lambda t: t * g.fn(1.0 / t)
    d1 = d2 = None
    if g.deriv1 is not None:
        d1 = lambda t: g.fn(1.0 / t) - g.deriv1(1.0 / t) / t
    if g.deriv2 is not None:
        d2 = lambda t: g.deriv2(1.0 / t) / t**3
    return Generator(f"conj({g.name})", fn, g.conjugate_at_zero, g.value_at_zero, d1, d2)


CATALOG: dict[str, Callable[[], Generator]] = {
    "tv": make_total_variation,
    "kl": lambda: replace(make_power(1), name="kl"),
    "rkl": lambda: replace(make_power(0), name="rkl"),
    "hellinger": lambda: replace(make_power(0.5), name="hellinger"),
    "chi2": lambda: replace(make_power(2), name="chi2"),
    "lecam": make_lecam,
    "js": make_jensen_shannon,
}


class GeneratorSpecError(ValueError):
    """Malformed generator spec; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, spec: str, offset: int):
        super().__init__(f"{message} at offset {offset} in {spec!r}")
        self.spec = spec
        self.offset = offset


_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _parse(s: str, pos: int) -> tuple[Generator, int]:
    if s.startswith("conj(", pos):
        inner, pos = _parse(s, pos + 5)
        if pos >= len(s) or s[pos] != ")":
            raise GeneratorSpecError("unbalanced conjugation, expected ')'", s, pos)
        return conjugate(inner), pos + 1
    if s.startswith("power:", pos):
        start = pos + 6
        m = _NUMBER.match(s, start)
        if m is None:
            raise GeneratorSpecError("malformed power parameter", s, start)
        value = float(m.group())
        if not math.isfinite(value):
            raise GeneratorSpecError("malformed power parameter", s, start)
        return make_power(value), m.end()
    m = _NAME.match(s, pos)
    if m is None or m.group() not in CATALOG:
        raise GeneratorSpecError("unknown generator name", s, pos)
    return CATALOG[m.group()](), m.end()


def parse_spec(spec: str) -> Generator:
    """Resolve a spec such as ``"chi2"``, ``"power:-1"`` or ``"conj(kl)"``."""
    gen, pos = _parse(spec, 0)
    if pos != len(spec):
        raise GeneratorSpecError("unexpected trailing input", spec, pos)
    return gen
