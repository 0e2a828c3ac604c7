import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import jensenshannon
from scipy.special import rel_entr

from divrange import (
    DiscreteDistribution,
    TrianglePoint,
    block_mixture,
    divergence,
    divergence_pair,
    parse_spec,
    two_point_pair,
)
from divrange.divergence import divergence_batch, two_point_values

KL, RKL, CHI2, TV, HEL, LECAM, JS = (
    parse_spec(s) for s in ("kl", "rkl", "chi2", "tv", "hellinger", "lecam", "js")
)


@st.composite
def dist_pairs(draw, min_size=2, max_size=8, zeros=False):
    d = draw(st.integers(min_size, max_size))
    mass = st.floats(1e-3, 1.0)
    if zeros:
        # masses below ~1e-300 would overflow p/q for generators with f*(0) = inf
        mass = st.one_of(st.just(0.0), st.floats(1e-100, 1.0))
    p = np.array(draw(st.lists(mass, min_size=d, max_size=d)))
    q = np.array(draw(st.lists(mass, min_size=d, max_size=d)))
    if p.sum() == 0:
        p[0] = 1.0
    if q.sum() == 0:
        q[-1] = 1.0
    return p / p.sum(), q / q.sum()


def _oracles():
    def lecam(p, q):
        s = p + q
        m = s > 0
        return float(np.sum((p[m] - q[m]) ** 2 / (4 * s[m])))

    return {
        "kl": lambda p, q: float(np.sum(rel_entr(p, q))),
        "rkl": lambda p, q: float(np.sum(rel_entr(q, p))),
        "chi2": lambda p, q: float(np.sum((p - q) ** 2 / q)) / 2,
        "tv": lambda p, q: float(np.abs(p - q).sum()),
        "hellinger": lambda p, q: 2 * float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)),
        "lecam": lecam,
        "js": lambda p, q: float(jensenshannon(p, q)) ** 2,
    }


ORACLES = _oracles()


@pytest.mark.parametrize("name", sorted(ORACLES))
@settings(max_examples=60, deadline=None)
@given(pq=dist_pairs())
def test_matches_independent_formula(name, pq):
    p, q = pq
    got = divergence(parse_spec(name), p, q)
    assert got == pytest.approx(ORACLES[name](p, q), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("name", ["tv", "lecam", "js", "kl"])
@settings(max_examples=60, deadline=None)
@given(pq=dist_pairs(zeros=True))
def test_zero_atoms_follow_limits(name, pq):
    p, q = pq
    got = divergence(parse_spec(name), p, q)
    want = ORACLES[name](p, q)
    if math.isinf(want):
        assert math.isinf(got)
    else:
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_conventions_on_boundary_atoms():
    # p = 0 < q contributes q f(0); p > 0 = q contributes p f*(0); 0 = 0 contributes nothing
    assert divergence(TV, [1, 0, 0], [0, 1, 0]) == 2.0
    assert divergence(CHI2, [0.5, 0.5, 0], [0.5, 0, 0.5]) == math.inf
    assert divergence(CHI2, [1, 0], [0.5, 0.5]) == pytest.approx(0.5)
    assert divergence(KL, [0, 1], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert divergence(RKL, [0, 1], [0.5, 0.5]) == math.inf
    assert divergence(LECAM, [1, 0], [0, 1]) == pytest.approx(0.5)
    assert divergence(JS, [1, 0], [0, 1]) == pytest.approx(math.log(2))


@pytest.mark.parametrize("name", ["tv", "lecam", "js"])
def test_ratio_overflow_uses_conjugate_limit(name):
    f = parse_spec(name)
    got = divergence(f, [0.0, 1.0], [1.0, 5e-324])
    assert got == pytest.approx(f.value_at_zero + f.conjugate_at_zero, rel=1e-12)


@pytest.mark.parametrize("name", sorted(ORACLES))
def test_self_divergence_zero(name):
    p = np.array([0.1, 0.0, 0.6, 0.3])
    assert divergence(parse_spec(name), p, p) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(pq=dist_pairs(), alpha=st.floats(-2.0, 3.0))
def test_skew_symmetry_of_power_family(pq, alpha):
    p, q = pq
    a = parse_spec(f"power:{alpha!r}")
    b = parse_spec(f"power:{1 - alpha!r}")
    assert divergence(a, p, q) == pytest.approx(divergence(b, q, p), rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(pq=dist_pairs(), name=st.sampled_from(sorted(ORACLES)))
def test_conjugate_swaps_arguments(pq, name):
    p, q = pq
    f = parse_spec(name)
    fs = parse_spec(f"conj({name})")
    assert divergence(fs, q, p) == pytest.approx(divergence(f, p, q), rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(a=dist_pairs(max_size=4), b=dist_pairs(max_size=4), alpha=st.floats(0, 1),
       name=st.sampled_from(sorted(ORACLES)))
def test_block_mixture_is_linear(a, b, alpha, name):
    f = parse_spec(name)
    P, Q = block_mixture(a[0], a[1], b[0], b[1], alpha)
    want = (1 - alpha) * divergence(f, *a) + alpha * divergence(f, *b)
    assert divergence(f, P, Q) == pytest.approx(want, rel=1e-9, abs=1e-12)
    assert len(P) == a[0].size + b[0].size


def test_block_mixture_rejects_bad_weight():
    with pytest.raises(ValueError):
        block_mixture([1, 0], [0, 1], [1, 0], [0, 1], 1.5)


def test_divergence_pair_and_batch():
    P = np.array([[0.2, 0.8], [0.5, 0.5]])
    Q = np.array([[0.6, 0.4], [0.5, 0.5]])
    np.testing.assert_allclose(divergence_batch(TV, P, Q), [0.8, 0.0])
    pt = divergence_pair(TV, CHI2, P[0], Q[0])
    x, y = pt
    assert (x, y) == (pt.x, pt.y)
    assert y == pytest.approx(ORACLES["chi2"](P[0], Q[0]))


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        divergence(KL, [0.5, 0.5], [1.0, 0.0, 0.0])


@pytest.mark.parametrize("masses", [[], [0.5, 0.6], [1.2, -0.2], [np.nan, 1.0]])
def test_distribution_validation(masses):
    with pytest.raises(ValueError):
        DiscreteDistribution(masses)


def test_distribution_is_read_only():
    d = DiscreteDistribution([0.25, 0.75])
    with pytest.raises(ValueError):
        d.masses[0] = 1.0


def test_triangle_point():
    t = TrianglePoint(0.2, 0.5)
    P, Q = t.distributions()
    np.testing.assert_allclose(P.masses, [0.8, 0.2])
    np.testing.assert_allclose(Q.masses, [0.5, 0.5])
    with pytest.raises(ValueError):
        TrianglePoint(0.6, 0.5)
    r = TrianglePoint.reflected(0.7, 0.2)
    assert (r.p, r.q) == pytest.approx((0.3, 0.8))
    for f in (KL, CHI2, JS):
        assert two_point_pair(f, f, r).x == pytest.approx(divergence(f, [0.3, 0.7], [0.8, 0.2]))


def test_two_point_exact_complements():
    # q within 2**-60 of 1 is not representable as 1 - q, but the complement is
    qc = 2.0**-60
    v = two_point_values(KL, 0.5, 1.0, p_comp=0.5, q_comp=qc)
    want = 0.5 * math.log(0.5 / qc) + 0.5 * math.log(0.5)
    assert v == pytest.approx(want, rel=1e-12)
