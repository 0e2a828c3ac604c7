import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divrange import (
    TrianglePoint,
    achieve,
    divergence_pair,
    jacobian_det,
    limit_ratios,
    parse_spec,
    ratio_bound_exists,
    singular_locus,
    verify_membership,
)
from divrange.analysis import AchieveError, thread_count, unboundedness_witness
from divrange.divergence import divergence_batch

interior = st.tuples(st.floats(0.02, 0.96), st.floats(0.02, 0.96)).filter(
    lambda t: t[1] - t[0] > 0.02
)


def test_jacobian_power_pair_closed_form():
    f, g = parse_spec("chi2"), parse_spec("power:3")
    p, q = 0.01, 0.5
    want = -(1 / 12) * ((p - q) / (q * (1 - q))) ** 4
    assert jacobian_det(f, g, TrianglePoint(p, q)) == pytest.approx(want, rel=1e-12)
    assert jacobian_det(f, g, TrianglePoint(p, q), method="fd") == pytest.approx(want, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(interior, st.sampled_from(["power:-1", "rkl", "hellinger", "kl", "power:3"]))
def test_difference_and_closed_jacobian_agree(t, g_spec):
    f, g = parse_spec("chi2"), parse_spec(g_spec)
    pt = TrianglePoint(*t)
    closed = jacobian_det(f, g, pt, method="closed")
    fd = jacobian_det(f, g, pt, method="fd")
    assert fd == pytest.approx(closed, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("p", [0.05, 0.2, 0.45])
def test_jacobian_vanishes_on_tv_chi2_locus(p):
    f, g = parse_spec("tv"), parse_spec("chi2")
    assert abs(jacobian_det(f, g, TrianglePoint(p, 0.5))) < 1e-6
    assert abs(jacobian_det(f, g, TrianglePoint(p, 0.5), method="fd")) < 1e-6


@settings(max_examples=30, deadline=None)
@given(interior, st.sampled_from(["kl", "js", "lecam", "tv"]))
def test_jacobian_of_identical_rows_is_zero(t, name):
    f = parse_spec(name)
    assert jacobian_det(f, f, TrianglePoint(*t)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p,q", [(0.0, 0.5), (0.3, 0.3), (0.2, 1.0)])
def test_jacobian_rejects_boundary(p, q):
    with pytest.raises(ValueError):
        jacobian_det(parse_spec("kl"), parse_spec("rkl"), TrianglePoint(p, q))


def test_jacobian_rejects_bad_step():
    with pytest.raises(ValueError):
        jacobian_det(parse_spec("kl"), parse_spec("rkl"), TrianglePoint(0.2, 0.4), h=0)


def test_singular_locus_fixtures():
    tv = parse_spec("tv")
    loc = singular_locus(tv, parse_spec("chi2"))
    assert len(loc) > 10
    assert np.max(np.abs(loc.q - 0.5)) < 1e-8
    loc = singular_locus(tv, parse_spec("lecam"))
    assert len(loc) > 10
    assert np.max(np.abs(loc.p + loc.q - 1)) < 1e-8
    assert len(set(loc.component.tolist())) >= 1
    assert len(singular_locus(parse_spec("chi2"), parse_spec("power:3"))) == 0


def test_singular_locus_points_are_triangle_points():
    loc = singular_locus(parse_spec("tv"), parse_spec("js"), n=32)
    pts = loc.points
    assert all(isinstance(t, TrianglePoint) for t in pts)
    assert len(pts) == len(loc)


def test_limit_ratios_kl_rkl():
    lim = limit_ratios(parse_spec("kl"), parse_spec("rkl"))
    assert math.isinf(lim.beta0_at_zero) and math.isinf(lim.gamma0_at_zero)
    assert lim.beta0_at_inf == 0.0
    assert (lim.f_zero_infinite, lim.f_conj_infinite) == (False, True)
    assert (lim.g_zero_infinite, lim.g_conj_infinite) == (True, False)


def test_limit_ratios_power_pair_at_infinity():
    lim = limit_ratios(parse_spec("chi2"), parse_spec("power:3"))
    assert math.isinf(lim.beta0_at_inf)
    assert lim.beta0_at_zero == pytest.approx(lim.gamma0_at_zero)
    assert lim.beta0_at_zero > 0


@pytest.mark.parametrize("name", ["kl", "tv", "js", "lecam", "power:-2"])
def test_limit_ratios_identical(name):
    f = parse_spec(name)
    lim = limit_ratios(f, f)
    for v in (lim.beta0_at_zero, lim.gamma0_at_zero, lim.beta0_at_inf, lim.gamma0_at_inf):
        assert v == pytest.approx(1.0)


@pytest.mark.parametrize("f,g", [("tv", "chi2"), ("js", "kl"), ("hellinger", "lecam"),
                                 ("power:-1", "power:3")])
def test_limit_ratio_ordering(f, g):
    lim = limit_ratios(parse_spec(f), parse_spec(g))
    assert lim.beta0_at_zero <= lim.gamma0_at_zero
    assert lim.beta0_at_inf <= lim.gamma0_at_inf


def test_ratio_bound_cases():
    beta = ratio_bound_exists(parse_spec("chi2"), parse_spec("power:3"))
    assert beta is not None and beta > 0
    assert ratio_bound_exists(parse_spec("kl"), parse_spec("rkl")) is None
    assert ratio_bound_exists(parse_spec("rkl"), parse_spec("kl")) is None
    assert ratio_bound_exists(parse_spec("js"), parse_spec("js")) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ratio_bound_exists(parse_spec("tv"), parse_spec("chi2"))


@pytest.mark.parametrize("f,g", [("chi2", "power:3"), ("js", "lecam"), ("hellinger", "js"),
                                 ("lecam", "hellinger")])
def test_ratio_bound_holds_on_random_pairs(f, g):
    f, g = parse_spec(f), parse_spec(g)
    beta = ratio_bound_exists(f, g)
    assert beta is not None
    rng = np.random.default_rng(11)
    for d in (2, 3, 6):
        P = rng.dirichlet(np.ones(d) * 0.3, 2000)
        Q = rng.dirichlet(np.ones(d) * 0.3, 2000)
        x, y = divergence_batch(f, P, Q), divergence_batch(g, P, Q)
        ok = np.isfinite(x) & np.isfinite(y)
        assert np.all(y[ok] >= beta * x[ok] - 1e-12)


@pytest.mark.parametrize("gamma", [10, 100])
@pytest.mark.parametrize("f,g", [("kl", "rkl"), ("rkl", "kl")])
def test_unboundedness_witness(f, g, gamma):
    f, g = parse_spec(f), parse_spec(g)
    P, Q, x, y, excess = unboundedness_witness(f, g, gamma)
    assert excess > 1
    pt = divergence_pair(f, g, P, Q)
    assert pt.y - gamma * pt.x == pytest.approx(excess, rel=1e-9)


def test_achieve_origin():
    f, g = parse_spec("tv"), parse_spec("chi2")
    mp = achieve(f, g, (0.0, 0.0))
    assert mp.residual <= 1e-6
    assert mp.t1.p == pytest.approx(mp.t1.q)
    assert len(mp.P) == 4 and len(mp.Q) == 4


def test_achieve_boundary_point(region):
    f, g = parse_spec("tv"), parse_spec("chi2")
    mp = achieve(f, g, (1.0, 0.5), region=region("tv", "chi2"))
    assert mp.residual <= 1e-6
    # the minimiser of chi2 at V = 1 is p = 0, q = 1/2 (or its reflection)
    t = mp.t1 if mp.alpha >= 0.5 else mp.t2
    assert min(t.p, 1 - t.q) == pytest.approx(0.0, abs=1e-4)
    assert t.q - t.p == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("target", [(1.25, 1.0), (0.3, 2.0), (1.8, 12.0)])
def test_achieve_round_trip(region, target):
    f, g = parse_spec("tv"), parse_spec("chi2")
    mp = achieve(f, g, target, region=region("tv", "chi2"))
    pt = divergence_pair(f, g, mp.P, mp.Q)
    assert math.hypot(pt.x - target[0], pt.y - target[1]) <= 1e-6
    assert 0.0 <= mp.alpha <= 1.0
    assert mp.residual <= 1e-6


def test_achieve_errors(region):
    f, g = parse_spec("tv"), parse_spec("chi2")
    with pytest.raises(AchieveError):
        achieve(f, g, (1.5, 1.25), region=region("tv", "chi2"))
    with pytest.raises(ValueError):
        achieve(f, g, (math.inf, 1.0), region=region("tv", "chi2"))


def test_verify_report_shape_and_determinism(region, monkeypatch):
    f, g = parse_spec("tv"), parse_spec("js")
    r = region("tv", "js")
    monkeypatch.setenv("DIVRANGE_THREADS", "1")
    a = verify_membership(f, g, 4, 20000, 5, region=r)
    monkeypatch.setenv("DIVRANGE_THREADS", "4")
    b = verify_membership(f, g, 4, 20000, 5, region=r)
    assert a == b
    assert a.inside + a.outside + a.unknown + a.infinite == 20000
    assert a.outside == 0
    c = verify_membership(f, g, 4, 20000, 6, region=r)
    assert c.worst_margin != a.worst_margin


@pytest.mark.parametrize("f,g", [("tv", "js"), ("kl", "rkl"), ("tv", "chi2"), ("hellinger", "lecam")])
def test_verify_two_atoms_all_achievable(region, f, g):
    rep = verify_membership(parse_spec(f), parse_spec(g), 2, 20000, 1, region=region(f, g))
    assert rep.outside == 0


def test_verify_rejects_dimension_one():
    with pytest.raises(ValueError):
        verify_membership(parse_spec("tv"), parse_spec("js"), 1, 10, 0)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("DIVRANGE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("DIVRANGE_THREADS", "0")
    assert thread_count() >= 1
    monkeypatch.setenv("DIVRANGE_THREADS", "-1")
    with pytest.raises(ValueError):
        thread_count()
