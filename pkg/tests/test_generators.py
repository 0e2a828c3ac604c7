import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divrange.generators import (
    CATALOG,
    GeneratorSpecError,
    conjugate,
    make_power,
    parse_spec,
)

ts = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)
alphas = st.floats(min_value=-3.0, max_value=4.0, allow_nan=False)
T = np.logspace(-6, 6, 401)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_normalised_and_convex(name):
    f = parse_spec(name)
    assert f(1.0) == pytest.approx(0.0, abs=1e-15)
    a, b = T[:-2], T[2:]
    mid = np.sqrt(a * b)  # any interior point works; check the chord inequality
    lam = (b - mid) / (b - a)
    chord = lam * f(a) + (1 - lam) * f(b)
    assert np.all(f(mid) <= chord + 1e-9 * (1 + np.abs(chord)))


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_boundary_limits_match_values(name):
    f = parse_spec(name)
    small, big = 1e-12, 1e12
    if math.isinf(f.value_at_zero):
        assert f(small) > 10
    else:
        assert f(small) == pytest.approx(f.value_at_zero, rel=1e-4, abs=1e-4)
    if math.isinf(f.conjugate_at_zero):
        assert f(big) / big > 10
    else:
        assert f(big) / big == pytest.approx(f.conjugate_at_zero, rel=1e-4, abs=1e-4)
    assert f(0.0) == f.value_at_zero


def test_aliases_match_power_family():
    for name, alpha in [("kl", 1), ("rkl", 0), ("hellinger", 0.5), ("chi2", 2)]:
        np.testing.assert_allclose(parse_spec(name)(T), make_power(alpha)(T), rtol=1e-12, atol=1e-15)


def test_power_closed_forms():
    np.testing.assert_allclose(make_power(2)(T), (T - 1) ** 2 / 2, rtol=1e-12)
    np.testing.assert_allclose(make_power(1)(T), T * np.log(T) - T + 1, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(make_power(0)(T), -np.log(T) + T - 1, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(make_power(0.5)(T), 2 * (np.sqrt(T) - 1) ** 2, rtol=1e-9, atol=1e-15)


def test_power_limits():
    assert make_power(2).value_at_zero == 0.5
    assert math.isinf(make_power(2).conjugate_at_zero)
    assert make_power(-1).conjugate_at_zero == 0.5
    assert math.isinf(make_power(-1).value_at_zero)
    assert math.isinf(make_power(1).conjugate_at_zero)
    assert make_power(1).value_at_zero == 1.0


@given(alphas, ts)
def test_power_conjugate_is_reflected_order(alpha, t):
    lhs = conjugate(make_power(alpha))(t)
    rhs = make_power(1 - alpha)(t)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@given(st.sampled_from(sorted(CATALOG)), ts)
def test_conjugation_is_an_involution(name, t):
    f = parse_spec(name)
    ff = parse_spec(f"conj(conj({name}))")
    assert ff(t) == pytest.approx(f(t), rel=1e-10, abs=1e-12)
    assert ff.value_at_zero == f.value_at_zero
    assert ff.conjugate_at_zero == f.conjugate_at_zero


@pytest.mark.parametrize("spec", ["tv", "lecam", "js", "kl", "chi2", "power:-0.5", "conj(js)"])
def test_closed_derivatives_match_differences(spec):
    f = parse_spec(spec)
    t = np.logspace(-2, 2, 41)
    t = t[np.abs(t - 1) > 1e-2]  # tv has a kink at 1
    if spec == "tv":
        t = t[np.abs(t - 1) > 0.1]
    h = 1e-5 * t
    d1 = f.derivative(t, 1)
    fd1 = (f(t + h) - f(t - h)) / (2 * h)
    np.testing.assert_allclose(d1, fd1, rtol=1e-6, atol=1e-8)
    d2 = f.derivative(t, 2)
    if d2 is not None:
        h = 1e-4 * t
        fd2 = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
        noise = 1e-14 * (1 + np.abs(f(t))) / h**2
        assert np.all(np.abs(d2 - fd2) <= 1e-4 * np.abs(d2) + noise)


def test_eval_scalar_and_array_shapes():
    f = parse_spec("kl")
    assert isinstance(f(2.0), float)
    assert f(np.ones((3, 2))).shape == (3, 2)
    assert f(np.inf) == math.inf


def test_overflow_saturates_to_inf():
    f = make_power(3)
    assert f(1e300) == math.inf
    assert not np.isnan(make_power(-2)(np.array([1e-300, 1e300]))).any()


@pytest.mark.parametrize("spec,name", [
    ("chi2", "chi2"),
    ("power:2", "power:2"),
    ("power:-1.5e0", "power:-1.5"),
    ("conj(kl)", "conj(kl)"),
    ("conj(conj(power:.5))", "conj(conj(power:0.5))"),
])
def test_parse_names(spec, name):
    assert parse_spec(spec).name == name


@pytest.mark.parametrize("spec,offset", [
    ("bogus", 0),
    ("", 0),
    ("power:", 6),
    ("power:abc", 6),
    ("power:nan", 6),
    ("conj(kl", 7),
    ("conj(kl))", 8),
    ("kl extra", 2),
    ("conj(zz)", 5),
])
def test_parse_errors_report_offset(spec, offset):
    with pytest.raises(GeneratorSpecError) as err:
        parse_spec(spec)
    assert err.value.offset == offset
    assert isinstance(err.value, ValueError)


@settings(max_examples=50)
@given(st.text(max_size=12))
def test_parse_never_crashes_unexpectedly(text):
    try:
        parse_spec(text)
    except GeneratorSpecError:
        pass
