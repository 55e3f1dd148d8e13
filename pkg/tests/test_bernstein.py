import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levygrad.bernstein import (
    Divergent,
    Log,
    LogPower,
    Power,
    ScaledSum,
    alpha_power_closed_form,
    bernstein_power,
    eval_alpha,
    eval_log_alpha,
    eval_S,
    eval_S_prime,
    from_config,
    is_divergent,
)
from levygrad.errors import ConfigError, DomainError

CATALOG = [
    Power(0.25), Power(0.5), Power(0.75), Power(1.0), Log(), LogPower(0.5), LogPower(1.0),
    ScaledSum(((2.0, Power(0.5)), (0.5, Log()))), bernstein_power(Log(), 2.0),
]


def test_eval_S_examples():
    assert eval_S(Power(0.5), 4.0) == pytest.approx(2.0, rel=1e-15)
    assert eval_S(Log(), 0.0) == 0.0
    assert eval_S(Power(0.75), 16.0) == pytest.approx(8.0, rel=1e-14)


def test_eval_S_prime_examples():
    assert eval_S_prime(Power(0.5), 4.0) == pytest.approx(0.25)
    assert eval_S_prime(Power(1.0), 7.0) == pytest.approx(1.0)
    assert eval_S_prime(Log(), 1.0) == pytest.approx(0.5)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_S(Power(0.5), -1.0)
    with pytest.raises(DomainError):
        eval_S_prime(Log(), 0.0)
    with pytest.raises(DomainError):
        eval_alpha(Power(0.5), 0.0)
    with pytest.raises(DomainError):
        bernstein_power(Log(), 1.0)
    with pytest.raises(DomainError):
        Power(1.5)


@pytest.mark.parametrize("S", CATALOG, ids=lambda s: s.kind)
def test_catalog_shape(S):
    r = np.geomspace(1e-6, 1e6, 400)
    v = eval_S(S, r)
    assert eval_S(S, 0.0) == 0.0
    assert np.all(v >= 0.0)
    assert np.all(np.diff(v) >= -1e-9 * np.abs(v[1:]))
    d = eval_S_prime(S, r)
    assert np.all(d >= 0.0)
    assert np.all(np.diff(d) <= 1e-9 * np.abs(d[:-1]))


@pytest.mark.parametrize("S", CATALOG, ids=lambda s: s.kind)
def test_derivative_matches_difference_quotient(S):
    r = np.geomspace(1e-3, 1e3, 25)
    h = 1e-6 * r
    fd = (eval_S(S, r + h) - eval_S(S, r - h)) / (2 * h)
    assert np.allclose(eval_S_prime(S, r), fd, rtol=1e-6)


def test_alpha_examples():
    assert eval_alpha(Power(0.5), 2.0) == pytest.approx(1.0, rel=1e-10)
    assert eval_alpha(Power(1.0), 1.0) == pytest.approx(1.7724539, rel=1e-7)
    # (4/3) Gamma(2/3) = 1.80549059
    assert eval_alpha(Power(0.75), 1.0) == pytest.approx(4 / 3 * math.gamma(2 / 3), rel=1e-10)


@pytest.mark.parametrize("beta", [0.5, 0.75, 1.0])
def test_alpha_power_scaling(beta):
    vals = [eval_alpha(Power(beta), t) * t ** (1 / (2 * beta)) for t in (0.1, 1.0, 10.0)]
    assert np.ptp(vals) <= 1e-6 * vals[0]
    assert vals[0] == pytest.approx(alpha_power_closed_form(beta, 1.0), rel=1e-8)


def test_alpha_divergent_for_log():
    out = eval_alpha(Log(), 1.0)
    assert isinstance(out, Divergent) and is_divergent(out)
    assert not out


def test_alpha_log_power_matches_log_route():
    # moderate t: both routes are accurate
    for t in (0.05, 0.01):
        a = eval_alpha(LogPower(1.0), t)
        assert math.log(a) == pytest.approx(eval_log_alpha(LogPower(1.0), t), rel=1e-9)


def test_log_alpha_asymptotics():
    # for eps=1: alpha(t) = 2 int exp(w - t (log(1+e^w))^2) dw ~ 2 sqrt(pi/t) e^{1/(4t)}
    for t in (1e-3, 1e-4):
        approx = 1 / (4 * t) + 0.5 * math.log(math.pi / t) + math.log(2.0)
        assert eval_log_alpha(LogPower(1.0), t) == pytest.approx(approx, abs=1e-3)


def test_huge_alpha_not_silently_truncated():
    t = 4.8e-4
    out = eval_alpha(LogPower(1.0), t)
    assert isinstance(out, float)
    assert math.log(out) == pytest.approx(eval_log_alpha(LogPower(1.0), t), rel=1e-9)
    assert isinstance(eval_alpha(LogPower(1.0), 1e-4), Divergent)  # overflows a double


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(1.01, 3.0))
def test_alpha_monotone(t, factor):
    S = Power(0.75)
    assert eval_alpha(S, t) >= eval_alpha(S, t * factor)


def test_power_composition():
    for beta in (0.5, 0.75):
        comp = bernstein_power(Power(beta), 2.0)
        r = np.array([1.0, 4.0, 9.0])
        assert np.allclose(eval_S(comp, r), r**beta, rtol=1e-14)
    r = np.geomspace(1e-4, 1e4, 200)
    comp = bernstein_power(Log(), 2.0)
    assert np.max(np.abs(eval_S(comp, r) / eval_S(LogPower(1.0), r) - 1)) < 1e-12
    assert eval_S(comp, 0.0) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(1.05, 4.0))
def test_composition_of_power_stays_power(r, delta):
    comp = bernstein_power(Power(0.5), delta)
    assert eval_S(comp, r) == pytest.approx(r**0.5, rel=1e-12)


def test_config_roundtrip():
    for S in CATALOG:
        assert eval_S(from_config(S.to_config()), 3.7) == pytest.approx(eval_S(S, 3.7), rel=1e-15)
    with pytest.raises(ConfigError):
        from_config({"kind": "nope"})
    with pytest.raises(ConfigError):
        from_config({"kind": "power"})
