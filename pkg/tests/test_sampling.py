import math

import numpy as np
import pytest

from levygrad.bernstein import Log, LogPower, Power, ScaledSum, bernstein_power, eval_S
from levygrad.catalog import named_model
from levygrad.densities import FloorDensity, GaussianDensity, LowerBoundSpec, UniformBallDensity
from levygrad.errors import DomainError, UnsupportedError
from levygrad.levy_model import LevyModel
from conftest import Z_UNIT
from levygrad.sampling import (
    RngStream,
    as_generator,
    integrate_ou,
    sample_compound_poisson,
    sample_ou_noise,
    sample_poisson_batch,
    sample_subordinated_bm,
    sample_subordinator,
)

SAMPLABLE = [Power(0.25), Power(0.5), Power(0.75), Power(1.0), Log(),
             ScaledSum(((2.0, Power(0.5)), (0.5, Log())))]


def test_streams_are_reproducible_and_distinct(stream):
    a = stream(1).generator().random(5)
    b = stream(1).generator().random(5)
    c = stream(2).generator().random(5)
    d = stream(1, 0).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)
    assert stream(1).child(0) == stream(1, 0)


def test_stream_validation():
    with pytest.raises(DomainError):
        RngStream(-1)
    with pytest.raises(TypeError):
        as_generator(7)


def test_poisson_counts_moments(stream):
    rho = GaussianDensity(1.0, 1.0, 1)
    batch = sample_poisson_batch(rho, 1.0, 100_000, stream(10).generator())
    n = batch.n
    se = math.sqrt(1.0 / n)
    assert abs(batch.counts.mean() - 1.0) < Z_UNIT * se
    # var of the sample variance of Poisson(1) is about (mu4 - 1)/n = 3/n
    assert abs(batch.counts.var(ddof=1) - 1.0) < Z_UNIT * math.sqrt(3.0 / n)


def test_poisson_times_sorted_and_in_range(stream):
    batch = sample_poisson_batch(GaussianDensity(3.0, 1.0, 1), 2.0, 500, stream(11).generator())
    assert np.all((batch.times >= 0.0) & (batch.times <= 2.0))
    for k in range(20):
        p = batch.path(k)
        assert np.all(np.diff(p.times) >= 0.0)
        assert p.count == batch.counts[k]
    assert np.allclose(batch.endpoint(), batch.per_path_sum(batch.sizes))


def test_empty_path_value_is_zero(stream):
    path = sample_compound_poisson(GaussianDensity(1e-9, 1.0, 1), 1.0, stream(12))
    assert path.count == 0
    assert np.all(path.value() == 0.0)
    with pytest.raises(DomainError):
        sample_compound_poisson(GaussianDensity(1.0, 1.0, 1), -1.0, stream(12))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_gaussian_jump_second_moment(stream, d):
    xi = GaussianDensity(1.0, 1.0, d).sample(100_000, stream(13, d).generator())
    sq = (xi ** 2).sum(axis=1)
    assert abs(sq.mean() - d) < Z_UNIT * sq.std() / math.sqrt(len(sq))


@pytest.mark.parametrize("rho", [
    FloorDensity(LowerBoundSpec(Power(0.5), 1.0), 1),
    FloorDensity(LowerBoundSpec(Power(0.75), 1.0), 2),
    UniformBallDensity(2.0, 1.5, 1),
    GaussianDensity(1.0, 2.0, 2),
], ids=lambda r: type(r).__name__)
def test_radial_ks(stream, rho):
    n = 10_000
    r = rho.sample_radii(n, stream(14).generator())
    grid = np.sort(r)
    emp = np.arange(1, n + 1) / n
    model_cdf = np.asarray(rho.radial_cdf(grid), dtype=float)
    ks = max(np.max(np.abs(emp - model_cdf)), np.max(np.abs(emp - 1.0 / n - model_cdf)))
    assert ks < 1.63 / math.sqrt(n)


@pytest.mark.parametrize("S", SAMPLABLE, ids=lambda s: s.kind)
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_subordinator_laplace(stream, S, lam):
    n = 100_000
    s = sample_subordinator(S, 1.0, stream(20, SAMPLABLE.index(S)), size=n)
    v = np.exp(-lam * s)
    target = math.exp(-eval_S(S, lam))
    se = v.std(ddof=1) / math.sqrt(n)
    assert abs(v.mean() - target) <= Z_UNIT * se + 1e-15


def test_subordinator_special_cases(stream):
    assert np.all(sample_subordinator(Power(1.0), 0.7, stream(21), size=10) == 0.7)
    g = sample_subordinator(Log(), 2.0, stream(22), size=100_000)
    # gamma(2, 1): E e^{-s} = (1 + 1)^{-2}
    v = np.exp(-g)
    assert abs(v.mean() - 0.25) < Z_UNIT * v.std() / math.sqrt(len(v))
    assert np.all(sample_subordinator(Power(0.5), 0.0, stream(23), size=5) == 0.0)
    with pytest.raises(DomainError):
        sample_subordinator(Power(0.5), -1.0, stream(23))


@pytest.mark.parametrize("S", [LogPower(1.0), bernstein_power(Log(), 2.0)], ids=lambda s: s.kind)
def test_no_sampler_is_refused(stream, S):
    with pytest.raises(UnsupportedError):
        sample_subordinator(S, 1.0, stream(24), size=10)


def test_subordinated_bm_heat(stream):
    n = 100_000
    x = sample_subordinated_bm(Power(1.0), 1.0, 1, stream(25), size=n)[:, 0]
    assert abs(x.var(ddof=1) - 2.0) < Z_UNIT * math.sqrt(2 * 4.0 / n)
    c = np.cos(x)
    assert abs(c.mean() - math.exp(-1.0)) < Z_UNIT * c.std() / math.sqrt(n)
    tiny = sample_subordinated_bm(Power(1.0), 1e-8, 1, stream(26), size=100)
    assert np.max(np.abs(tiny)) < 1e-3


def test_subordinated_bm_stable_cf(stream):
    # S = r^{3/4}: E cos(X_1) = e^{-S(1)} = e^{-1}
    n = 100_000
    x = sample_subordinated_bm(Power(0.75), 1.0, 1, stream(27), size=n)[:, 0]
    c = np.cos(x)
    assert abs(c.mean() - math.exp(-1.0)) < Z_UNIT * c.std() / math.sqrt(n)


@pytest.mark.parametrize("name", ["gaussian-ou", "stable15-ou", "gaussian-floor-contract", "power-floor"])
def test_ou_noise_matches_cf(stream, name):
    from levygrad.levy_model import log_cf_1d

    model = named_model(name)
    t, n = 0.7, 100_000
    Y = sample_ou_noise(model, t, n, stream(28).generator()).Y[:, 0]
    for z in (0.5, 1.3):
        c = np.cos(z * Y)
        target = float(np.real(np.exp(log_cf_1d(model, t, np.array([z]))))[0])
        assert abs(c.mean() - target) < Z_UNIT * c.std() / math.sqrt(n)


def test_reproducible_endpoint(stream):
    model = named_model("gaussian-floor-contract")
    a = integrate_ou(model, [0.3], 1.0, stream(29))
    b = integrate_ou(model, [0.3], 1.0, stream(29))
    assert np.array_equal(a.X, b.X)
    with pytest.raises(DomainError):
        integrate_ou(model, [0.3], 0.0, stream(29))


def test_deterministic_flow():
    model = LevyModel(1, [[-1.0]], [0.0], [[0.0]], ())
    X = integrate_ou(model, [2.0], 1.5, RngStream(1)).X
    assert X[0] == pytest.approx(2.0 * math.exp(-1.5), rel=1e-14)
    drift = LevyModel(1, [[0.0]], [0.5], [[0.0]], ())
    assert integrate_ou(drift, [1.0], 2.0, RngStream(1)).X[0] == pytest.approx(2.0)


def test_pathwise_contraction(stream):
    model = named_model("gaussian-floor-2d")
    t, n = 0.8, 1000
    gen = stream(30).generator()
    x = gen.normal(size=(n, 2)) * 3
    y = gen.normal(size=(n, 2)) * 3
    noise = sample_ou_noise(model, t, n, stream(31).generator()).Y
    e = math.exp(-t)
    Xx = x * e + noise
    Xy = y * e + noise
    lhs = np.linalg.norm(Xx - Xy, axis=1)
    rhs = e * np.linalg.norm(x - y, axis=1)
    assert np.all(lhs <= rhs * (1 + 1e-12))
