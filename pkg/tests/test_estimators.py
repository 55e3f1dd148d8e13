import math

import numpy as np
import pytest

from levygrad.catalog import named_model
from levygrad.densities import GaussianDensity, LowerBoundSpec, UniformBallDensity
from levygrad.errors import DomainError, NumericalError
from levygrad.estimators import (
    decomposition_check,
    derivative_formula,
    estimate_Pt,
    estimate_Pt1,
    finite_difference,
    random_shift_check,
)
from levygrad.functions import TestFunction, path_functional

from conftest import Z_UNIT
from levygrad.levy_model import CompoundPoissonJumps, LevyModel

SIN = TestFunction("sin")
COS = TestFunction("cos")
ONE = TestFunction("constant", c=1.0)

# E[cos L_1] for compound Poisson with rate 1 and N(0,1) jumps
CP_COS = math.exp(math.exp(-0.5) - 1.0)


def test_constant_and_odd_functions(stream):
    model = named_model("gaussian")
    est = estimate_Pt(model, ONE, [0.4], 1.0, 1000, stream(40))
    assert est.value == 1.0 and est.stderr == 0.0
    # the law of Y is symmetric, so the sin mean is centred at 0
    est = estimate_Pt(model, SIN, [0.0], 1.0, 50_000, stream(41))
    assert abs(est.value) < Z_UNIT * est.stderr


def test_cauchy_cos(stream):
    est = estimate_Pt(named_model("cauchy"), COS, [0.0], 1.0, 100_000, stream(42))
    assert abs(est.z_score(math.exp(-1.0))) < Z_UNIT


def test_Pt1_of_one(stream):
    model = named_model("gaussian-floor")
    est = estimate_Pt1(model, ONE, [0.0], 1.0, 100_000, stream(43))
    assert abs(est.z_score(1 - math.exp(-1.0))) < Z_UNIT
    assert estimate_Pt1(model, ONE, [0.0], 0.0, 100, stream(43)).value == 0.0


def test_derivative_formula_exact_value(stream):
    est = derivative_formula(named_model("gaussian-floor"), SIN, [0.0], 1.0, 100_000, stream(44))
    target = CP_COS - math.exp(-1.0)
    assert target == pytest.approx(0.30683256, abs=1e-8)
    assert est.stderr[0] < 0.01
    assert abs(est.value[0] - target) <= Z_UNIT * est.stderr[0]


def test_derivative_formula_constant_is_zero_mean(stream):
    est = derivative_formula(named_model("gaussian-floor"), ONE, [0.0], 1.0, 50_000, stream(45))
    assert abs(est.value[0]) <= Z_UNIT * est.stderr[0]


@pytest.mark.parametrize("name", ["gaussian-floor-contract", "gaussian-floor-expand"])
def test_derivative_formula_vs_fd(stream, name):
    model = named_model(name)
    x = [0.3]
    dfm = derivative_formula(model, SIN, x, 1.0, 100_000, stream(46))
    fd = finite_difference(model, SIN, x, 1.0, 100_000, h=1e-3, rng=stream(47), target="P_t^1")
    se = math.hypot(dfm.stderr[0], fd.stderr[0])
    assert abs(dfm.value[0] - fd.value[0]) <= Z_UNIT * se


def test_derivative_formula_2d_vs_fd(stream):
    model = named_model("gaussian-floor-2d")
    f = TestFunction("sin", (1.0, 0.5))
    x = [0.2, -0.1]
    dfm = derivative_formula(model, f, x, 1.0, 100_000, stream(48))
    fd = finite_difference(model, f, x, 1.0, 100_000, rng=stream(49), target="P_t^1")
    se = np.hypot(dfm.stderr, fd.stderr)
    assert np.all(np.abs(dfm.value - fd.value) <= Z_UNIT * se)


def test_fd_on_deterministic_flow():
    model = LevyModel(1, [[-1.0]], [0.0], [[0.0]], ())
    from levygrad.sampling import RngStream

    fd = finite_difference(model, SIN, [0.5], 2.0, 10, h=1e-4, rng=RngStream(0))
    e = math.exp(-2.0)
    assert fd.value[0] == pytest.approx(e * math.cos(0.5 * e), rel=1e-7)
    assert fd.stderr[0] < 1e-12


def test_fd_heat_sign(stream):
    # P_t sign(0 + Y), Y ~ N(0, 2t): d/dx at 0 equals 2 p_Y(0) = 1/sqrt(pi t)
    t = 1.0
    fd = finite_difference(named_model("heat"), TestFunction("sign"), [0.0], t, 100_000, h=0.05, rng=stream(50))
    assert abs(fd.value[0] - 1 / math.sqrt(math.pi * t)) <= Z_UNIT * fd.stderr[0]


def test_weight_norm_bound(stream):
    model = named_model("gaussian-floor-contract")
    rho = model.floor_component.density
    lam = rho.mass
    t = 0.8
    est = derivative_formula(model, SIN, [0.0], t, 50_000, stream(51))
    # theta = 1 > 0 so the exponential factor is 1
    bound = (1 - math.exp(-lam * t)) / lam * rho.grad_norm_integral()
    assert est.extra["weight_norm_mean"] <= bound + Z_UNIT * est.extra["weight_norm_stderr"]


def test_derivative_formula_refuses_nonintegrable(stream):
    # uniform ball density: grad rho is a surface measure, not a function
    rho = UniformBallDensity(1.0, 1.0, 1)
    model = LevyModel(1, [[0.0]], [0.0], [[0.0]], (CompoundPoissonJumps(rho, floor=True),))
    with pytest.raises((NumericalError, DomainError)):
        derivative_formula(model, SIN, [0.0], 1.0, 100, stream(52))


def test_thread_count_does_not_change_results(stream):
    model = named_model("gaussian-floor")
    a = derivative_formula(model, SIN, [0.0], 1.0, 70_000, stream(53), threads=1)
    b = derivative_formula(model, SIN, [0.0], 1.0, 70_000, stream(53), threads=4)
    assert np.array_equal(a.value, b.value) and np.array_equal(a.stderr, b.stderr)


def test_input_validation(stream):
    model = named_model("gaussian-floor")
    with pytest.raises(DomainError):
        estimate_Pt(model, SIN, [0.0, 1.0], 1.0, 100, stream(54))
    with pytest.raises(DomainError):
        estimate_Pt1(named_model("gaussian"), SIN, [0.0], 1.0, 100, stream(54))
    with pytest.raises(DomainError):
        finite_difference(model, SIN, [0.0], 1.0, 100, h=0.0, rng=stream(54))


@pytest.mark.parametrize("lt", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("fname", ["1", "sin", "even"])
def test_random_shift_identity(stream, lt, fname):
    rho = GaussianDensity(lt, 1.0, 1)
    check = random_shift_check(rho, 1.0, path_functional(fname), 100_000,
                               stream(55, int(lt * 4)), k=Z_UNIT)
    assert check.passed, check
    if fname == "1":
        assert abs(check.lhs.value - (1 - math.exp(-lt))) <= Z_UNIT * check.lhs.stderr
        assert abs(check.rhs.value - (1 - math.exp(-lt))) <= Z_UNIT * check.rhs.stderr


def test_random_shift_small_t(stream):
    check = random_shift_check(GaussianDensity(1.0, 1.0, 1), 1e-3, path_functional("sin"), 100_000, stream(56),
                               k=Z_UNIT)
    assert check.passed


def test_decomposition_identity_constant(stream):
    model = named_model("gaussian-floor")
    rho0 = GaussianDensity(1.0, 1.0, 1)
    check = decomposition_check(model, rho0, ONE, [0.0], 0.5, 4000, stream(57), n_in=20, k=Z_UNIT)
    # f = 1: lhs is exactly 1 and the rhs is e^{lt}(1 - P(N >= 1))
    assert check.lhs.value == 1.0
    assert check.passed


def test_decomposition_identity_small_t(stream):
    model = named_model("gaussian-floor-contract")
    check = decomposition_check(model, GaussianDensity(1.0, 1.0, 1), COS, [0.2], 1e-3, 4000, stream(58),
                                n_in=20, k=Z_UNIT)
    assert check.passed


def test_decomposition_from_lower_bound_spec(stream):
    model = named_model("stable15")
    spec = LowerBoundSpec(model.lower_bound.S, 1.0)
    check = decomposition_check(model, spec, COS, [0.0], 0.1, 4000, stream(59), n_in=20, k=Z_UNIT)
    assert check.passed or check.inconclusive
