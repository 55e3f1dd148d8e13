"""Right-hand sides of the gradient bounds, their comparison with empirical gradients, and rate fits.

Bounds with an unknown absolute constant are reported as a shape: the
constant is a free multiplier recorded in ``constants`` and never given a value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bernstein import BernsteinFunction, eval_alpha, eval_log_alpha, eval_S, is_divergent, label
from .densities import JumpDensity, LowerBoundSpec
from .errors import DomainError
from .levy_model import constants_c0_lambda0, grad_density_integral
from .quadrature import DEFAULT_QUAD, QuadratureConfig, gauss_legendre


@dataclass
class BoundReport:
    """A bound evaluated on a time grid, optionally paired with empirical gradients.

    ``rhs`` may overflow for fast-growing ``alpha``; ``log_rhs`` stays finite in
    that case. ``divergent[i]`` marks grid points where the bound is infinite.
    """

    bound_id: str
    t: np.ndarray
    rhs: np.ndarray
    log_rhs: np.ndarray
    constants: dict
    divergent: np.ndarray
    terms: dict = field(default_factory=dict)
    empirical: np.ndarray | None = None
    stderr: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def ratio(self):
        if self.empirical is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.divergent, np.nan, self.empirical / self.rhs)

    @property
    def finite(self) -> bool:
        return not bool(np.any(self.divergent))

    def attach_empirical(self, values, stderr=None) -> "BoundReport":
        values = np.asarray(values, dtype=float)
        if values.shape != self.t.shape:
            raise DomainError("empirical series must match the time grid")
        self.empirical = values
        self.stderr = np.zeros_like(values) if stderr is None else np.asarray(stderr, dtype=float)
        return self

    def rows(self):
        ratio = self.ratio
        for i, t in enumerate(self.t):
            emp = np.nan if self.empirical is None else self.empirical[i]
            se = np.nan if self.stderr is None else self.stderr[i]
            rt = np.nan if ratio is None else ratio[i]
            yield float(t), float(self.rhs[i]), float(emp), float(se), float(rt)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "rhs", "empirical", "stderr", "ratio"])
        for row in self.rows():
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "bound": self.bound_id,
            "constants": {k: _jsonable(v) for k, v in self.constants.items()},
            "t": [float(v) for v in self.t],
            "rhs": [_jsonable(float(v)) for v in self.rhs],
            "log_rhs": [_jsonable(float(v)) for v in self.log_rhs],
            "divergent": [bool(v) for v in self.divergent],
            "terms": {k: [_jsonable(float(x)) for x in v] for k, v in self.terms.items()},
            "empirical": None if self.empirical is None else [_jsonable(float(v)) for v in self.empirical],
            "stderr": None if self.stderr is None else [_jsonable(float(v)) for v in self.stderr],
            "ratio": None if self.ratio is None else [_jsonable(float(v)) for v in self.ratio],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else ("inf" if math.isinf(v) else f"{v:.10g}")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _grid(ts):
    t = np.atleast_1d(np.asarray(ts, dtype=float))
    if t.size == 0 or np.any(~(t > 0.0)):
        raise DomainError("time grid must be nonempty and positive")
    return t


def log_alpha(S: BernsteinFunction, t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``log alpha(t)``, or ``inf`` when the integral diverges."""
    val = eval_alpha(S, t, quad)
    if not is_divergent(val) and val > 0.0:
        return math.log(val)
    out = eval_log_alpha(S, t, quad)
    return math.inf if is_divergent(out) else float(out)


def _spec_constants(spec: LowerBoundSpec, A_norm: float, d: int, quad: QuadratureConfig):
    c0, lam0 = constants_c0_lambda0(spec, A_norm, d, quad)
    tail = float(eval_S(spec.S, spec.r0 ** -2.0)) / spec.r0 if spec.finite else 0.0
    return c0, lam0, tail


def bound_G(spec: LowerBoundSpec, theta: float, A_norm: float, d: int, ts,
            quad: QuadratureConfig = DEFAULT_QUAD) -> BoundReport:
    """Shape ``e^{lambda0 (t^1) - theta+ t} [alpha(c0 (t^1)) + (t^1) S(r0^-2)/r0]``; the overall constant is free."""
    t = _grid(ts)
    c0, lam0, tail = _spec_constants(spec, A_norm, d, quad)
    tp = max(theta, 0.0)
    log_a = np.array([log_alpha(spec.S, c0 * min(s, 1.0), quad) for s in t])
    second = np.minimum(t, 1.0) * tail
    log_pre = lam0 * np.minimum(t, 1.0) - tp * t
    with np.errstate(over="ignore"):
        bracket_log = np.logaddexp(log_a, np.log(second) if tail > 0.0 else -np.inf)
    log_rhs = log_pre + bracket_log
    div = ~np.isfinite(log_a)
    with np.errstate(over="ignore"):
        rhs = np.exp(log_rhs)
        first = np.exp(log_a)
    consts = {"c0": c0, "lambda0": lam0, "theta": theta, "A_norm": A_norm, "r0": spec.r0,
              "S": label(spec.S), "d": d, "c1": "free multiplier on the whole right-hand side"}
    return BoundReport("G", t, rhs, log_rhs, consts, div,
                       terms={"alpha_term": first, "tail_term": second, "prefactor": np.exp(log_pre)})


def bound_G2(spec: LowerBoundSpec, d: int, ts, quad: QuadratureConfig = DEFAULT_QUAD) -> BoundReport:
    """``e^{lambda0 t}[alpha(c0 t)/sqrt(2 pi) + c1 (1 - e^{-t lambda0}) S(r0^-2)/(r0 lambda0)]`` for ``A = 0``.

    ``rhs`` is reported with ``c1 = 1``; ``terms["c1_coefficient"]`` is the
    factor that multiplies the free ``c1``. With ``r0 = inf`` that factor is 0.
    """
    t = _grid(ts)
    c0, lam0, tail = _spec_constants(spec, 0.0, d, quad)
    log_a = np.array([log_alpha(spec.S, c0 * s, quad) for s in t])
    if tail > 0.0:
        frac = -np.expm1(-t * lam0) / lam0 if lam0 > 0.0 else t
        second = frac * tail
    else:
        second = np.zeros_like(t)
    with np.errstate(over="ignore", divide="ignore"):
        log_first = log_a - 0.5 * math.log(2.0 * math.pi)
        log_rhs = lam0 * t + np.logaddexp(log_first, np.log(second))
        rhs = np.exp(log_rhs)
        pre = np.exp(lam0 * t)
        first = np.exp(log_first)
    consts = {"c0": c0, "lambda0": lam0, "theta": 0.0, "A_norm": 0.0, "r0": spec.r0, "S": label(spec.S), "d": d,
              "c1": "free multiplier on the second term, reported as 1"}
    return BoundReport("G2", t, rhs, log_rhs, consts, ~np.isfinite(log_a),
                       terms={"alpha_term": pre * first, "c1_coefficient": pre * second})


def bound_thm31(rho0: JumpDensity | float, theta: float, lambda0: float, t: float,
                quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``e^{theta- t} (1 - e^{-lambda0 t})/lambda0 * int |grad rho0|``, a bound on ``|grad P_t^1 f|`` for ``|f| <= 1``.

    ``rho0`` is a jump density or the value of its gradient integral.
    """
    if not t >= 0.0:
        raise DomainError("t must be nonnegative")
    if isinstance(rho0, JumpDensity):
        rep = grad_density_integral(rho0, quad)
        if not rep.finite:
            return math.inf
        g = float(rep.integral)
    else:
        g = float(rho0)
    frac = -math.expm1(-lambda0 * t) / lambda0 if lambda0 > 0.0 else t
    return math.exp(max(-theta, 0.0) * t) * frac * g


@dataclass(frozen=True)
class Cor22Value:
    """Subordinated heat-semigroup gradient bound with the nominal (``printed``) and the verified constant."""

    side: str
    alpha: float
    printed_constant: float
    verified_constant: float

    @property
    def printed(self) -> float:
        return self.printed_constant * self.alpha

    @property
    def verified(self) -> float:
        return self.verified_constant * self.alpha


def bound_cor22(S: BernsteinFunction, t: float, side: str = "upper",
                quad: QuadratureConfig = DEFAULT_QUAD) -> Cor22Value:
    """Constants times ``alpha(t)`` for the subordinated Brownian semigroup on the line.

    Upper side: nominal ``1/sqrt(2 pi)``; verified ``1/pi``, which combines the
    sharp heat-kernel gradient ``1/sqrt(pi s)`` with ``int_0^inf r^{-1/2} e^{-rs} dr = sqrt(pi/s)``.
    Lower side: nominal ``1/(sqrt(2) pi)``; verified ``1/pi``. Both sides use
    ``1/pi`` after verification, since the sign function attains the heat bound.
    """
    if side not in ("upper", "lower"):
        raise DomainError("side must be 'upper' or 'lower'")
    a = eval_alpha(S, t, quad)
    if is_divergent(a):
        return Cor22Value(side, math.inf, math.nan, math.nan)
    printed = 1.0 / math.sqrt(2.0 * math.pi) if side == "upper" else 1.0 / (math.sqrt(2.0) * math.pi)
    return Cor22Value(side, float(a), printed, 1.0 / math.pi)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    residual: float
    mode: str
    inconclusive: bool = False
    reason: str = ""

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "mode": self.mode, "inconclusive": self.inconclusive, "reason": self.reason}


def fit_decay_rate(ts, values, stderr=None, mode: str = "loglog", values_are_log: bool = False) -> DecayFit:
    """Least-squares rate of a gradient series.

    ``loglog``: slope of ``log g`` against ``log t``. ``logloglog``: slope of
    ``log log g`` against ``log(1/t)`` (for ``g ~ exp(c t^{-p})``). With
    ``values_are_log`` the input is ``log g``. ``residual`` is the root mean
    square of the fit residuals.
    """
    t = _grid(ts)
    v = np.asarray(values, dtype=float)
    if v.shape != t.shape:
        raise DomainError("values must match the time grid")
    if t.size < 5:
        raise DomainError("a rate fit needs at least 5 grid points")
    reason = ""
    if stderr is not None:
        se = np.asarray(stderr, dtype=float)
        rel = se / np.abs(v) if not values_are_log else se
        if np.any(~(rel < 0.1)):
            reason = "some estimates have stderr/value >= 0.1"
    logv = v if values_are_log else np.log(np.where(v > 0.0, v, np.nan))
    if mode == "loglog":
        X, Y = np.log(t), logv
    elif mode == "logloglog":
        X = np.log(1.0 / t)
        Y = np.log(np.where(logv > 0.0, logv, np.nan))
    else:
        raise DomainError(f"unknown fit mode {mode!r}")
    if np.any(~np.isfinite(Y)):
        return DecayFit(math.nan, math.nan, math.nan, mode, True, "nonpositive or nonfinite values")
    slope, intercept = np.polyfit(X, Y, 1)
    res = Y - (slope * X + intercept)
    return DecayFit(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))), mode, bool(reason), reason)


@dataclass(frozen=True)
class AlphaIntegral:
    """``int_0^1 alpha(s) ds`` estimated decade by decade."""

    finite: bool
    value: float
    decade_ratio: float
    increments: tuple


def alpha_integral_01(S: BernsteinFunction, decades: int = 10, quad: QuadratureConfig = DEFAULT_QUAD,
                      ratio_limit: float = 0.9) -> AlphaIntegral:
    """Integrate ``alpha`` over ``[10^-(k+1), 10^-k]`` for ``k < decades``.

    The integral is declared finite when the last three decade increments shrink
    by a factor below ``ratio_limit``; the remaining tail is then summed as a
    geometric series. A power-type ``alpha ~ s^{-p}`` has ratio ``10^{p-1}``.
    """
    nodes, weights = gauss_legendre(0.0, math.log(10.0), 16)
    incs = []
    for k in range(decades):
        a = 10.0 ** -(k + 1)
        vals = []
        for u in nodes:
            s = a * math.exp(u)
            la = log_alpha(S, s, quad)
            vals.append(math.exp(la) * s if la < 700.0 else math.inf)
        incs.append(float(np.dot(weights, vals)))
        if not math.isfinite(incs[-1]):
            return AlphaIntegral(False, math.inf, math.inf, tuple(incs))
    tail = np.array(incs[-4:])
    ratios = tail[1:] / tail[:-1]
    q = float(ratios.max())
    if q < ratio_limit:
        return AlphaIntegral(True, float(sum(incs) + incs[-1] * q / (1.0 - q)), q, tuple(incs))
    return AlphaIntegral(False, math.inf, q, tuple(incs))


def bound_cor13(spec: LowerBoundSpec, sigma_norm: float, ts, A_norm: float = 0.0, d: int = 1,
                quad: QuadratureConfig = DEFAULT_QUAD) -> BoundReport:
    """Shape ``alpha(c0 (t^1)) + |sigma|`` of the perturbed gradient bound, with a free constant.

    Applicable only when ``int_0^1 alpha(s) ds`` is finite; otherwise every grid
    point is marked divergent and the report says why.
    """
    if sigma_norm < 0.0:
        raise DomainError("perturbation norm must be nonnegative")
    t = _grid(ts)
    c0, lam0, _ = _spec_constants(spec, A_norm, d, quad)
    check = alpha_integral_01(spec.S, quad=quad)
    log_a = np.array([log_alpha(spec.S, c0 * min(s, 1.0), quad) for s in t])
    with np.errstate(over="ignore", divide="ignore"):
        log_rhs = np.logaddexp(log_a, math.log(sigma_norm) if sigma_norm > 0.0 else -np.inf)
        rhs = np.exp(log_rhs)
    div = ~np.isfinite(log_a) | (not check.finite)
    consts = {"c0": c0, "lambda0": lam0, "A_norm": A_norm, "r0": spec.r0, "S": label(spec.S), "d": d,
              "sigma_norm": sigma_norm, "alpha_integral_01": check.value, "c": "free multiplier"}
    notes = [] if check.finite else [f"int_0^1 alpha diverges (decade ratio {check.decade_ratio:.3g}); bound inapplicable"]
    return BoundReport("cor13", t, rhs, log_rhs, consts, np.broadcast_to(div, t.shape).copy(),
                       terms={"alpha_term": np.exp(log_a)}, notes=notes)
