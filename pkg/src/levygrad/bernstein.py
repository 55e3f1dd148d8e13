"""Catalog of Bernstein functions and the gradient-rate integral.

Every catalog member has a closed-form value and derivative, so the
integral ``alpha(t) = int_0^inf r^{-1/2} exp(-t S(r)) dr`` can be checked
against exact Gamma-function values for the power family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError
from .quadrature import DEFAULT_QUAD, QuadratureConfig, integrate_half_line

# probe scale for the integrability test  lim S(r)/log r = inf
DIVERGENCE_PROBE = 1e12
DIVERGENCE_MARGIN = 1e-6
# beyond these the panel scheme for alpha loses accuracy and the log-scale route is used
LOG_ROUTE_SCALE = 1e30
LOG_ROUTE_VALUE = 1e60


@dataclass(frozen=True)
class Divergent:
    """Marker returned in place of a number when an integral is infinite."""

    reason: str = ""

    def __float__(self):
        return math.inf

    def __bool__(self):
        return False


def is_divergent(value) -> bool:
    return isinstance(value, Divergent) or (isinstance(value, float) and math.isinf(value))


class BernsteinFunction:
    """Base class. Subclasses implement ``_value`` and ``_deriv`` on float arrays."""

    kind = "abstract"
    #: constant ``c`` with ``S(r) <= c r`` when known in closed form
    linear_bound: float | None = None

    def __call__(self, r):
        return eval_S(self, r)

    def _value(self, r):
        raise NotImplementedError

    def _deriv(self, r):
        raise NotImplementedError

    def _value_log(self, logr):
        """``S(e^{logr})`` without forming ``e^{logr}`` where the kind allows it."""
        return self._value(np.exp(logr))

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class Power(BernsteinFunction):
    beta: float
    kind = "power"

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"power exponent must lie in (0, 1], got {self.beta}")

    @property
    def linear_bound(self):
        return 1.0 if self.beta == 1.0 else None

    def _value(self, r):
        return r**self.beta

    def _deriv(self, r):
        return self.beta * r ** (self.beta - 1.0)

    def _value_log(self, logr):
        return np.exp(self.beta * np.asarray(logr, dtype=float))

    def to_config(self):
        return {"kind": "power", "beta": self.beta}


@dataclass(frozen=True, eq=True)
class Log(BernsteinFunction):
    kind = "log"
    linear_bound = 1.0

    def _value(self, r):
        return np.log1p(r)

    def _deriv(self, r):
        return 1.0 / (1.0 + r)

    def _value_log(self, logr):
        return np.logaddexp(0.0, logr)

    def to_config(self):
        return {"kind": "log"}


@dataclass(frozen=True, eq=True)
class LogPower(BernsteinFunction):
    """``S_eps(r) = log^{1+eps}(1 + r^{1/(1+eps)})``."""

    epsilon: float
    kind = "log_power"

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")

    def _value(self, r):
        p = 1.0 + self.epsilon
        return np.log1p(r ** (1.0 / p)) ** p

    def _deriv(self, r):
        p = 1.0 + self.epsilon
        u = r ** (1.0 / p)
        return np.log1p(u) ** self.epsilon / (1.0 + u) * u / r

    def _value_log(self, logr):
        p = 1.0 + self.epsilon
        return np.logaddexp(0.0, np.asarray(logr, dtype=float) / p) ** p

    def to_config(self):
        return {"kind": "log_power", "epsilon": self.epsilon}


@dataclass(frozen=True, eq=True)
class ScaledSum(BernsteinFunction):
    """``sum_i w_i S_i(r)`` with positive weights."""

    terms: tuple = field(default=())
    kind = "scaled_sum"

    def __post_init__(self):
        terms = tuple((float(w), s) for w, s in self.terms)
        if not terms:
            raise DomainError("scaled sum needs at least one term")
        for w, s in terms:
            if not w > 0.0:
                raise DomainError(f"weights must be positive, got {w}")
            if not isinstance(s, BernsteinFunction):
                raise DomainError("terms must be (weight, BernsteinFunction) pairs")
        object.__setattr__(self, "terms", terms)

    @property
    def linear_bound(self):
        bounds = [s.linear_bound for _, s in self.terms]
        if any(b is None for b in bounds):
            return None
        return sum(w * b for (w, _), b in zip(self.terms, bounds))

    def _value(self, r):
        return sum(w * s._value(r) for w, s in self.terms)

    def _deriv(self, r):
        return sum(w * s._deriv(r) for w, s in self.terms)

    def _value_log(self, logr):
        return sum(w * s._value_log(logr) for w, s in self.terms)

    def to_config(self):
        return {"kind": "scaled_sum", "terms": [[w, s.to_config()] for w, s in self.terms]}


@dataclass(frozen=True, eq=True)
class PowerComposition(BernsteinFunction):
    """``r -> S(r^{1/delta})^delta`` for ``delta > 1``."""

    base: BernsteinFunction
    delta: float
    kind = "power_composition"

    def _value(self, r):
        return self.base._value(r ** (1.0 / self.delta)) ** self.delta

    def _deriv(self, r):
        d = self.delta
        u = r ** (1.0 / d)
        return self.base._value(u) ** (d - 1.0) * self.base._deriv(u) * u / r

    def _value_log(self, logr):
        return self.base._value_log(np.asarray(logr, dtype=float) / self.delta) ** self.delta

    def to_config(self):
        return {"kind": "power_composition", "base": self.base.to_config(), "delta": self.delta}


def scaled(S: BernsteinFunction, c: float) -> BernsteinFunction:
    """``c * S`` as a catalog member."""
    if c == 1.0:
        return S
    return ScaledSum(((c, S),))


def eval_S(S: BernsteinFunction, r):
    """Value of ``S`` at ``r >= 0`` (scalar or array)."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise DomainError("Bernstein functions are evaluated on r >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr == 0.0, 0.0, S._value(np.where(arr == 0.0, 1.0, arr)))
    return float(out) if np.ndim(r) == 0 else out


def eval_S_prime(S: BernsteinFunction, r):
    """Derivative ``S'(r)`` for ``r > 0``."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("S' is evaluated on r > 0")
    out = S._deriv(arr)
    return float(out) if np.ndim(r) == 0 else out


def bernstein_power(S: BernsteinFunction, delta: float) -> BernsteinFunction:
    """The Bernstein function ``r -> S(r^{1/delta})^delta`` (``delta > 1``)."""
    if not delta > 1.0:
        raise DomainError(f"delta must exceed 1, got {delta}")
    return PowerComposition(S, float(delta))


def integrability_ok(S: BernsteinFunction) -> bool:
    """Numerical version of ``lim S(r)/log r = inf`` at the fixed probe scale."""
    probe = DIVERGENCE_PROBE
    return eval_S(S, probe) > (1.0 + DIVERGENCE_MARGIN) * math.log(probe)


def eval_alpha(S: BernsteinFunction, t: float, quad: QuadratureConfig = DEFAULT_QUAD):
    """``alpha(t) = int_0^inf r^{-1/2} exp(-t S(r)) dr``.

    After ``u = sqrt(r)`` the integrand ``2 exp(-t S(u^2))`` is bounded and the
    half line is integrated panel by panel. Returns :class:`Divergent` when the
    integrability test fails.
    """
    if not t > 0.0:
        raise DomainError(f"alpha(t) needs t > 0, got {t}")
    if not integrability_ok(S):
        return Divergent(f"S(r) <= log r at r = {DIVERGENCE_PROBE:g}")

    value = S._value

    def integrand(u):
        return 2.0 * math.exp(-t * float(value(u * u))) if u > 0.0 else 2.0

    # start the panels near the scale where t S(u^2) ~ 1
    first = 1.0
    while first < 1e150 and t * float(value(first * first)) < 1.0:
        first *= 2.0
    if first < LOG_ROUTE_SCALE:
        res = integrate_half_line(integrand, quad, first=first)
        if res.converged and res.value < LOG_ROUTE_VALUE:
            return res.value
    # mass sits at astronomically large r: integrate in log scale instead
    log_val = eval_log_alpha(S, t, quad)
    if is_divergent(log_val):
        return log_val
    if log_val > 709.0:
        return Divergent(f"alpha(t) = exp({log_val:.6g}) overflows; use eval_log_alpha")
    return math.exp(log_val)


def eval_log_alpha(S: BernsteinFunction, t: float, quad: QuadratureConfig = DEFAULT_QUAD):
    """``log alpha(t)``, usable where ``alpha(t)`` itself overflows.

    With ``u = sqrt(r) = e^w`` the integral is ``2 int exp(w - t S(e^{2w})) dw``.
    The exponent is maximised on a grid, refined around the peak, and the
    rescaled integrand is integrated over the window where it exceeds e^{-60}.
    """
    if not t > 0.0:
        raise DomainError(f"alpha(t) needs t > 0, got {t}")
    if not integrability_ok(S):
        return Divergent(f"S(r) <= log r at r = {DIVERGENCE_PROBE:g}")
    from scipy import integrate, optimize

    def h(w):
        return w - t * S._value_log(2.0 * np.asarray(w, dtype=float))

    hi = 8.0
    while h(hi) > h(hi / 2.0) - 60.0 or h(hi) > h(0.0) - 60.0:
        hi *= 2.0
        if hi > 1e300:
            return Divergent("exponent does not decay")
    grid = np.concatenate([np.linspace(-60.0, 8.0, 400), np.geomspace(8.0, hi, 4000)])
    vals = h(grid)
    k = int(np.argmax(vals))
    lo_b, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    peak = optimize.minimize_scalar(lambda w: -float(h(w)), bounds=(lo_b, hi_b), method="bounded",
                                    options={"xatol": 1e-10 * max(1.0, abs(grid[k]))})
    w_star = float(peak.x)
    h_star = float(h(w_star))
    inside = grid[vals > h_star - 60.0]
    a = min(float(inside.min()), w_star) - 1.0
    b = max(float(inside.max()), w_star) + 1.0
    val, _ = integrate.quad(lambda w: math.exp(float(h(w)) - h_star), a, b, points=[w_star],
                            limit=quad.limit, epsabs=0.0, epsrel=1e-10)
    return math.log(2.0) + h_star + math.log(val)


def alpha_power_closed_form(beta: float, t: float) -> float:
    """``(1/beta) Gamma(1/(2 beta)) t^{-1/(2 beta)}``; the exact value for ``S(r) = r^beta``."""
    return math.gamma(1.0 / (2.0 * beta)) / beta * t ** (-1.0 / (2.0 * beta))


def from_config(cfg: Union[dict, BernsteinFunction]) -> BernsteinFunction:
    """Build a catalog member from ``{"kind": ..., params}``."""
    if isinstance(cfg, BernsteinFunction):
        return cfg
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"Bernstein function config needs a 'kind': {cfg!r}")
    kind = str(cfg["kind"]).lower()
    try:
        if kind == "power":
            return Power(float(cfg["beta"]))
        if kind == "log":
            return Log()
        if kind in ("log_power", "logpower"):
            return LogPower(float(cfg["epsilon"]))
        if kind in ("scaled_sum", "scaledsum"):
            return ScaledSum(tuple((float(w), from_config(s)) for w, s in cfg["terms"]))
        if kind in ("power_composition", "composition"):
            return bernstein_power(from_config(cfg["base"]), float(cfg["delta"]))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc} for Bernstein kind {kind!r}") from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown Bernstein kind {kind!r}")


def label(S: BernsteinFunction) -> str:
    """Short identifier used in reports."""
    if isinstance(S, Power):
        return f"power(beta={S.beta:g})"
    if isinstance(S, Log):
        return "log"
    if isinstance(S, LogPower):
        return f"log_power(eps={S.epsilon:g})"
    if isinstance(S, ScaledSum):
        return "+".join(f"{w:g}*{label(s)}" for w, s in S.terms)
    if isinstance(S, PowerComposition):
        return f"({label(S.base)})^[{S.delta:g}]"
    return S.kind
