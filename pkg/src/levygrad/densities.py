"""Finite jump densities on R^d that can be sampled exactly.

All catalog members are radial, ``rho(z) = g(|z|)``, so the compensator
integral in the symbol vanishes and every density is characterised by its
radial profile ``g`` and derivative ``g'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from .bernstein import BernsteinFunction, Divergent, eval_S, eval_S_prime, from_config, label
from .errors import ConfigError, DomainError, UndefinedPointError, UnsupportedError
from .quadrature import DEFAULT_QUAD, QuadratureConfig, quad

TABLE_SIZE = 2048
TAIL_TOL = 1e-12


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def angular_mean_cos(d: int, x):
    """Average of ``cos(x w_1)`` over the unit sphere, ``Gamma(d/2)(2/x)^nu J_nu(x)``."""
    x = np.asarray(x, dtype=float)
    if d == 1:
        return np.cos(x)
    if d == 3:
        return np.sinc(x / math.pi)
    nu = d / 2.0 - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.gamma(d / 2.0) * (2.0 / x) ** nu * special.jv(nu, x)
    return np.where(x == 0.0, 1.0, out)


def random_directions(n: int, d: int, gen: np.random.Generator):
    if d == 1:
        return np.where(gen.random(n) < 0.5, -1.0, 1.0)[:, None]
    v = gen.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class LowerBoundSpec:
    """``nu(dz) >= |z|^{-d} S(|z|^{-2}) 1_{|z| < r0} dz``; ``r0`` may be ``inf``."""

    S: BernsteinFunction
    r0: float = math.inf

    def __post_init__(self):
        if not self.r0 > 0.0:
            raise DomainError(f"r0 must be positive, got {self.r0}")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.r0)

    def minorant(self, r, d: int):
        """Radial profile ``r^{-d} S(r^{-2})`` on ``r < r0`` (zero outside)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            val = r ** (-d) * eval_S(self.S, r ** -2.0)
        return np.where(r < self.r0, val, 0.0)

    def to_config(self):
        return {"S": self.S.to_config(), "r0": self.r0 if self.finite else "inf"}

    @classmethod
    def from_config(cls, cfg):
        r0 = cfg.get("r0", "inf")
        r0 = math.inf if r0 in (None, "inf", "Infinity", float("inf")) else float(r0)
        return cls(from_config(cfg["S"]), r0)


@dataclass(frozen=True)
class GradDensityReport:
    """Result of the gradient-integrability check of a jump density."""

    integral: float | Divergent
    mollified_integral: float | Divergent
    epsilon: float
    finite: bool


class JumpDensity:
    """Radial jump density ``rho(z) = g(|z|)`` with finite total mass."""

    dim: int = 1
    differentiable = True
    kind = "abstract"

    # --- radial profile -------------------------------------------------
    def profile(self, r):
        raise NotImplementedError

    def profile_deriv(self, r):
        raise NotImplementedError

    @property
    def core_radius(self) -> float:
        """Radius below which the profile is constant."""
        return 0.0

    def tail_mass(self, r: float) -> float:
        """``int_{|z| > r} rho(z) dz``."""
        raise NotImplementedError

    def shell_mass(self, r1: float, r2: float) -> float:
        return self.tail_mass(r1) - self.tail_mass(r2)

    @cached_property
    def mass(self) -> float:
        rc = self.core_radius
        core = sphere_area(self.dim) * float(self.profile(0.0)) * rc**self.dim / self.dim
        return core + self.tail_mass(rc)

    # --- pointwise quantities --------------------------------------------
    def _as_points(self, z):
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            z = z[None, None]
        elif z.ndim == 1:
            z = z[:, None] if self.dim == 1 else z[None, :]
        if z.shape[-1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got shape {z.shape}")
        return z

    def __call__(self, z):
        z = self._as_points(z)
        return self.profile(np.linalg.norm(z, axis=-1))

    def grad(self, z):
        z = self._as_points(z)
        r = np.linalg.norm(z, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(r[:, None] > 0.0, z / r[:, None], 0.0)
        return self.profile_deriv(r)[:, None] * unit

    def grad_log(self, z):
        z = self._as_points(z)
        r = np.linalg.norm(z, axis=-1)
        g = self.profile(r)
        if np.any(g <= 0.0):
            raise UndefinedPointError("grad log rho is undefined where rho = 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(r[:, None] > 0.0, z / r[:, None], 0.0)
        return (self.profile_deriv(r) / g)[:, None] * unit

    # --- sampling -------------------------------------------------------
    def radial_cdf(self, r):
        """Exact CDF of ``|xi|`` under ``rho / mass`` (quadrature based)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        rc = self.core_radius
        p_core = 1.0 - self.tail_mass(rc) / self.mass if rc > 0.0 else 0.0
        out = np.empty_like(r)
        for i, ri in enumerate(r):
            if ri <= rc:
                out[i] = p_core * (ri / rc) ** self.dim if rc > 0.0 else 0.0
            else:
                out[i] = 1.0 - self.tail_mass(ri) / self.mass
        return out

    @cached_property
    def radial_table(self):
        """Inverse-CDF table: (cdf values, log radii) on a log-spaced grid beyond the core."""
        rc = self.core_radius
        if rc <= 0.0:
            raise UnsupportedError(f"{self.kind} density has no radial table")
        r_max = rc
        while self.tail_mass(r_max) > TAIL_TOL * self.mass and r_max < 1e30 * rc:
            r_max *= 10.0
        radii = np.geomspace(rc, r_max, TABLE_SIZE)
        tails = np.empty(TABLE_SIZE)
        tails[-1] = self.tail_mass(r_max)
        for k in range(TABLE_SIZE - 2, -1, -1):
            tails[k] = tails[k + 1] + self.shell_mass(radii[k], radii[k + 1])
        cdf = 1.0 - tails / self.mass
        return np.maximum.accumulate(cdf), np.log(radii)

    def sample_radii(self, n: int, gen: np.random.Generator):
        cdf, log_r = self.radial_table
        u = gen.random(n)
        p_core = cdf[0]
        rc = self.core_radius
        with np.errstate(divide="ignore", invalid="ignore"):
            core = rc * (u / p_core) ** (1.0 / self.dim)
        tail = np.exp(np.interp(u, cdf, log_r))
        return np.where(u < p_core, core, tail)

    def sample(self, n: int, gen: np.random.Generator):
        """``n`` i.i.d. draws from ``rho / mass`` as an ``(n, d)`` array."""
        r = self.sample_radii(n, gen)
        return r[:, None] * random_directions(n, self.dim, gen)

    # --- integrals ------------------------------------------------------
    def char_exponent(self, u, quad_cfg: QuadratureConfig = DEFAULT_QUAD):
        """``int (cos<u,z> - 1) rho(z) dz`` for each row of ``u``."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        norms = np.linalg.norm(u, axis=-1)
        return np.array([self._radial_char(k, quad_cfg) for k in norms])

    def _radial_char(self, k: float, cfg: QuadratureConfig) -> float:
        if k == 0.0:
            return 0.0
        d = self.dim
        omega = sphere_area(d)
        rc = self.core_radius
        g0 = float(self.profile(0.0))
        if d == 1:
            core = 2.0 * g0 * (math.sin(k * rc) / k - rc)
            osc = quad(lambda r: float(self.profile(r)), rc, np.inf, cfg, weight="cos", wvar=k)
            return core + 2.0 * osc - self.tail_mass(rc)

        def integrand(r):
            return (float(angular_mean_cos(d, k * r)) - 1.0) * float(self.profile(r)) * r ** (d - 1)

        total = omega * quad(integrand, 0.0, rc, cfg) if rc > 0.0 else 0.0
        lo = max(rc, 1e-300)
        hi = max(2.0 * lo, 20.0 / k)
        wide = replace(cfg, limit=2000)
        total += omega * quad(integrand, lo, hi, wide)
        # past ``hi`` the Bessel factor is O((k r)^{-(d-1)/2}); integrate doubling panels until negligible
        while True:
            tail = self.tail_mass(hi)
            amp = math.sqrt(2.0 / (math.pi * k * hi)) ** (d - 1)
            if tail * amp < 1e-12 * self.mass or hi > 1e8 / k:
                return total - tail
            nxt = 2.0 * hi
            total += omega * quad(lambda r: float(angular_mean_cos(d, k * r)) * float(self.profile(r)) * r ** (d - 1),
                                  hi, nxt, wide)
            total -= self.shell_mass(hi, nxt)
            hi = nxt

    def grad_norm_integral(self, quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
        """``int |grad rho|(z) dz``."""
        d = self.dim
        omega = sphere_area(d)
        rc = self.core_radius
        f = lambda r: abs(float(self.profile_deriv(r))) * r ** (d - 1)
        return omega * (quad(f, rc, 10.0 * max(rc, 1.0), quad_cfg) + quad(f, 10.0 * max(rc, 1.0), np.inf, quad_cfg))

    def mollified_grad_integral(self, eps: float, r_max: float | None = None, n_grid: int = 6000) -> tuple[float, bool]:
        """``int sup_{|x-z| <= eps} |grad rho|(x) dz`` on a shell grid, with a finiteness verdict."""
        d = self.dim
        rc = max(self.core_radius, eps)
        if r_max is None:
            r_max = rc
            while self.tail_mass(r_max) > TAIL_TOL * self.mass and r_max < 1e12 * rc:
                r_max *= 10.0
            r_max *= 10.0
        inner = np.linspace(0.0, 4.0 * rc, n_grid // 2)
        outer = np.geomspace(4.0 * rc, r_max, n_grid // 2)[1:]
        r = np.concatenate([inner, outer])
        fine = np.concatenate([r, np.linspace(0.0, 4.0 * rc + eps, 4 * n_grid)])
        fine = np.unique(fine)
        gabs = np.abs(self.profile_deriv(fine))
        lo = np.searchsorted(fine, np.maximum(r - eps, 0.0), side="left")
        hi = np.searchsorted(fine, r + eps, side="right")
        # boundary points of the window are evaluated exactly
        edge_lo = np.abs(self.profile_deriv(np.maximum(r - eps, 0.0)))
        edge_hi = np.abs(self.profile_deriv(r + eps))
        sup = np.maximum(edge_lo, edge_hi)
        for i in range(len(r)):
            if hi[i] > lo[i]:
                sup[i] = max(sup[i], gabs[lo[i]:hi[i]].max())
        integrand = sphere_area(d) * sup * r ** (d - 1)
        total = float(np.trapezoid(integrand, r))
        last = r >= r_max / 10.0
        tail_share = float(np.trapezoid(integrand[last], r[last])) / total if total > 0 else 0.0
        return total, bool(np.isfinite(total) and tail_share < 1e-3)

    def describe(self) -> str:
        return self.kind


class GaussianDensity(JumpDensity):
    """``mass * N(0, scale^2 I_d)`` density."""

    kind = "gaussian"

    def __init__(self, mass: float = 1.0, scale: float = 1.0, dim: int = 1):
        if not (mass > 0.0 and scale > 0.0):
            raise DomainError("gaussian jump density needs positive mass and scale")
        self.dim = int(dim)
        self._mass = float(mass)
        self.scale = float(scale)

    @property
    def mass(self):
        return self._mass

    def profile(self, r):
        s2 = self.scale**2
        return self._mass * (2.0 * math.pi * s2) ** (-self.dim / 2.0) * np.exp(-np.asarray(r, dtype=float) ** 2 / (2.0 * s2))

    def profile_deriv(self, r):
        r = np.asarray(r, dtype=float)
        return -r / self.scale**2 * self.profile(r)

    def tail_mass(self, r):
        return self._mass * float(special.gammaincc(self.dim / 2.0, r * r / (2.0 * self.scale**2)))

    def radial_cdf(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return special.gammainc(self.dim / 2.0, r * r / (2.0 * self.scale**2))

    def sample(self, n, gen):
        return self.scale * gen.standard_normal((n, self.dim))

    def sample_radii(self, n, gen):
        return np.linalg.norm(self.sample(n, gen), axis=1)

    def char_exponent(self, u, quad_cfg=DEFAULT_QUAD):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return self._mass * np.expm1(-0.5 * self.scale**2 * np.sum(u * u, axis=-1))

    def grad_norm_integral(self, quad_cfg=DEFAULT_QUAD):
        d = self.dim
        mean_norm = math.sqrt(2.0) * math.exp(math.lgamma((d + 1) / 2.0) - math.lgamma(d / 2.0))
        return self._mass * mean_norm / self.scale

    def describe(self):
        return f"gaussian(mass={self._mass:g}, scale={self.scale:g})"

    def to_config(self):
        return {"kind": "gaussian", "mass": self._mass, "scale": self.scale}


class FloorDensity(JumpDensity):
    """``rho_0(z) = (r0 v |z|)^{-d} S((r0 v |z|)^{-2})`` built from a lower-bound spec."""

    kind = "floor"

    def __init__(self, spec: LowerBoundSpec, dim: int = 1):
        if not spec.finite:
            raise UnsupportedError("r0 = inf has no compound Poisson floor")
        self.spec = spec
        self.dim = int(dim)

    @property
    def core_radius(self):
        return self.spec.r0

    def profile(self, r):
        r = np.maximum(np.asarray(r, dtype=float), self.spec.r0)
        return r ** (-self.dim) * eval_S(self.spec.S, r ** -2.0)

    def profile_deriv(self, r):
        r = np.asarray(r, dtype=float)
        d = self.dim
        rr = np.maximum(r, self.spec.r0)
        x = rr ** -2.0
        val = -d * rr ** (-d - 1.0) * eval_S(self.spec.S, x) - 2.0 * rr ** (-d - 3.0) * eval_S_prime(self.spec.S, x)
        return np.where(r > self.spec.r0, val, 0.0)

    def _x_integral(self, x_lo, x_hi):
        # int_{|z| in shell} rho dz = (omega/2) int S(x)/x dx with x = |z|^{-2}
        S = self.spec.S
        # S(x)/x -> S'(0+) as x -> 0, which may be infinite but is integrable
        f = lambda x: float(S._value(x)) / x if x > 0.0 else 0.0
        return 0.5 * sphere_area(self.dim) * quad(f, x_lo, x_hi)

    def tail_mass(self, r):
        r = max(float(r), self.spec.r0)
        return self._x_integral(0.0, r**-2.0)

    def shell_mass(self, r1, r2):
        r1 = max(float(r1), self.spec.r0)
        r2 = max(float(r2), self.spec.r0)
        return self._x_integral(r2**-2.0, r1**-2.0)

    @cached_property
    def mass(self):
        d = self.dim
        r0 = self.spec.r0
        plateau = sphere_area(d) * eval_S(self.spec.S, r0**-2.0) / d
        return plateau + self.tail_mass(r0)

    def grad_norm_integral(self, quad_cfg=DEFAULT_QUAD):
        # |g'(r)| r^{d-1} dr  ->  (d/2) S(x) x^{-1/2} + S'(x) x^{1/2}  dx,  x in (0, r0^{-2})
        S = self.spec.S
        d = self.dim
        f = lambda x: 0.5 * d * float(S._value(x)) / math.sqrt(x) + float(S._deriv(x)) * math.sqrt(x) if x > 0 else 0.0
        return sphere_area(d) * quad(f, 0.0, self.spec.r0**-2.0, quad_cfg)

    def describe(self):
        return f"floor(S={label(self.spec.S)}, r0={self.spec.r0:g})"

    def to_config(self):
        return {"kind": "floor", "lower_bound": self.spec.to_config()}


class TabulatedRadialDensity(JumpDensity):
    """Radial density from a table of ``(radius, value)`` pairs.

    ``log g`` is interpolated monotonically between the nodes, held constant
    inside the first node and continued by a power law past the last node
    (exponent taken from the interpolant's end slope, so ``g`` stays C^1 there).
    """

    kind = "tabulated"

    def __init__(self, radii, values, dim: int = 1):
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or len(radii) < 2:
            raise ConfigError("tabulated density needs matching 1-D radius/value arrays")
        if np.any(np.diff(radii) <= 0.0) or radii[0] <= 0.0 or np.any(values <= 0.0):
            raise ConfigError("radii must be positive and increasing, values positive")
        self.dim = int(dim)
        self.radii = radii
        self.values = values
        self._log_interp = PchipInterpolator(radii, np.log(values), extrapolate=False)
        end_slope = float(self._log_interp.derivative()(radii[-1]))
        self.tail_exponent = -end_slope * radii[-1]
        if self.tail_exponent <= self.dim:
            raise ConfigError(
                f"power-law continuation r^-{self.tail_exponent:.3g} has infinite mass in d = {self.dim}"
            )

    @property
    def core_radius(self):
        return float(self.radii[0])

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        r0, rK = self.radii[0], self.radii[-1]
        inside = np.exp(self._log_interp(np.clip(r, r0, rK)))
        tail = self.values[-1] * (np.maximum(r, rK) / rK) ** (-self.tail_exponent)
        return np.where(r <= r0, self.values[0], np.where(r <= rK, inside, tail))

    def profile_deriv(self, r):
        r = np.asarray(r, dtype=float)
        r0, rK = self.radii[0], self.radii[-1]
        dlog = self._log_interp.derivative()(np.clip(r, r0, rK))
        inside = dlog * self.profile(r)
        tail = -self.tail_exponent / np.maximum(r, rK) * self.profile(r)
        return np.where(r <= r0, 0.0, np.where(r <= rK, inside, tail))

    def tail_mass(self, r):
        r = max(float(r), 0.0)
        d = self.dim
        omega = sphere_area(d)
        rK = self.radii[-1]
        p = self.tail_exponent
        beyond = lambda s: omega * self.values[-1] * rK**p * s ** (d - p) / (p - d)
        if r >= rK:
            return beyond(r)
        f = lambda s: float(self.profile(s)) * s ** (d - 1)
        knots = self.radii[self.radii > r]
        pts = np.concatenate([[r], knots])
        inner = sum(quad(f, a, b) for a, b in zip(pts[:-1], pts[1:]))
        return omega * inner + beyond(rK)

    def describe(self):
        return f"tabulated({len(self.radii)} nodes)"

    def to_config(self):
        return {"kind": "tabulated", "radii": self.radii.tolist(), "values": self.values.tolist()}


class UniformBallDensity(JumpDensity):
    """Constant density on a ball; its boundary jump makes it non-differentiable."""

    kind = "uniform_ball"
    differentiable = False

    def __init__(self, mass: float = 1.0, radius: float = 1.0, dim: int = 1):
        if not (mass > 0.0 and radius > 0.0):
            raise DomainError("uniform ball needs positive mass and radius")
        self.dim = int(dim)
        self._mass = float(mass)
        self.radius = float(radius)
        self._height = self._mass * self.dim / (sphere_area(self.dim) * self.radius**self.dim)

    @property
    def mass(self):
        return self._mass

    @property
    def core_radius(self):
        return self.radius

    def profile(self, r):
        return np.where(np.asarray(r, dtype=float) <= self.radius, self._height, 0.0)

    def profile_deriv(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def tail_mass(self, r):
        return 0.0 if r >= self.radius else self._mass * (1.0 - (r / self.radius) ** self.dim)

    def sample_radii(self, n, gen):
        return self.radius * gen.random(n) ** (1.0 / self.dim)

    def describe(self):
        return f"uniform_ball(mass={self._mass:g}, radius={self.radius:g})"

    def to_config(self):
        return {"kind": "uniform_ball", "mass": self._mass, "radius": self.radius}


def density_from_config(cfg: dict, dim: int, lower_bound: LowerBoundSpec | None = None) -> JumpDensity:
    kind = str(cfg.get("kind", "")).lower()
    try:
        if kind == "gaussian":
            return GaussianDensity(float(cfg.get("mass", 1.0)), float(cfg.get("scale", 1.0)), dim)
        if kind == "floor":
            spec = LowerBoundSpec.from_config(cfg["lower_bound"]) if "lower_bound" in cfg else lower_bound
            if spec is None:
                raise ConfigError("floor jumps need a lower_bound spec")
            return FloorDensity(spec, dim)
        if kind == "tabulated":
            return TabulatedRadialDensity(cfg["radii"], cfg["values"], dim)
        if kind == "uniform_ball":
            return UniformBallDensity(float(cfg.get("mass", 1.0)), float(cfg.get("radius", 1.0)), dim)
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc} for density kind {kind!r}") from exc
    except (DomainError, UnsupportedError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown jump density kind {kind!r}")
