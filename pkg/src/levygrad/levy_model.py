"""OU model ``dX = AX dt + dL`` with a Levy driver split into samplable pieces.

The driver has symbol
``eta(u) = i<u,b> - <Qu,u> + int (e^{i<u,z>} - 1 - i<u,z>1_{|z|<1}) nu(dz)``
and ``nu`` is a finite sum of components that can each be simulated exactly:
radial compound Poisson densities and subordinated Brownian motions (which
include the isotropic stable laws).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import linalg
from .bernstein import BernsteinFunction, Divergent, Power, PowerComposition, ScaledSum, eval_S, from_config, label, scaled
from .densities import (
    FloorDensity,
    GradDensityReport,
    JumpDensity,
    LowerBoundSpec,
    angular_mean_cos,
    density_from_config,
    sphere_area,
)
from .errors import ConfigError, DomainError, UnsupportedError
from .quadrature import DEFAULT_QUAD, QuadratureConfig, gauss_legendre, quad

__all__ = [
    "CompoundPoissonJumps",
    "SubordinatedBMComponent",
    "LevyModel",
    "LowerBoundSpec",
    "stable_isotropic",
    "stable_symbol_constant",
    "symbol_eta",
    "integrated_symbol",
    "log_cf_1d",
    "constants_c0_lambda0",
    "rho0_floor",
    "grad_log_density",
    "grad_density_integral",
    "check_lower_bound",
]


def _power_terms(S: BernsteinFunction):
    """``[(w, p)]`` with ``S(r) = sum w r^p`` when ``S`` is a (scaled) power, else ``None``."""
    if isinstance(S, Power):
        return [(1.0, S.beta)]
    if isinstance(S, ScaledSum):
        out = []
        for w, s in S.terms:
            sub = _power_terms(s)
            if sub is None:
                return None
            out.extend((w * ww, p) for ww, p in sub)
        return out
    if isinstance(S, PowerComposition):
        sub = _power_terms(S.base)
        if sub is not None and len(sub) == 1:
            w, p = sub[0]
            return [(w**S.delta, p)]
    return None


def _scalar_drift(A) -> float | None:
    """``a`` when ``A = a I``, else ``None``."""
    A = np.asarray(A, dtype=float)
    a = A[0, 0]
    return float(a) if np.allclose(A, a * np.eye(A.shape[0]), rtol=0.0, atol=0.0) else None


def _time_factor(a: float, p: float, t: float) -> float:
    """``int_0^t e^{p a s} ds``."""
    x = p * a * t
    return t if x == 0.0 else t * math.expm1(x) / x


class JumpComponent:
    kind = "abstract"

    def symbol(self, u):
        """Contribution to ``eta`` at the rows of ``u`` (complex array)."""
        raise NotImplementedError

    def integrated_symbol_scalar_drift(self, u, a: float, t: float):
        """``int_0^t symbol(e^{sa} u) ds`` in closed form, or ``None``."""
        return None

    def levy_density(self, r, d: int):
        """Radial Levy density ``nu(dz)/dz`` at ``|z| = r``, or ``None`` when not explicit."""
        return None

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CompoundPoissonJumps(JumpComponent):
    """Finite radial jump density. ``floor`` marks the component that carries ``rho_0``."""

    density: JumpDensity
    floor: bool = False
    kind = "compound_poisson"

    @property
    def rate(self) -> float:
        return self.density.mass

    def symbol(self, u):
        # radial symmetry kills the compensator term
        return self.density.char_exponent(u).astype(complex)

    def levy_density(self, r, d):
        return self.density.profile(r)

    def describe(self):
        return ("floor " if self.floor else "") + self.density.describe()

    def to_config(self):
        cfg = dict(self.density.to_config())
        cfg["floor"] = self.floor
        return cfg


@dataclass(frozen=True)
class SubordinatedBMComponent(JumpComponent):
    """Brownian motion with generator ``Delta`` time-changed by a subordinator with exponent ``S``.

    Its symbol is ``-S(|u|^2)``.
    """

    S: BernsteinFunction
    stable_alpha: float | None = None
    stable_scale: float | None = None
    kind = "subordinated_bm"

    def symbol(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return -eval_S(self.S, np.sum(u * u, axis=-1)).astype(complex)

    def integrated_symbol_scalar_drift(self, u, a, t):
        terms = _power_terms(self.S)
        if terms is None:
            return None
        r2 = np.sum(np.atleast_2d(u) ** 2, axis=-1)
        return -sum(w * r2**p * _time_factor(a, 2.0 * p, t) for w, p in terms).astype(complex)

    def levy_density(self, r, d):
        if self.stable_alpha is None:
            return None
        return self.stable_scale * np.asarray(r, dtype=float) ** (-d - self.stable_alpha)

    def describe(self):
        if self.stable_alpha is not None:
            return f"stable(alpha={self.stable_alpha:g}, c={self.stable_scale:g})"
        return f"subordinated_bm(S={label(self.S)})"

    def to_config(self):
        if self.stable_alpha is not None:
            return {"kind": "stable", "alpha": self.stable_alpha, "c": self.stable_scale}
        return {"kind": "subordinated_bm", "S": self.S.to_config()}


def stable_symbol_constant(alpha: float, c: float, d: int) -> float:
    """``c'`` such that ``nu(dz) = c |z|^{-d-alpha} dz`` has symbol ``-c' |u|^alpha``."""
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"stable index must lie in (0, 2), got {alpha}")
    return c * math.pi ** (d / 2.0) * math.gamma(1.0 - alpha / 2.0) / (
        alpha * 2.0 ** (alpha - 1.0) * math.gamma((d + alpha) / 2.0)
    )


def stable_isotropic(alpha: float, c: float | None = None, d: int = 1, symbol_scale: float | None = None):
    """Isotropic stable component, given either the Levy-measure scale ``c`` or the symbol scale ``c'``."""
    if (c is None) == (symbol_scale is None):
        raise ConfigError("give exactly one of c (Levy measure) or symbol_scale")
    k = stable_symbol_constant(alpha, 1.0, d)
    if c is None:
        c = symbol_scale / k
    cprime = c * k
    return SubordinatedBMComponent(scaled(Power(alpha / 2.0), cprime), float(alpha), float(c))


@dataclass(frozen=True)
class LevyModel:
    """OU model ``dX = AX dt + dL`` with driver triplet ``(b, Q, nu)``."""

    dim: int
    A: np.ndarray
    b: np.ndarray
    Q: np.ndarray
    jumps: tuple = ()
    lower_bound: LowerBoundSpec | None = None
    name: str = "model"
    theta: float = field(init=False)

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise DomainError("dimension must be positive")
        A = np.array(self.A, dtype=float).reshape(d, d)
        b = np.array(self.b, dtype=float).reshape(d)
        Q = np.array(self.Q, dtype=float).reshape(d, d)
        for arr in (A, b, Q):
            if not np.all(np.isfinite(arr)):
                raise DomainError("model coefficients must be finite")
            arr.setflags(write=False)
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise DomainError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise DomainError("Q must be positive semidefinite")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "jumps", tuple(self.jumps))
        theta = linalg.contraction_rate(A)
        sym = 0.5 * (A + A.T) + theta * np.eye(d)
        assert np.linalg.eigvalsh(sym).max() <= 1e-12 * max(1.0, abs(theta))
        object.__setattr__(self, "theta", theta)
        floors = [j for j in self.jumps if isinstance(j, CompoundPoissonJumps) and j.floor]
        if len(floors) > 1:
            raise ConfigError("at most one floor component is allowed")
        for j in self.jumps:
            if isinstance(j, CompoundPoissonJumps) and j.density.dim != d:
                raise DomainError("jump density dimension does not match the model")

    @property
    def A_norm(self) -> float:
        return linalg.operator_norm(self.A)

    @property
    def theta_minus(self) -> float:
        return max(-self.theta, 0.0)

    @property
    def theta_plus(self) -> float:
        return max(self.theta, 0.0)

    @property
    def floor_component(self) -> CompoundPoissonJumps | None:
        for j in self.jumps:
            if isinstance(j, CompoundPoissonJumps) and j.floor:
                return j
        return None

    @property
    def has_atoms(self) -> bool:
        """True when the law of ``X_t`` has an atom (no Gaussian or infinite-activity part)."""
        if np.linalg.eigvalsh(self.Q).max() > 0.0:
            return False
        return not any(isinstance(j, SubordinatedBMComponent) for j in self.jumps)

    def with_jumps(self, *extra, name: str | None = None) -> "LevyModel":
        return LevyModel(self.dim, self.A, self.b, self.Q, self.jumps + tuple(extra), self.lower_bound,
                         name or self.name)

    def without_floor(self) -> "LevyModel":
        keep = tuple(j for j in self.jumps if not (isinstance(j, CompoundPoissonJumps) and j.floor))
        return LevyModel(self.dim, self.A, self.b, self.Q, keep, self.lower_bound, self.name)

    def with_A(self, A) -> "LevyModel":
        return LevyModel(self.dim, A, self.b, self.Q, self.jumps, self.lower_bound, self.name)

    def describe(self) -> str:
        parts = [f"d={self.dim}", f"theta={self.theta:g}"]
        if self.Q.any():
            parts.append("gaussian")
        parts += [j.describe() for j in self.jumps]
        return f"{self.name}: " + ", ".join(parts)

    def to_config(self) -> dict:
        cfg = {
            "name": self.name,
            "dim": self.dim,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "Q": self.Q.tolist(),
            "jumps": [j.to_config() for j in self.jumps],
        }
        if self.lower_bound is not None:
            cfg["lower_bound"] = self.lower_bound.to_config()
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "LevyModel":
        try:
            d = int(cfg["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("model config needs an integer 'dim'") from exc
        spec = LowerBoundSpec.from_config(cfg["lower_bound"]) if cfg.get("lower_bound") else None

        def matrix(key, default):
            raw = cfg.get(key, default)
            arr = np.asarray(raw, dtype=float)
            if arr.size != d * d:
                raise ConfigError(f"{key} must have {d * d} entries, got {arr.size}")
            return arr.reshape(d, d)

        A = matrix("A", np.zeros((d, d)))
        Q = matrix("Q", np.zeros((d, d)))
        b = np.asarray(cfg.get("b", np.zeros(d)), dtype=float)
        if b.size != d:
            raise ConfigError(f"b must have {d} entries")
        jumps = [jump_from_config(j, d, spec) for j in cfg.get("jumps", [])]
        try:
            return cls(d, A, b, Q, tuple(jumps), spec, str(cfg.get("name", "model")))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


def jump_from_config(cfg: dict, d: int, spec: LowerBoundSpec | None) -> JumpComponent:
    kind = str(cfg.get("kind", "")).lower()
    try:
        if kind == "stable":
            if "symbol_scale" in cfg:
                return stable_isotropic(float(cfg["alpha"]), d=d, symbol_scale=float(cfg["symbol_scale"]))
            return stable_isotropic(float(cfg["alpha"]), c=float(cfg.get("c", 1.0)), d=d)
        if kind == "subordinated_bm":
            return SubordinatedBMComponent(from_config(cfg["S"]))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc} for jump kind {kind!r}") from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    density = density_from_config(cfg, d, spec)
    return CompoundPoissonJumps(density, bool(cfg.get("floor", kind == "floor")))


# --- symbols ---------------------------------------------------------------

def _as_rows(model: LevyModel, u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("symbol argument must be finite")
    single = u.ndim == 0 or (u.ndim == 1 and (model.dim > 1 or u.size == 1))
    if u.ndim == 0:
        u = u[None, None]
    elif u.ndim == 1:
        u = u[None, :] if model.dim > 1 or u.size == 1 else u[:, None]
    if u.shape[-1] != model.dim:
        raise DomainError(f"expected vectors of dimension {model.dim}")
    return u, single


def symbol_eta(model: LevyModel, u):
    """Levy symbol ``eta(u)``; ``u`` is one vector or an ``(n, d)`` array."""
    rows, single = _as_rows(model, u)
    out = 1j * rows @ model.b - np.einsum("ni,ij,nj->n", rows, model.Q, rows)
    for j in model.jumps:
        out = out + j.symbol(rows)
    return complex(out[0]) if single else out


def integrated_symbol(model: LevyModel, t: float, z, quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> complex:
    """``log mu_t^(z) = int_0^t eta(e^{sA*} z) ds``.

    The drift and Gaussian parts are integrated exactly through matrix
    exponentials; jump parts use a closed form when ``A`` is scalar and the
    component is of power type, adaptive quadrature over ``s`` otherwise.
    """
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    rows, _ = _as_rows(model, z)
    z = rows[0]
    drift = linalg.drift_integral(model.A, model.b, t)
    cov = linalg.gaussian_covariance_exact(model.A, model.Q, t)[0]
    total = 1j * float(z @ drift) - 0.5 * float(z @ cov @ z)
    a = _scalar_drift(model.A)
    At = model.A.T
    for j in model.jumps:
        closed = j.integrated_symbol_scalar_drift(z[None, :], a, t) if a is not None else None
        if closed is not None:
            total += complex(closed[0])
            continue

        def re(s, j=j):
            v = linalg.expm_times(At, s, z)
            return float(np.real(j.symbol(v))[0])

        def im(s, j=j):
            v = linalg.expm_times(At, s, z)
            return float(np.imag(j.symbol(v))[0])

        total += quad(re, 0.0, t, quad_cfg) + 1j * quad(im, 0.0, t, quad_cfg)
    return complex(total)


class _RadialSymbolTable:
    """Monotone interpolation of ``-eta`` for a radial density, used on large frequency grids."""

    def __init__(self, density: JumpDensity, n: int = 400):
        scale = max(density.core_radius, getattr(density, "scale", 0.0), 1e-300)
        self.k_lo = 1e-4 / scale
        self.k_hi = 1e4 / scale
        k = np.geomspace(self.k_lo, self.k_hi, n)
        vals = -density.char_exponent(k[:, None])
        self.mass = density.mass
        self.lo_val = vals[0]
        self.interp = PchipInterpolator(np.log(k), np.log(np.maximum(vals, 1e-300)))

    def __call__(self, k):
        k = np.abs(np.asarray(k, dtype=float))
        out = np.empty_like(k)
        small = k < self.k_lo
        big = k > self.k_hi
        mid = ~(small | big)
        out[mid] = np.exp(self.interp(np.log(k[mid])))
        out[small] = self.lo_val * (k[small] / self.k_lo) ** 2
        out[big] = self.mass
        return -out


def log_cf_1d(model: LevyModel, t: float, z, n_panels: int = 16, n_nodes: int = 32):
    """Vectorised ``log mu_t^(z)`` on a 1-D frequency grid ``z``.

    Same decomposition as :func:`integrated_symbol`; components without a
    closed form are integrated over ``s`` by composite Gauss-Legendre.
    """
    if model.dim != 1:
        raise UnsupportedError("the vectorised characteristic function is one-dimensional")
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    z = np.asarray(z, dtype=float)
    a = float(model.A[0, 0])
    b = float(model.b[0])
    q = float(model.Q[0, 0])
    out = 1j * z * b * _time_factor(a, 1.0, t) - q * z * z * _time_factor(a, 2.0, t)
    s_nodes = s_weights = None
    for j in model.jumps:
        closed = j.integrated_symbol_scalar_drift(z[:, None], a, t)
        if closed is not None:
            out = out + closed
            continue
        if s_nodes is None:
            s_nodes, s_weights = gauss_legendre(0.0, t, n_nodes, n_panels)
        if isinstance(j, CompoundPoissonJumps):
            exact = z.size < 64
            table = None if exact else _RadialSymbolTable(j.density)
            if a == 0.0:
                eta = j.density.char_exponent(z[:, None]) if exact else table(z)
                out = out + t * eta
                continue
            if exact:
                table = lambda k, dens=j.density: dens.char_exponent(np.asarray(k)[:, None])
            acc = np.zeros(z.shape)
            for s, w in zip(s_nodes, s_weights):
                acc += w * table(math.exp(a * s) * z)
            out = out + acc
        else:
            acc = np.zeros(z.shape, dtype=complex)
            for s, w in zip(s_nodes, s_weights):
                acc += w * j.symbol(math.exp(a * s) * z[:, None])
            out = out + acc
    return out


# --- lower-bound constants --------------------------------------------------

def _one_minus_angular_cos_over_r(d: int, r: float) -> float:
    if r < 1e-3:
        return r / (2.0 * d) - r**3 / (8.0 * d * (d + 2.0))
    if d == 1:
        return 2.0 * math.sin(0.5 * r) ** 2 / r
    return (1.0 - float(angular_mean_cos(d, r))) / r


def constants_c0_lambda0(spec: LowerBoundSpec, A_norm: float, d: int, quad_cfg: QuadratureConfig = DEFAULT_QUAD):
    """``(c0, lambda0)`` for a lower-bound spec.

    ``c0 = int_{|z| <= e^{-|A|}} (1 - cos z_1) |z|^{-d} dz`` uses the spherical
    average of ``cos z_1`` (a Bessel function) so that only a radial integral
    remains; ``lambda0`` is the total mass of the floor density.
    """
    if d < 1:
        raise DomainError("d must be at least 1")
    if A_norm < 0.0:
        raise DomainError("operator norm must be nonnegative")
    R = math.exp(-A_norm)
    c0 = sphere_area(d) * quad(lambda r: _one_minus_angular_cos_over_r(d, r), 0.0, R, quad_cfg)
    lam0 = FloorDensity(spec, d).mass if spec.finite else 0.0
    return c0, lam0


def rho0_floor(spec: LowerBoundSpec, d: int) -> FloorDensity:
    if not spec.finite:
        raise UnsupportedError("r0 = inf has no compound Poisson floor")
    return FloorDensity(spec, d)


def grad_log_density(rho: JumpDensity, z):
    return rho.grad_log(z)


def grad_density_integral(rho: JumpDensity, quad_cfg: QuadratureConfig = DEFAULT_QUAD,
                          eps: float | None = None) -> GradDensityReport:
    """``int |grad rho|`` plus the mollified ``sup_{|x-z| <= eps} |grad rho|`` integrability check."""
    if not rho.differentiable:
        reason = f"{rho.describe()} is not differentiable"
        return GradDensityReport(Divergent(reason), Divergent(reason), float("nan"), False)
    if eps is None:
        eps = 0.5 * max(rho.core_radius, getattr(rho, "scale", 0.0), 1e-3)
    value = rho.grad_norm_integral(quad_cfg)
    moll, finite = rho.mollified_grad_integral(eps)
    if not finite:
        return GradDensityReport(value, Divergent("mollified gradient integral diverges"), eps, False)
    return GradDensityReport(value, moll, eps, bool(np.isfinite(value)))


@dataclass(frozen=True)
class LowerBoundCheck:
    ok: bool
    min_ratio: float
    radii_checked: int
    note: str = ""


def check_lower_bound(model: LevyModel, n_radii: int = 200) -> LowerBoundCheck:
    """Check ``nu >= |z|^{-d} S(|z|^{-2}) 1_{|z|<r0}`` on a radial grid.

    Only components with an explicit Levy density are summed; a model whose
    measure is not written that way is reported as unchecked.
    """
    spec = model.lower_bound
    if spec is None:
        return LowerBoundCheck(True, math.inf, 0, "no lower bound declared")
    hi = spec.r0 if spec.finite else 1e6
    r = np.geomspace(1e-6 * min(hi, 1.0), hi, n_radii + 1)[:-1]
    total = np.zeros_like(r)
    for j in model.jumps:
        dens = j.levy_density(r, model.dim)
        if dens is None:
            return LowerBoundCheck(False, math.nan, 0, f"{j.describe()} has no explicit density")
        total += dens
    minor = spec.minorant(r, model.dim)
    ratio = float(np.min(total / minor))
    return LowerBoundCheck(ratio >= 1.0 - 1e-12, ratio, n_radii)
