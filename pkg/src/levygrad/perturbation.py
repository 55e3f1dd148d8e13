"""Bounded perturbations ``sigma g(x) = int (g(z) - g(x)) kappa(x) m(z) dz`` of the jump kernel.

Jump targets of ``sigma`` are absolute: a perturbation event moves the state
to a fresh draw from ``m``, independently of where it was. This differs from
the base Levy kernel, whose jumps are increments ``nu(dz - x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError, GridError, NumericalError, UnsupportedError
from .estimators import MCEstimate, run_blocks
from .functions import TestFunction
from .levy_model import LevyModel, log_cf_1d
from .linalg import expm_times
from .sampling import RngStream, sample_ou_noise

LEAK_TOL = 1e-10
PICARD_TOL = 1e-8
PICARD_MAX_ITER = 100


@dataclass(frozen=True)
class Rate:
    """State-dependent rate ``kappa(x)`` on the line.

    ``constant``: ``value``. ``bump``: ``height * exp(-(x - center)^2 / (2 width^2))``.
    ``signed``: ``amplitude * cos(freq x)``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        need = {"constant": 1, "bump": 3, "signed": 2}
        if self.kind not in need:
            raise ConfigError(f"unknown rate kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        if len(p) != need[self.kind]:
            raise ConfigError(f"rate {self.kind!r} takes {need[self.kind]} parameters, got {len(p)}")
        if self.kind == "bump" and not p[2] > 0.0:
            raise ConfigError("bump width must be positive")
        object.__setattr__(self, "params", p)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full(x.shape, p[0])
        if self.kind == "bump":
            return p[0] * np.exp(-((x - p[1]) ** 2) / (2.0 * p[2] ** 2))
        return p[0] * np.cos(p[1] * x)

    @property
    def sup(self) -> float:
        return abs(self.params[0])

    @property
    def nonnegative(self) -> bool:
        return self.kind == "signed" and self.params[0] == 0.0 or (self.kind != "signed" and self.params[0] >= 0.0)

    def to_config(self):
        keys = {"constant": ("value",), "bump": ("height", "center", "width"), "signed": ("amplitude", "freq")}
        return {"kind": self.kind, **dict(zip(keys[self.kind], self.params))}


@dataclass(frozen=True)
class Redistribution:
    """Gaussian target law ``m = N(mean, std^2)`` of a perturbation jump."""

    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not self.std > 0.0:
            raise ConfigError("redistribution std must be positive")

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(-0.5 * ((z - self.mean) / self.std) ** 2) / (self.std * math.sqrt(2.0 * math.pi))

    def sample(self, size, gen: np.random.Generator):
        return self.mean + self.std * gen.standard_normal(size)

    def to_config(self):
        return {"kind": "gaussian", "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class PerturbationKernel:
    """``sigma(x, dz) = kappa(x) m(z) dz`` with ``|sigma| = sup |kappa|`` (``m`` is a probability density)."""

    kappa: Rate
    m: Redistribution = Redistribution()

    @property
    def norm(self) -> float:
        return self.kappa.sup

    @property
    def nonnegative(self) -> bool:
        return self.kappa.nonnegative

    def to_config(self):
        return {"kappa": self.kappa.to_config(), "m": self.m.to_config()}


def zero_kernel() -> PerturbationKernel:
    return PerturbationKernel(Rate("constant", (0.0,)))


def perturbation_from_config(cfg: dict) -> PerturbationKernel:
    """``{"kappa": {"kind": ..., params}, "m": {"kind": "gaussian", "mean": .., "std": ..}}``."""
    if not isinstance(cfg, dict) or "kappa" not in cfg:
        raise ConfigError("perturbation config needs a 'kappa' entry")
    k = dict(cfg["kappa"])
    kind = str(k.pop("kind", "")).lower()
    order = {"constant": ("value",), "bump": ("height", "center", "width"), "signed": ("amplitude", "freq")}
    if kind not in order:
        raise ConfigError(f"unknown rate kind {kind!r}")
    try:
        rate = Rate(kind, tuple(float(k[name]) for name in order[kind]))
    except KeyError as exc:
        raise ConfigError(f"rate {kind!r} is missing {exc}") from exc
    m = dict(cfg.get("m", {"kind": "gaussian"}))
    if str(m.get("kind", "gaussian")).lower() != "gaussian":
        raise ConfigError("only gaussian redistribution densities are supported")
    return PerturbationKernel(rate, Redistribution(float(m.get("mean", 0.0)), float(m.get("std", 1.0))))


# --- grid operators ------------------------------------------------------------

@dataclass(frozen=True)
class SolverGrid:
    """Periodic grid ``x_j = -L + 2 L j / n``; ``L`` is a multiple of ``pi`` so integer frequencies are resolved."""

    n: int = 1024
    L: float = 16.0 * math.pi

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise DomainError("solver grid needs an even number of at least 8 points")
        if not self.L > 0.0:
            raise DomainError("grid half-width must be positive")

    @property
    def x(self):
        return -self.L + (2.0 * self.L / self.n) * np.arange(self.n)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def z(self):
        return (math.pi / self.L) * np.arange(self.n // 2 + 1)


def _m_weights(sigma: PerturbationKernel, grid: SolverGrid):
    m = sigma.m
    lo, hi = -grid.L, grid.L
    outside = float(ndtr((lo - m.mean) / m.std) + ndtr(-(hi - m.mean) / m.std))
    if outside > LEAK_TOL:
        raise GridError("redistribution density leaks off the solver grid; widen the grid",
                        {"mass_outside": outside, "limit": LEAK_TOL, "L": grid.L})
    w = m.pdf(grid.x) * grid.dx
    return w / w.sum()


def sigma_apply(sigma: PerturbationKernel, g, grid: SolverGrid):
    """``kappa(x) (int g m - g(x))`` on the grid, with ``int g m`` by the trapezoid rule.

    The weights of ``m`` are normalised to sum to one, so constants map to 0 exactly.
    """
    g = np.asarray(g, dtype=float)
    if g.shape[-1] != grid.n:
        raise DomainError("grid function has the wrong length")
    kap = sigma.kappa(grid.x)
    if not kap.any():
        return np.zeros_like(g)
    w = _m_weights(sigma, grid)
    avg = g @ w
    return kap * (np.asarray(avg)[..., None] - g)


def _cf_table(model: LevyModel, times, grid: SolverGrid):
    z = grid.z
    out = np.ones((len(times), len(z)), dtype=complex)
    for i, s in enumerate(times):
        if s > 0.0:
            out[i] = np.exp(log_cf_1d(model, float(s), z))
    return out


@dataclass
class DuhamelResult:
    x: np.ndarray
    value: np.ndarray
    gradient: np.ndarray
    t: float
    steps: int
    iterations: int
    residuals: list = field(default_factory=list)
    sigma_norm: float = 0.0

    @property
    def ratios(self):
        r = self.residuals
        return [r[k] / r[k - 1] for k in range(1, len(r)) if r[k - 1] > 0.0]

    def at(self, xs):
        """Values at points of the grid (nearest node; the caller picks grid-aligned points)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        dx = self.x[1] - self.x[0]
        idx = np.rint((xs - self.x[0]) / dx).astype(int)
        if np.any(np.abs(self.x[idx] - xs) > 1e-9 * max(1.0, dx)):
            raise DomainError("evaluation points must lie on the solver grid")
        return self.value[idx]


def duhamel_solve(model: LevyModel, sigma: PerturbationKernel, f: TestFunction, t: float, steps: int = 64,
                  grid: SolverGrid = SolverGrid(), tol: float = PICARD_TOL,
                  max_iter: int = PICARD_MAX_ITER) -> DuhamelResult:
    """``P_t^{+sigma} f`` on a periodic grid by Picard iteration of the Duhamel identity.

    With ``u(r) = P_r^{+sigma} f`` on ``r_j = j t / steps``, each sweep sets
    ``u(r_j) = P_{r_j} f + int_0^{r_j} P_s (sigma u(r_j - s)) ds`` with the
    trapezoid rule in ``s``. ``P_s`` acts on Fourier modes as multiplication by
    the characteristic function, which needs ``A = 0``. Sweeps stop when
    successive iterates differ by less than ``tol`` in sup norm.
    """
    if model.dim != 1:
        raise UnsupportedError("duhamel_solve is one-dimensional")
    if model.A.any():
        raise UnsupportedError("duhamel_solve needs A = 0 (translation-invariant base semigroup)")
    if f.dim != 1:
        raise DomainError("test function must be one-dimensional")
    if not t > 0.0:
        raise DomainError("t must be positive")
    if steps < 1:
        raise DomainError("need at least one time step")
    dt = t / steps
    times = dt * np.arange(steps + 1)
    cf = _cf_table(model, times, grid)
    n = grid.n
    F = np.fft.rfft(f(grid.x))
    base = cf * F[None, :]  # Fourier modes of P_{r_j} f
    U = base.copy()
    u = np.fft.irfft(U, n)
    residuals = []
    norm = sigma.norm
    if norm == 0.0:
        it = 0
    else:
        for it in range(1, max_iter + 1):
            V = np.fft.rfft(sigma_apply(sigma, u, grid), axis=-1)
            new = base.copy()
            for j in range(1, steps + 1):
                w = np.full(j + 1, dt)
                w[0] = w[-1] = 0.5 * dt
                # s_i = i dt pairs with r_j - s_i = (j - i) dt
                new[j] += np.einsum("i,ik,ik->k", w, cf[: j + 1], V[j::-1])
            u_new = np.fft.irfft(new, n)
            res = float(np.abs(u_new - u).max())
            residuals.append(res)
            u, U = u_new, new
            if res < tol:
                break
        else:
            raise NumericalError(
                "Picard iteration of the Duhamel identity did not converge",
                {"iterations": max_iter, "residuals": residuals[-5:], "t_times_norm": t * norm},
            )
    grad = np.fft.irfft(1j * grid.z * U[-1], n)
    return DuhamelResult(grid.x, u[-1], grad, t, steps, it, residuals, norm)


# --- simulation by thinning ------------------------------------------------------

def _flow_rows(model: LevyModel, X, h):
    if not model.A.any():
        return X
    return np.einsum("nij,nj->ni", expm_times(model.A, h), X)


def simulate_perturbed(model: LevyModel, sigma: PerturbationKernel, f: TestFunction, x, t: float, n: int,
                       rng: RngStream, threads: int = 1) -> MCEstimate:
    """Mean of ``f(X_t)`` for the base OU process plus jumps to ``m`` at rate ``kappa(X_{s-})``.

    Candidate events come at rate ``sup kappa`` and are accepted with
    probability ``kappa(X_{s-}) / sup kappa``; between candidates the base
    dynamics run exactly over the gap. ``extra`` records candidate and accepted
    event counts (mean and variance).
    """
    if not sigma.nonnegative:
        raise UnsupportedError("signed perturbations cannot be simulated; use duhamel_solve")
    if not t > 0.0:
        raise DomainError("t must be positive")
    d = model.dim
    if d != 1:
        raise UnsupportedError("the perturbation catalog is one-dimensional")
    x0 = np.asarray(x, dtype=float).reshape(d)
    kmax = sigma.kappa.sup

    def kernel(gen, size):
        X = np.broadcast_to(x0, (size, d)).copy()
        s = np.zeros(size)
        proposed = np.zeros(size)
        accepted = np.zeros(size)
        active = np.arange(size)
        while active.size:
            if kmax > 0.0:
                nxt = s[active] + gen.exponential(1.0 / kmax, active.size)
            else:
                nxt = np.full(active.size, np.inf)
            stop = np.minimum(nxt, t)
            h = stop - s[active]
            noise = sample_ou_noise(model, h, active.size, gen).Y
            X[active] = _flow_rows(model, X[active], h) + noise
            s[active] = stop
            event = nxt < t
            idx = active[event]
            if idx.size:
                proposed[idx] += 1.0
                acc = gen.random(idx.size) * kmax < sigma.kappa(X[idx, 0])
                hit = idx[acc]
                accepted[hit] += 1.0
                X[hit, 0] = sigma.m.sample(hit.size, gen)
            active = idx
        return f(X), proposed, accepted

    vals, proposed, accepted = run_blocks(kernel, n, rng, threads)
    return MCEstimate.from_samples(
        vals, rng,
        proposed_mean=float(proposed.mean()), proposed_var=float(proposed.var(ddof=1)),
        accepted_mean=float(accepted.mean()), accepted_var=float(accepted.var(ddof=1)),
    )
