"""Seeded samplers: Poisson paths, subordinators, subordinated BM and OU endpoints.

Every sampler takes a ``numpy.random.Generator``; :class:`RngStream` turns a
``(seed, stream, sub...)`` key into an independent generator so that Monte
Carlo work can be split into blocks without changing the draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .bernstein import BernsteinFunction, Log, Power, PowerComposition, ScaledSum, label
from .densities import JumpDensity
from .errors import AccuracyError, DomainError, UnsupportedError
from .levy_model import (
    CompoundPoissonJumps,
    LevyModel,
    SubordinatedBMComponent,
    _power_terms,
    _scalar_drift,
    _time_factor,
)

STEPS_PER_UNIT_TIME = 256
MAX_GRID_BIAS = 0.05


@dataclass(frozen=True)
class RngStream:
    """Deterministic handle on an independent random stream."""

    seed: int
    stream: int = 0
    sub: tuple = ()

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64 and 0 <= int(self.stream) < 2**64):
            raise DomainError("seed and stream ids must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),) + tuple(int(k) for k in self.sub))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.sub + tuple(keys))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or Generator, got {type(rng).__name__}")


# --- compound Poisson ------------------------------------------------------

@dataclass(frozen=True)
class CompoundPoissonPath:
    horizon: float
    times: np.ndarray
    sizes: np.ndarray

    @property
    def count(self) -> int:
        return len(self.times)

    def value(self, s: float | None = None):
        """``L_s`` (default ``s = horizon``); the empty path has value 0."""
        s = self.horizon if s is None else s
        return self.sizes[self.times <= s].sum(axis=0)


@dataclass(frozen=True)
class CompoundPoissonBatch:
    """``n`` independent paths in flat storage; path ``k`` owns ``slice(offsets[k], offsets[k+1])``."""

    horizon: np.ndarray  # (n,)
    counts: np.ndarray  # (n,)
    times: np.ndarray  # (total,)
    sizes: np.ndarray  # (total, d)
    owner: np.ndarray = field(repr=False)  # (total,) path index of each jump

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.counts)])

    def path(self, k: int) -> CompoundPoissonPath:
        o = self.offsets
        return CompoundPoissonPath(float(self.horizon[k]), self.times[o[k]:o[k + 1]], self.sizes[o[k]:o[k + 1]])

    def per_path_sum(self, values):
        """Sum per-jump rows of ``values`` into per-path rows."""
        values = np.asarray(values, dtype=float)
        out = np.zeros((self.n,) + values.shape[1:])
        np.add.at(out, self.owner, values)
        return out

    def endpoint(self, A=None):
        """``sum_i e^{(t - tau_i) A} xi_i`` per path (``A = None`` means 0)."""
        if A is None or not np.asarray(A).any():
            return self.per_path_sum(self.sizes)
        lag = self.horizon[self.owner] - self.times
        return self.per_path_sum(linalg.expm_times(A, lag, self.sizes))


def sample_poisson_batch(density: JumpDensity, t, n: int, gen: np.random.Generator) -> CompoundPoissonBatch:
    """``n`` compound Poisson paths with intensity ``density`` on ``[0, t]`` (``t`` scalar or per path)."""
    lam = density.mass
    if not lam > 0.0 or not math.isfinite(lam):
        raise DomainError(f"jump rate must be positive and finite, got {lam}")
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,)).copy()
    if np.any(t < 0.0):
        raise DomainError("horizon must be nonnegative")
    counts = gen.poisson(lam * t)
    total = int(counts.sum())
    owner = np.repeat(np.arange(n), counts)
    times = gen.random(total) * t[owner]
    sizes = density.sample(total, gen) if total else np.zeros((0, density.dim))
    # sort jump times inside each path
    order = np.lexsort((times, owner))
    return CompoundPoissonBatch(t, counts, times[order], sizes[order], owner)


def sample_compound_poisson(density: JumpDensity, t: float, rng) -> CompoundPoissonPath:
    """One path of ``L_t = sum_{i <= N_t} xi_i`` with ``N_t ~ Poisson(lambda t)``."""
    if t < 0.0:
        raise DomainError("horizon must be nonnegative")
    gen = as_generator(rng)
    return sample_poisson_batch(density, t, 1, gen).path(0)


# --- subordinators ----------------------------------------------------------

def _kanter_stable(beta: float, size, gen: np.random.Generator):
    """One-sided stable variable with ``E e^{-lambda Z} = e^{-lambda^beta}`` (Kanter's representation)."""
    u = gen.random(size) * math.pi
    e = gen.standard_exponential(size)
    a = (np.sin(beta * u) ** (beta / (1.0 - beta)) * np.sin((1.0 - beta) * u)
         / np.sin(u) ** (1.0 / (1.0 - beta)))
    return (a / e) ** ((1.0 - beta) / beta)


def _subordinator_terms(S: BernsteinFunction):
    """Decompose ``S`` into ``[(w, kind, param)]`` with samplable kinds, or raise."""
    if isinstance(S, Power):
        return [(1.0, "power", S.beta)]
    if isinstance(S, Log):
        return [(1.0, "log", None)]
    if isinstance(S, ScaledSum):
        out = []
        for w, s in S.terms:
            out.extend((w * ww, k, p) for ww, k, p in _subordinator_terms(s))
        return out
    if isinstance(S, PowerComposition):
        terms = _power_terms(S)
        if terms is not None:
            return [(w, "power", p) for w, p in terms]
    raise UnsupportedError(f"no exact subordinator sampler for S = {label(S)}")


def sample_subordinator(S: BernsteinFunction, t, rng, size=None):
    """Draw(s) of the subordinator marginal ``mu_t^S``: ``E e^{-lambda s} = e^{-t S(lambda)}``.

    ``t`` may be an array (one horizon per draw).
    """
    terms = _subordinator_terms(S)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("subordinator time must be nonnegative")
    gen = as_generator(rng)
    if size is None:
        shape = t_arr.shape
    else:
        shape = np.broadcast_shapes(t_arr.shape, (int(size),) if np.ndim(size) == 0 else tuple(size))
    out = np.zeros(shape)
    for w, kind, p in terms:
        tw = np.broadcast_to(w * t_arr, shape)
        if kind == "power" and p == 1.0:
            out = out + tw
        elif kind == "power":
            out = out + tw ** (1.0 / p) * _kanter_stable(p, shape, gen)
        else:
            # gamma process: E e^{-lambda G_s} = (1 + lambda)^{-s}
            pos = tw > 0.0
            g = np.zeros(shape)
            g[pos] = gen.standard_gamma(tw[pos])
            out = out + g
    return float(out) if out.ndim == 0 else out


def sample_subordinated_bm(S: BernsteinFunction, t, d: int, rng, size: int | None = None):
    """``sqrt(2 s) N(0, I_d)`` with ``s ~ mu_t^S``: the heat semigroup of ``Delta`` run at random time."""
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    s = np.broadcast_to(np.asarray(sample_subordinator(S, t, gen, size=n)), (n,))
    out = np.sqrt(2.0 * s)[:, None] * gen.standard_normal((n, d))
    return out[0] if size is None else out


# --- OU endpoints -----------------------------------------------------------

@dataclass(frozen=True)
class OUNoise:
    """``X_t = e^{tA} x + Y`` with ``Y`` independent of ``x``; ``floor`` holds the floor jumps."""

    Y: np.ndarray
    floor: CompoundPoissonBatch | None
    horizon: np.ndarray

    @property
    def n(self) -> int:
        return self.Y.shape[0]


@dataclass(frozen=True)
class OUEndpoint:
    X: np.ndarray
    floor_path: CompoundPoissonPath | None
    aux: np.ndarray


def _sqrt_psd(C):
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def _stable_grid_increment(comp: SubordinatedBMComponent, A, t: float, n: int, d: int, gen):
    steps = max(1, int(math.ceil(STEPS_PER_UNIT_TIME * t)))
    ds = t / steps
    bias = linalg.operator_norm(A) * ds
    if bias > MAX_GRID_BIAS:
        raise AccuracyError(
            "time grid too coarse for the subordinated component with A != 0",
            {"norm_A_times_ds": bias, "limit": MAX_GRID_BIAS, "steps": steps},
        )
    out = np.zeros((n, d))
    # left endpoints s_k = k ds, each increment mapped through e^{(t - s_k) A}
    E = linalg.expm_times(A, t - ds * np.arange(steps))
    for k in range(steps):
        inc = sample_subordinated_bm(comp.S, ds, d, gen, size=n)
        out += inc @ E[k].T
    return out


def sample_ou_noise(model: LevyModel, t, n: int, gen: np.random.Generator, *, floor_separate: bool = True) -> OUNoise:
    """``n`` draws of ``Y = X_t - e^{tA} x``.

    ``t`` may be a scalar or one horizon per draw. The components are sampled
    in a fixed order (Gaussian, then jump components in model order) so a
    given generator state always yields the same ``Y``.
    """
    d = model.dim
    A = model.A
    t_arr = np.broadcast_to(np.asarray(t, dtype=float), (n,)).copy()
    if np.any(t_arr < 0.0):
        raise DomainError("horizon must be nonnegative")
    scalar_t = bool(np.all(t_arr == t_arr[0]))
    t0 = float(t_arr[0])
    Y = np.zeros((n, d))

    if model.b.any():
        if scalar_t:
            Y += linalg.drift_integral(A, model.b, t0)
        else:
            Y += np.array([linalg.drift_integral(A, model.b, ti) for ti in t_arr])

    if model.Q.any():
        z = gen.standard_normal((n, d))
        if scalar_t:
            L = _sqrt_psd(linalg.gaussian_covariance(A, model.Q, t0))
            Y += z @ L.T
        else:
            L = _sqrt_psd(linalg.gaussian_covariance_exact(A, model.Q, t_arr))
            Y += np.einsum("nij,nj->ni", L, z)

    floor = None
    a = _scalar_drift(A)
    for comp in model.jumps:
        if isinstance(comp, CompoundPoissonJumps):
            batch = sample_poisson_batch(comp.density, t_arr, n, gen)
            Y += batch.endpoint(A)
            if comp.floor:
                floor = batch
        elif isinstance(comp, SubordinatedBMComponent):
            if not A.any():
                Y += sample_subordinated_bm(comp.S, t_arr, d, gen, size=n)
                continue
            terms = _power_terms(comp.S)
            if a is not None and terms is not None and len(terms) == 1:
                # int_0^t e^{(t-s)a} dL_s is the same stable law run for time int_0^t e^{2 p a s} ds
                w, p = terms[0]
                tau = np.array([_time_factor(a, 2.0 * p, ti) for ti in t_arr])
                Y += sample_subordinated_bm(comp.S, tau, d, gen, size=n)
            elif scalar_t:
                Y += _stable_grid_increment(comp, A, t0, n, d, gen)
            else:
                raise UnsupportedError("variable horizons need an exact OU sampler for every component")
        else:
            raise UnsupportedError(f"cannot sample component {comp!r}")
    return OUNoise(Y, floor, t_arr)


def flow(model: LevyModel, x, t):
    """``e^{tA} x`` for one point ``x`` and scalar or per-row ``t``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        return linalg.expm_times(model.A, float(t_arr), x)[0]
    return linalg.expm_times(model.A, t_arr, x)


def integrate_ou(model: LevyModel, x, t: float, rng) -> OUEndpoint:
    """One endpoint ``X_t^x`` of ``dX = AX dt + dL`` started at ``x``."""
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    gen = as_generator(rng)
    noise = sample_ou_noise(model, t, 1, gen)
    X = flow(model, x, t) + noise.Y[0]
    path = noise.floor.path(0) if noise.floor is not None else None
    return OUEndpoint(X, path, noise.Y[0])
