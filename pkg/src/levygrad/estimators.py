"""Monte Carlo estimators for ``P_t f``, ``P_t^1 f`` and their gradients, plus identity checks.

All estimators draw the OU noise ``Y`` independently of the starting point,
so ``X_t^x = e^{tA} x + Y``. Work is cut into fixed-size blocks, each with its
own random stream, which makes results independent of the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .densities import JumpDensity, LowerBoundSpec
from .errors import DomainError, NumericalError
from .functions import PathFunctional, TestFunction
from .levy_model import CompoundPoissonJumps, LevyModel, grad_density_integral, rho0_floor
from .sampling import RngStream, flow, sample_ou_noise, sample_poisson_batch

BLOCK = 2**15


def default_threads() -> int:
    return os.cpu_count() or 1


def run_blocks(kernel, n: int, rng: RngStream, threads: int = 1, block: int = BLOCK):
    """Evaluate ``kernel(generator, m)`` on blocks of ``m <= block`` samples and stack the results.

    Block ``k`` always uses ``rng.child(k)``, so the output does not depend on ``threads``.
    ``kernel`` returns an array or a tuple of arrays with the sample axis first.
    """
    if n < 1:
        raise DomainError("need at least one sample")
    sizes = [block] * (n // block) + ([n % block] if n % block else [])
    jobs = [(rng.child(k), m) for k, m in enumerate(sizes)]

    def work(job):
        stream, m = job
        return kernel(stream.generator(), m)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n: int
    seed: tuple = ()
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, rng: RngStream | None = None, **extra):
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        if n < 2:
            raise DomainError("need at least two samples for a standard error")
        se = float(samples.std(ddof=1) / math.sqrt(n))
        return cls(float(samples.mean()), se, n, _seed_info(rng), extra)

    def z_score(self, target: float) -> float:
        diff = self.value - target
        if self.stderr == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.stderr

    def to_record(self, **context):
        rec = dict(context)
        rec.update({"value": [self.value], "stderr": [self.stderr], "n": self.n, "seed": list(self.seed)})
        rec.update(self.extra)
        return rec


@dataclass(frozen=True)
class GradientEstimate:
    value: np.ndarray
    stderr: np.ndarray
    n: int
    seed: tuple = ()
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, rng: RngStream | None = None, **extra):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        n = samples.shape[0]
        if n < 2:
            raise DomainError("need at least two samples for a standard error")
        se = samples.std(axis=0, ddof=1) / math.sqrt(n)
        return cls(samples.mean(axis=0), se, n, _seed_info(rng), extra)

    def to_record(self, **context):
        rec = dict(context)
        rec.update({"value": self.value.tolist(), "stderr": self.stderr.tolist(), "n": self.n,
                    "seed": list(self.seed)})
        rec.update(self.extra)
        return rec


def _seed_info(rng):
    if rng is None:
        return ()
    return (int(rng.seed), int(rng.stream)) + tuple(int(k) for k in rng.sub)


def _check_n(n: int):
    if n < 2:
        raise DomainError("need at least two samples")


def _point(model: LevyModel, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (model.dim,):
        raise DomainError(f"starting point must have dimension {model.dim}")
    return x


def _floor(model: LevyModel) -> CompoundPoissonJumps:
    comp = model.floor_component
    if comp is None:
        raise DomainError("model has no floor compound Poisson component")
    return comp


# --- semigroup values ---------------------------------------------------------

def estimate_Pt(model: LevyModel, f: TestFunction, x, t: float, n: int, rng: RngStream,
                threads: int = 1) -> MCEstimate:
    """``(1/n) sum f(X_t^x)``, unbiased for ``P_t f(x)``."""
    _check_n(n)
    x = _point(model, x)
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    m = flow(model, x, t)

    def kernel(gen, size):
        noise = sample_ou_noise(model, t, size, gen)
        return f(m + noise.Y)

    return MCEstimate.from_samples(run_blocks(kernel, n, rng, threads), rng, estimator="P_t")


def estimate_Pt1(model: LevyModel, f: TestFunction, x, t: float, n: int, rng: RngStream,
                 threads: int = 1) -> MCEstimate:
    """``E f(X_t^x) 1{N_t >= 1}`` where ``N_t`` counts floor jumps only."""
    _check_n(n)
    _floor(model)
    x = _point(model, x)
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    if t == 0.0:
        return MCEstimate(0.0, 0.0, n, _seed_info(rng), {"estimator": "P_t^1"})
    m = flow(model, x, t)

    def kernel(gen, size):
        noise = sample_ou_noise(model, t, size, gen)
        return f(m + noise.Y) * (noise.floor.counts >= 1)

    return MCEstimate.from_samples(run_blocks(kernel, n, rng, threads), rng, estimator="P_t^1")


# --- gradients ----------------------------------------------------------------

def jump_weights(model: LevyModel, floor_batch) -> np.ndarray:
    """``(1/N) sum_i e^{A* tau_i} grad log rho_0(xi_i)`` per path (0 when ``N = 0``)."""
    rho = _floor(model).density
    g = rho.grad_log(floor_batch.sizes) if floor_batch.sizes.shape[0] else np.zeros((0, model.dim))
    if model.A.any():
        g = linalg.expm_times(model.A.T, floor_batch.times, g)
    total = floor_batch.per_path_sum(g)
    counts = floor_batch.counts
    return np.where(counts[:, None] > 0, total / np.maximum(counts, 1)[:, None], 0.0)


def derivative_formula(model: LevyModel, f: TestFunction, x, t: float, n: int, rng: RngStream,
                       threads: int = 1, check: bool = True) -> GradientEstimate:
    """Unbiased jump-weight estimator of ``grad P_t^1 f(x)``.

    Per sample ``-f(X_t^x) 1{N_t>=1} (1/N_t) sum_i e^{A* tau_i} grad log rho_0(xi_i)``.
    Refuses densities whose mollified gradient integral is not finite.
    """
    _check_n(n)
    comp = _floor(model)
    x = _point(model, x)
    if not t > 0.0:
        raise DomainError("t must be positive")
    if check:
        report = grad_density_integral(comp.density)
        if not report.finite:
            raise NumericalError("floor density fails the gradient integrability check",
                                 {"integral": float(report.integral),
                                  "mollified": float(report.mollified_integral), "epsilon": report.epsilon})
    m = flow(model, x, t)

    def kernel(gen, size):
        noise = sample_ou_noise(model, t, size, gen)
        w = jump_weights(model, noise.floor)
        return -f(m + noise.Y)[:, None] * w, np.linalg.norm(w, axis=1)

    samples, wnorm = run_blocks(kernel, n, rng, threads)
    return GradientEstimate.from_samples(
        samples, rng, estimator="derivative_formula",
        weight_norm_mean=float(wnorm.mean()), weight_norm_stderr=float(wnorm.std(ddof=1) / math.sqrt(n)),
    )


def finite_difference(model: LevyModel, f: TestFunction, x, t: float, n: int, h: float = 1e-3,
                      direction=None, rng: RngStream | None = None, threads: int = 1,
                      target: str = "P_t") -> GradientEstimate:
    """Central differences of ``P_t f`` (or ``P_t^1 f``) with common random numbers.

    Both points ``x +- h e`` share the same noise draws, so the per-sample
    differences carry the stderr. ``direction=None`` returns the full gradient.
    """
    if not h > 0.0:
        raise DomainError("h must be positive")
    if rng is None:
        raise DomainError("finite_difference needs an RngStream")
    _check_n(n)
    x = _point(model, x)
    if target == "P_t^1":
        _floor(model)
    elif target != "P_t":
        raise DomainError(f"unknown target {target!r}")
    if direction is None:
        dirs = np.eye(model.dim)
    else:
        e = np.asarray(direction, dtype=float).reshape(-1)
        dirs = (e / np.linalg.norm(e))[None, :]
    plus = np.array([flow(model, x + h * e, t) for e in dirs])
    minus = np.array([flow(model, x - h * e, t) for e in dirs])

    def kernel(gen, size):
        noise = sample_ou_noise(model, t, size, gen)
        mask = (noise.floor.counts >= 1) if target == "P_t^1" else 1.0
        cols = [(f(p + noise.Y) - f(q + noise.Y)) * mask / (2.0 * h) for p, q in zip(plus, minus)]
        return np.stack(cols, axis=1)

    return GradientEstimate.from_samples(run_blocks(kernel, n, rng, threads), rng,
                                         estimator=f"finite_difference[{target}]", h=h)


# --- identity checks ----------------------------------------------------------

@dataclass(frozen=True)
class IdentityCheck:
    lhs: MCEstimate
    rhs: MCEstimate
    combined_stderr: float
    z: float
    passed: bool
    inconclusive: bool = False
    label: str = ""

    def to_record(self, **context):
        rec = dict(context)
        rec.update({"check": self.label, "lhs": self.lhs.value, "lhs_stderr": self.lhs.stderr,
                    "rhs": self.rhs.value, "rhs_stderr": self.rhs.stderr,
                    "combined_stderr": self.combined_stderr, "z": self.z, "passed": self.passed,
                    "inconclusive": self.inconclusive})
        return rec


def _compare(lhs: MCEstimate, rhs: MCEstimate, label: str, k: float = 3.0, inconclusive_above=None):
    se = math.hypot(lhs.stderr, rhs.stderr)
    diff = lhs.value - rhs.value
    z = 0.0 if diff == 0.0 else (diff / se if se > 0.0 else math.copysign(math.inf, diff))
    inconclusive = inconclusive_above is not None and se > inconclusive_above
    return IdentityCheck(lhs, rhs, se, z, abs(z) <= k and not inconclusive, inconclusive, label)


def random_shift_check(rho: JumpDensity, t: float, F: PathFunctional, n: int, rng: RngStream,
                       threads: int = 1, k: float = 3.0) -> IdentityCheck:
    """Two-sided Monte Carlo check of the random-shift identity

    ``E[F(L) 1{N_t >= 1}] = lambda t E[F(L + xi 1_{[tau, inf)}) / (N_t + 1)]``

    with ``(tau, xi) ~ U[0, t] x rho/lambda`` independent of ``L``. The two sides
    use independent streams.
    """
    if not isinstance(F, PathFunctional) or not math.isfinite(F.bound):
        raise DomainError("the functional must be a bounded PathFunctional")
    _check_n(n)
    if not t > 0.0:
        raise DomainError("t must be positive")
    lam = rho.mass

    def left(gen, size):
        batch = sample_poisson_batch(rho, t, size, gen)
        return F(batch.endpoint(), batch.counts) * (batch.counts >= 1)

    def right(gen, size):
        batch = sample_poisson_batch(rho, t, size, gen)
        gen.random(size)  # the extra jump time; L_t does not depend on it
        xi = rho.sample(size, gen)
        counts = batch.counts + 1
        return lam * t * F(batch.endpoint() + xi, counts) / counts

    lhs = MCEstimate.from_samples(run_blocks(left, n, rng.child(0), threads), rng.child(0))
    rhs = MCEstimate.from_samples(run_blocks(right, n, rng.child(1), threads), rng.child(1))
    return _compare(lhs, rhs, f"random_shift[{F.name}, lambda*t={lam * t:g}]", k)


def decomposition_check(model: LevyModel, spec: LowerBoundSpec | JumpDensity, f: TestFunction, x, t: float,
                        n: int, rng: RngStream, n_in: int | None = None, threads: int = 1,
                        k: float = 3.0) -> IdentityCheck:
    """Check ``P_t f(x) = e^{lambda0 t} (Pbar_t f(x) - E[1{Nbar >= 1} P_t f(x + e^{-tA} Zbar_t)])``.

    ``Pbar`` is the semigroup of the model with ``rho_0`` added to ``nu``;
    ``Zbar_t = sum e^{(t - tau_i) A} xi_i`` is its extra floor part. The inner
    ``P_t f`` is a fresh Monte Carlo estimate with ``n_in`` samples per outer draw.
    """
    _check_n(n)
    x = _point(model, x)
    if not t > 0.0:
        raise DomainError("t must be positive")
    rho0 = spec if isinstance(spec, JumpDensity) else rho0_floor(spec, model.dim)
    lam0 = rho0.mass
    n_in = int(n_in or max(2, round(math.sqrt(n))))
    m = flow(model, x, t)
    boost = math.exp(lam0 * t)

    lhs = estimate_Pt(model, f, x, t, n, rng.child(0), threads)

    def outer(gen, size):
        noise = sample_ou_noise(model, t, size, gen)
        zbar = sample_poisson_batch(rho0, t, size, gen)
        Z = zbar.endpoint(model.A)
        first = f(m + noise.Y + Z)
        jumped = np.flatnonzero(zbar.counts >= 1)
        inner = np.zeros(size)
        if jumped.size:
            # x + e^{-tA} Z is mapped by the flow to e^{tA} x + Z
            inner_noise = sample_ou_noise(model, t, jumped.size * n_in, gen).Y.reshape(jumped.size, n_in, -1)
            inner[jumped] = _inner_mean(f, m + Z[jumped], inner_noise)
        return boost * (first - inner)

    rhs = MCEstimate.from_samples(run_blocks(outer, n, rng.child(1), threads, block=max(1, BLOCK // n_in)),
                                  rng.child(1), n_in=n_in)
    return _compare(lhs, rhs, f"decomposition[{f.name}, lambda0*t={lam0 * t:g}]", k, inconclusive_above=0.1)


def _inner_mean(f: TestFunction, centers, noise):
    k, n_in, d = noise.shape
    pts = (centers[:, None, :] + noise).reshape(k * n_in, d)
    return f(pts).reshape(k, n_in).mean(axis=1)
