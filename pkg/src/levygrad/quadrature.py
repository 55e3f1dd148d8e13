"""Adaptive quadrature helpers built on QUADPACK's Gauss-Kronrod rules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NumericalError


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for every quadrature in the package.

    ``tail_tol`` is the absolute budget for the truncated tail of half-line
    integrals; ``max_panels`` caps the number of geometric panels.
    """

    epsabs: float = 1e-14
    epsrel: float = 1e-12
    limit: int = 200
    tail_tol: float = 1e-10
    max_panels: int = 1100


DEFAULT_QUAD = QuadratureConfig()


def quad(func, a, b, cfg: QuadratureConfig = DEFAULT_QUAD, **kwargs) -> float:
    """``scipy.integrate.quad`` that raises :class:`NumericalError` instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                func, a, b, epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit, **kwargs
            )
        except integrate.IntegrationWarning as exc:
            # retry once with a relaxed target before giving up
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(
                func, a, b, epsabs=max(cfg.epsabs, 1e-12), epsrel=max(cfg.epsrel, 1e-9),
                limit=4 * cfg.limit, **kwargs
            )
            if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
                raise NumericalError(
                    "quadrature did not converge",
                    {"interval": (a, b), "estimate": val, "abserr": err, "cause": str(exc)},
                ) from exc
    if not np.isfinite(val):
        raise NumericalError("quadrature returned a non-finite value", {"interval": (a, b)})
    return float(val)


@dataclass(frozen=True)
class HalfLineResult:
    value: float
    tail_estimate: float
    upper: float
    panels: int
    converged: bool


def integrate_half_line(func, cfg: QuadratureConfig = DEFAULT_QUAD, first: float = 1.0) -> HalfLineResult:
    """Integrate a nonnegative, eventually decreasing ``func`` over ``[0, inf)``.

    The range is cut into ``[0, first]`` and geometric panels
    ``[first*2**k, first*2**(k+1)]``. Panel contributions of a decaying tail
    shrink geometrically, so the remainder after panel ``k`` is estimated as
    ``I_k * q / (1 - q)`` with ``q = I_k / I_{k-1}``. Integration stops once that
    estimate falls below ``cfg.tail_tol``.
    """
    total = quad(func, 0.0, first, cfg)
    lo = first
    prev = None
    tail = math.inf
    for k in range(cfg.max_panels):
        hi = 2.0 * lo
        if not math.isfinite(hi):
            break
        piece = quad(func, lo, hi, cfg)
        total += piece
        lo = hi
        if prev is not None and prev > 0.0:
            q = piece / prev
            if q < 1.0:
                tail = piece * q / (1.0 - q)
                if tail < cfg.tail_tol and piece < cfg.tail_tol:
                    return HalfLineResult(total, tail, lo, k + 1, True)
        elif prev == 0.0 and piece == 0.0:
            return HalfLineResult(total, 0.0, lo, k + 1, True)
        prev = piece
    return HalfLineResult(total, tail, lo, cfg.max_panels, False)


def gauss_legendre(a: float, b: float, n: int = 32, panels: int = 4):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def simpson_weights(a: float, b: float, n_nodes: int = 129):
    """Composite Simpson nodes/weights; ``n_nodes`` must be odd."""
    if n_nodes % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes")
    nodes = np.linspace(a, b, n_nodes)
    h = (b - a) / (n_nodes - 1)
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return nodes, w * h / 3.0
