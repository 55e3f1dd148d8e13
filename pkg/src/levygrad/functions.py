"""Bounded test functions ``f`` (``|f| <= 1``) and bounded path functionals ``F``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


def _rows(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if d == 1 else x[None, :]
    return x


@dataclass(frozen=True)
class TestFunction:
    """Catalog function of ``<u, x>``.

    ``kind`` is one of ``sin``, ``cos``, ``tanh``, ``sign`` (of ``x_1``),
    ``halfspace`` (``1{<u,x> >= c}``) and ``constant``.
    """

    __test__ = False  # not a pytest class

    kind: str
    u: tuple = (1.0,)
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sin", "cos", "tanh", "sign", "halfspace", "constant"):
            raise ConfigError(f"unknown test function {self.kind!r}")
        object.__setattr__(self, "u", tuple(float(v) for v in np.atleast_1d(self.u)))
        if self.kind == "constant" and abs(self.c) > 1.0:
            raise DomainError("constant test functions are normalised to |c| <= 1")

    @property
    def dim(self) -> int:
        return len(self.u)

    @property
    def smooth(self) -> bool:
        return self.kind in ("sin", "cos", "tanh", "constant")

    @property
    def sup_norm(self) -> float:
        return abs(self.c) if self.kind == "constant" else 1.0

    @property
    def name(self) -> str:
        if self.kind == "constant":
            return f"const({self.c:g})"
        if self.kind == "sign":
            return "sign"
        u = ",".join(f"{v:g}" for v in self.u)
        return f"{self.kind}<({u}),x>" + (f">={self.c:g}" if self.kind == "halfspace" else "")

    def _proj(self, x):
        return _rows(x, self.dim) @ np.asarray(self.u)

    def __call__(self, x):
        x = _rows(x, self.dim)
        k = self.kind
        if k == "constant":
            return np.full(x.shape[0], self.c)
        if k == "sign":
            return np.where(x[:, 0] >= 0.0, 1.0, -1.0)
        p = self._proj(x)
        if k == "sin":
            return np.sin(p)
        if k == "cos":
            return np.cos(p)
        if k == "tanh":
            return np.tanh(p)
        return np.where(p >= self.c, 1.0, 0.0)

    def grad(self, x):
        """Closed-form gradient (smooth members only)."""
        x = _rows(x, self.dim)
        k = self.kind
        if k == "constant":
            return np.zeros_like(x)
        if not self.smooth:
            raise DomainError(f"{self.name} is not differentiable")
        p = self._proj(x)
        if k == "sin":
            g = np.cos(p)
        elif k == "cos":
            g = -np.sin(p)
        else:
            g = 1.0 / np.cosh(p) ** 2
        return g[:, None] * np.asarray(self.u)[None, :]

    def steps_1d(self):
        """For 1-D step functions: ``(v0, [(location, height), ...])`` with ``f = v0 + sum h 1{x >= c}``."""
        if self.dim != 1 or self.smooth:
            return None
        if self.kind == "sign":
            return -1.0, [(0.0, 2.0)]
        u = self.u[0]
        if u == 0.0:
            return (1.0 if self.c <= 0.0 else 0.0), []
        loc = self.c / u
        return (0.0, [(loc, 1.0)]) if u > 0.0 else (1.0, [(loc, -1.0)])

    def to_config(self):
        return {"kind": self.kind, "u": list(self.u), "c": self.c}


def parse_test_function(spec: str | dict, d: int = 1) -> TestFunction:
    """Parse ``"sin"``, ``"cos:2"``, ``"halfspace:1:0.5"`` or a config dict."""
    if isinstance(spec, TestFunction):
        return spec
    if isinstance(spec, dict):
        return TestFunction(spec["kind"], tuple(spec.get("u", [1.0] + [0.0] * (d - 1))), float(spec.get("c", 0.0)))
    parts = str(spec).split(":")
    kind = parts[0].strip().lower()
    u = [1.0] + [0.0] * (d - 1)
    if kind in ("const", "constant", "one", "1"):
        return TestFunction("constant", tuple(u), float(parts[1]) if len(parts) > 1 else 1.0)
    if len(parts) > 1:
        u[0] = float(parts[1])
    c = float(parts[2]) if len(parts) > 2 else 0.0
    return TestFunction(kind, tuple(u), c)


@dataclass(frozen=True)
class PathFunctional:
    """Bounded functional ``F(L_t, N_t)`` of a compound Poisson path."""

    name: str
    func: object
    bound: float

    def __call__(self, value, count):
        return np.asarray(self.func(np.asarray(value, dtype=float), np.asarray(count)), dtype=float)


def path_functional(name: str) -> PathFunctional:
    if name in ("1", "one", "const"):
        return PathFunctional("1", lambda v, n: np.ones(len(n)), 1.0)
    if name in ("sin", "sin(L_t)"):
        return PathFunctional("sin(L_t)", lambda v, n: np.sin(v[:, 0]), 1.0)
    if name in ("even", "N_even"):
        return PathFunctional("1{N_t even}", lambda v, n: (n % 2 == 0).astype(float), 1.0)
    raise ConfigError(f"unknown path functional {name!r}")
