"""Named models used by the command line and the tests, and model-file loading."""

from __future__ import annotations

import json
import os

import numpy as np

from .bernstein import Power, scaled
from .densities import GaussianDensity, LowerBoundSpec
from .errors import ConfigError
from .levy_model import CompoundPoissonJumps, LevyModel, SubordinatedBMComponent, rho0_floor, stable_isotropic


def _stable(alpha: float, name: str) -> LevyModel:
    comp = stable_isotropic(alpha, symbol_scale=1.0, d=1)
    spec = LowerBoundSpec(scaled(Power(alpha / 2.0), comp.stable_scale))
    return LevyModel(1, [[0.0]], [0.0], [[0.0]], (comp,), spec, name)


def _gaussian_floor(A: float, name: str, mass: float = 1.0) -> LevyModel:
    floor = CompoundPoissonJumps(GaussianDensity(mass, 1.0, 1), floor=True)
    return LevyModel(1, [[A]], [0.0], [[0.0]], (floor,), None, name)


def _subordinated(beta: float, name: str) -> LevyModel:
    S = Power(beta)
    return LevyModel(1, [[0.0]], [0.0], [[0.0]], (SubordinatedBMComponent(S),), None, name)


def _builders():
    return {
        "gaussian": lambda: LevyModel(1, [[0.0]], [0.0], [[1.0]], (), None, "gaussian"),
        "gaussian-ou": lambda: LevyModel(1, [[-1.0]], [0.0], [[1.0]], (), None, "gaussian-ou"),
        "heat": lambda: _subordinated(1.0, "heat"),
        "subbm-half": lambda: _subordinated(0.5, "subbm-half"),
        "subbm-3q": lambda: _subordinated(0.75, "subbm-3q"),
        "cauchy": lambda: _stable(1.0, "cauchy"),
        "stable15": lambda: _stable(1.5, "stable15"),
        "stable15-ou": lambda: _stable(1.5, "stable15-ou").with_A([[-1.0]]),
        "gaussian-floor": lambda: _gaussian_floor(0.0, "gaussian-floor"),
        "gaussian-floor-contract": lambda: _gaussian_floor(-1.0, "gaussian-floor-contract"),
        "gaussian-floor-expand": lambda: _gaussian_floor(1.0, "gaussian-floor-expand"),
        "gaussian-floor-2d": lambda: LevyModel(
            2, -np.eye(2), [0.0, 0.0], np.zeros((2, 2)),
            (CompoundPoissonJumps(GaussianDensity(1.0, 1.0, 2), floor=True),), None, "gaussian-floor-2d"),
        "power-floor": lambda: LevyModel(
            1, [[0.0]], [0.0], [[1.0]],
            (CompoundPoissonJumps(_power_floor_density(), floor=True),), None, "power-floor"),
    }


def _power_floor_density():
    return rho0_floor(LowerBoundSpec(Power(0.5), 1.0), 1)


MODEL_NAMES = tuple(sorted(_builders()))


def named_model(name: str) -> LevyModel:
    try:
        return _builders()[name]()
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}") from None


def load_model(ref) -> LevyModel:
    """A catalog name, a path to a JSON model file, or an inline config dict."""
    if isinstance(ref, LevyModel):
        return ref
    if isinstance(ref, dict):
        return LevyModel.from_config(ref)
    ref = str(ref)
    if ref in _builders():
        return named_model(ref)
    if not os.path.exists(ref):
        raise ConfigError(f"model file not found: {ref}")
    try:
        with open(ref, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model file {ref}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("a model file must hold a JSON object")
    return LevyModel.from_config(cfg)


def lambda0_of(model: LevyModel) -> float:
    """Rate of the floor: the floor component if present, else the declared lower bound."""
    comp = model.floor_component
    if comp is not None:
        return comp.rate
    spec = model.lower_bound
    if spec is not None and spec.finite:
        return rho0_floor(spec, model.dim).mass
    return 0.0
