"""Experiment runner: ``levygrad <experiment> [flags]``.

Each run writes one table (CSV or JSON). With ``--out`` a manifest
``<out>.manifest.json`` is written next to it, naming the axes and holding the
summary. CSV output starts with a single ``#`` header line carrying the
timestamp, config hash and seed; everything after it depends only on the
config and seed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bernstein import LogPower, Power, eval_alpha, from_config as bernstein_from_config, is_divergent, label
from .bounds import bound_cor13, bound_cor22, bound_G, bound_G2, bound_thm31, fit_decay_rate
from .catalog import MODEL_NAMES, load_model
from .densities import LowerBoundSpec, density_from_config
from .errors import AccuracyError, ConfigError, DomainError, GridError, NumericalError, UnsupportedError
from .estimators import (
    decomposition_check,
    default_threads,
    derivative_formula,
    estimate_Pt,
    finite_difference,
    random_shift_check,
)
from .functions import parse_test_function, path_functional
from .levy_model import LevyModel, SubordinatedBMComponent, rho0_floor
from .perturbation import PerturbationKernel, Rate, SolverGrid, duhamel_solve, perturbation_from_config, simulate_perturbed
from .sampling import RngStream
from .spectral import density_from_cf, semigroup_and_gradient, sup_gradient

KINDS = ("alpha", "bounds", "gradient", "shift-check", "decomposition", "rate-fit", "perturb", "oracle-compare")
STATISTICAL = ("gradient", "shift-check", "decomposition", "perturb", "oracle-compare")
DEFAULT_MODEL = {
    "bounds": "stable15",
    "gradient": "gaussian-floor",
    "shift-check": "gaussian-floor",
    "decomposition": "gaussian-floor",
    "rate-fit": "stable15",
    "perturb": "gaussian",
    "oracle-compare": "cauchy",
}
DEFAULT_F = {"perturb": "cos", "oracle-compare": "cos", "bounds": "sign", "rate-fit": "sign"}
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_STAT = 0, 2, 3, 4
# fields that do not change results
_HASH_EXCLUDE = ("out", "format", "threads")


@dataclass
class ExperimentConfig:
    kind: str
    model: object = None
    f: str | None = None
    t: list = field(default_factory=lambda: [1.0])
    x: list = field(default_factory=lambda: [0.0])
    n: int = 10000
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    S: object = None
    functional: list = field(default_factory=lambda: ["1"])
    h: float = 1e-3
    n_in: int = 100
    sigma: object = None
    rho0: object = None
    steps: int = 64

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.kind in STATISTICAL and self.n < 100:
            raise ConfigError("statistical experiments need n >= 100")
        if not self.t or any(not (float(v) > 0.0) for v in self.t):
            raise ConfigError("t grid must be nonempty and positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.model is None and self.kind in DEFAULT_MODEL and not (self.kind in ("rate-fit", "bounds") and self.S):
            self.model = DEFAULT_MODEL[self.kind]
        if self.f is None:
            self.f = DEFAULT_F.get(self.kind, "sin")
        self.t = [float(v) for v in self.t]
        return self

    def canonical(self) -> dict:
        d = asdict(self)
        for k in _HASH_EXCLUDE:
            d.pop(k)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Result:
    columns: list
    rows: list
    axes: dict
    summary: dict = field(default_factory=dict)
    failures: int = 0


class _Streams:
    """Hands out ``RngStream(seed, k)`` for ``k = 0, 1, ...`` in call order."""

    def __init__(self, seed: int):
        self.seed = seed
        self.k = 0

    def next(self) -> RngStream:
        s = RngStream(self.seed, self.k)
        self.k += 1
        return s


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else _fmt(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _model(cfg: ExperimentConfig) -> LevyModel:
    return load_model(cfg.model)


def _points(model: LevyModel, xs):
    out = []
    for x in xs:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if arr.size == 1 and model.dim > 1:
            arr = np.concatenate([arr, np.zeros(model.dim - 1)])
        if arr.size != model.dim:
            raise ConfigError(f"x point {x!r} does not have dimension {model.dim}")
        out.append(arr)
    return out


def _bernstein(spec):
    if spec is None:
        return Power(1.0)
    if isinstance(spec, str):
        s = spec.strip()
        if s.startswith("{"):
            return bernstein_from_config(json.loads(s))
        kind, _, arg = s.partition(":")
        kind = kind.lower()
        if kind == "power":
            return Power(float(arg or 1.0))
        if kind in ("log_power", "logpower"):
            return LogPower(float(arg or 1.0))
        return bernstein_from_config({"kind": kind})
    return bernstein_from_config(spec)


def _spectral_ok(model: LevyModel) -> bool:
    return model.dim == 1 and not model.has_atoms


# --- experiments ----------------------------------------------------------------

def run_alpha(cfg, streams):
    S = _bernstein(cfg.S)
    rows = []
    for t in cfg.t:
        a = eval_alpha(S, t)
        rows.append([t, math.inf if is_divergent(a) else float(a)])
    return Result(["t", "alpha"], rows, {"x": "t", "y": "alpha"}, {"S": label(S)})


def run_bounds(cfg, streams):
    rows = []
    summary = {}
    columns = ["bound", "t", "rhs", "empirical", "stderr", "ratio"]
    if cfg.S and cfg.model is None:
        rep = bound_G(LowerBoundSpec(_bernstein(cfg.S)), 0.0, 0.0, 1, cfg.t)
        rows += [["G"] + list(r) for r in rep.rows()]
        summary["G"] = rep.to_dict()["constants"]
        return Result(columns, rows, {"x": "t", "y": "rhs"}, summary)
    model = _model(cfg)
    f = parse_test_function(cfg.f, model.dim)
    spectral = _spectral_ok(model)
    spec = model.lower_bound
    if spec is not None:
        reports = [bound_G(spec, model.theta, model.A_norm, model.dim, cfg.t)]
        if not model.A.any():
            reports.append(bound_G2(spec, model.dim, cfg.t))
        for rep in reports:
            if spectral:
                rep.attach_empirical([sup_gradient(model, t, f) for t in cfg.t])
            rows += [[rep.bound_id] + list(r) for r in rep.rows()]
            summary[rep.bound_id] = _json_value(rep.to_dict()["constants"])
    comp = model.floor_component
    if comp is not None:
        lam0 = comp.rate
        x = _points(model, cfg.x)[0]
        for t in cfg.t:
            b = bound_thm31(comp.density, model.theta, lam0, t)
            est = derivative_formula(model, f, x, t, cfg.n, streams.next(), cfg.threads)
            k = int(np.argmax(np.abs(est.value)))
            emp, se = abs(float(est.value[k])), float(est.stderr[k])
            rows.append(["thm31", t, b, emp, se, emp / b])
            if emp > b + 3.0 * se:
                summary.setdefault("violations", []).append(t)
        summary["thm31"] = {"lambda0": lam0, "theta": model.theta}
    sub = [j for j in model.jumps if isinstance(j, SubordinatedBMComponent)]
    if len(sub) == 1 and len(model.jumps) == 1 and not model.Q.any() and not model.A.any():
        for t in cfg.t:
            emp = sup_gradient(model, t, f) if spectral else math.nan
            for side in ("upper", "lower"):
                v = bound_cor22(sub[0].S, t, side)
                rows.append([f"cor22-{side}", t, v.verified, emp, 0.0, emp / v.verified])
                rows.append([f"cor22-{side}-printed", t, v.printed, emp, 0.0, emp / v.printed])
    if not rows:
        raise ConfigError("model declares neither a lower bound nor a floor component nor a subordinated part")
    failures = len(summary.get("violations", []))
    return Result(columns, rows, {"x": "t", "y": "rhs", "series": "bound"}, summary, failures)


def run_gradient(cfg, streams):
    model = _model(cfg)
    f = parse_test_function(cfg.f, model.dim)
    floor = model.floor_component is not None
    rows = []
    for t in cfg.t:
        table = density_from_cf(model, t) if _spectral_ok(model) else None
        for x in _points(model, cfg.x):
            ests = []
            if floor:
                ests.append(("derivative_formula[P_t^1]",
                             derivative_formula(model, f, x, t, cfg.n, streams.next(), cfg.threads)))
                ests.append(("finite_difference[P_t^1]",
                             finite_difference(model, f, x, t, cfg.n, cfg.h, None, streams.next(), cfg.threads,
                                               target="P_t^1")))
            ests.append(("finite_difference[P_t]",
                         finite_difference(model, f, x, t, cfg.n, cfg.h, None, streams.next(), cfg.threads)))
            for name, est in ests:
                for i in range(model.dim):
                    rows.append([t, _fmt_point(x), i, name, float(est.value[i]), float(est.stderr[i])])
            if table is not None:
                sv = semigroup_and_gradient(table, f, [x[0]], model)
                rows.append([t, _fmt_point(x), 0, "spectral[P_t]", float(sv.gradient[0]), 0.0])
    return Result(["t", "x", "coord", "estimator", "value", "stderr"], rows,
                  {"x": "t", "y": "value", "series": "estimator"})


def _fmt_point(x):
    return ";".join(_fmt(float(v)) for v in x)


def run_shift_check(cfg, streams):
    model = _model(cfg)
    comp = model.floor_component
    if comp is None:
        raise ConfigError("shift-check needs a model with a floor compound Poisson component")
    rho = comp.density
    rows, failures = [], 0
    for t in cfg.t:
        for name in cfg.functional:
            F = path_functional(name)
            chk = random_shift_check(rho, t, F, cfg.n, streams.next(), cfg.threads)
            analytic = -math.expm1(-rho.mass * t) if F.name == "1" else math.nan
            ok = chk.passed
            if F.name == "1":
                ok = ok and abs(chk.lhs.value - analytic) <= 3.0 * chk.lhs.stderr
            failures += not ok
            rows.append([t, rho.mass * t, F.name, chk.lhs.value, chk.lhs.stderr, chk.rhs.value, chk.rhs.stderr,
                         chk.z, analytic, ok])
    return Result(["t", "lambda_t", "F", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "z", "analytic", "passed"],
                  rows, {"x": "lambda_t", "y": "lhs", "series": "F"}, {}, failures)


def run_decomposition(cfg, streams):
    model = _model(cfg)
    f = parse_test_function(cfg.f, model.dim)
    if cfg.rho0 is not None:
        rho0 = density_from_config(cfg.rho0, model.dim, model.lower_bound)
    elif model.lower_bound is not None and model.lower_bound.finite:
        rho0 = rho0_floor(model.lower_bound, model.dim)
    elif model.floor_component is not None:
        rho0 = model.floor_component.density
    else:
        raise ConfigError("decomposition needs rho0: a finite lower bound, a floor component or a 'rho0' entry")
    rows, failures = [], 0
    for t in cfg.t:
        for x in _points(model, cfg.x):
            chk = decomposition_check(model, rho0, f, x, t, cfg.n, streams.next(), cfg.n_in, cfg.threads)
            failures += not chk.passed
            rows.append([t, _fmt_point(x), rho0.mass * t, chk.lhs.value, chk.lhs.stderr, chk.rhs.value,
                         chk.rhs.stderr, chk.z, chk.passed, chk.inconclusive])
    return Result(["t", "x", "lambda0_t", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "z", "passed", "inconclusive"],
                  rows, {"x": "t", "y": "lhs"}, {"n_in": cfg.n_in}, failures)


def run_rate_fit(cfg, streams):
    if len(cfg.t) < 5:
        raise ConfigError("rate-fit needs at least 5 time points")
    if cfg.S and cfg.model is None:
        S = _bernstein(cfg.S)
        rep = bound_G(LowerBoundSpec(S), 0.0, 0.0, 1, cfg.t)
        mode = "logloglog" if isinstance(S, LogPower) else "loglog"
        fit = fit_decay_rate(cfg.t, rep.log_rhs, mode=mode, values_are_log=True)
        rows = [[t, v, "bound_G_shape"] for t, v in zip(cfg.t, rep.log_rhs)]
        return Result(["t", "log_value", "source"], rows, {"x": "t", "y": "log_value"},
                      {"fit": fit.to_dict(), "S": label(S)})
    model = _model(cfg)
    if not _spectral_ok(model):
        raise ConfigError("rate-fit on a model needs a one-dimensional model with a density (spectral oracle)")
    f = parse_test_function(cfg.f, 1)
    vals = [sup_gradient(model, t, f) for t in cfg.t]
    fit = fit_decay_rate(cfg.t, vals)
    rows = [[t, v, "spectral_sup_gradient"] for t, v in zip(cfg.t, vals)]
    return Result(["t", "value", "source"], rows, {"x": "t", "y": "value"}, {"fit": fit.to_dict()})


def run_perturb(cfg, streams):
    model = _model(cfg)
    f = parse_test_function(cfg.f, 1)
    sigma = perturbation_from_config(cfg.sigma) if cfg.sigma else PerturbationKernel(Rate("constant", (0.5,)))
    grid = SolverGrid()
    rows, failures = [], 0
    summary = {"sigma": sigma.to_config(), "sigma_norm": sigma.norm}
    for t in cfg.t:
        res = duhamel_solve(model, sigma, f, t, cfg.steps, grid)
        dx = grid.dx
        xs = [grid.x[0] + dx * round((float(x) - grid.x[0]) / dx) for x in cfg.x]
        for x, val in zip(xs, res.at(xs)):
            if sigma.nonnegative:
                est = simulate_perturbed(model, sigma, f, [x], t, cfg.n, streams.next(), cfg.threads)
                z = est.z_score(float(val))
                ok = abs(z) <= 3.0
                failures += not ok
                rows.append([t, x, float(val), est.value, est.stderr, z, ok])
            else:
                rows.append([t, x, float(val), math.nan, math.nan, math.nan, True])
        summary[f"picard_t={_fmt(t)}"] = {"iterations": res.iterations, "residuals": res.residuals}
    if model.lower_bound is not None:
        rep = bound_cor13(model.lower_bound, sigma.norm, cfg.t, model.A_norm, model.dim)
        summary["cor13"] = {"rhs": list(rep.rhs), "applicable": rep.finite, "notes": rep.notes}
    return Result(["t", "x", "duhamel", "simulated", "stderr", "z", "passed"], rows,
                  {"x": "x", "y": "duhamel"}, summary, failures)


def run_oracle_compare(cfg, streams):
    model = _model(cfg)
    if not _spectral_ok(model):
        raise ConfigError("oracle-compare needs a one-dimensional model with a density")
    f = parse_test_function(cfg.f, 1)
    rows, failures = [], 0
    for t in cfg.t:
        table = density_from_cf(model, t)
        xs = [float(x) for x in cfg.x]
        sv = semigroup_and_gradient(table, f, xs, model)
        for x, val in zip(xs, sv.value):
            est = estimate_Pt(model, f, [x], t, cfg.n, streams.next(), cfg.threads)
            z = est.z_score(float(val))
            ok = abs(z) <= 3.0
            failures += not ok
            rows.append([t, x, float(val), est.value, est.stderr, z, ok])
    return Result(["t", "x", "spectral", "monte_carlo", "stderr", "z", "passed"], rows,
                  {"x": "x", "y": "spectral"}, {}, failures)


RUNNERS = {
    "alpha": run_alpha,
    "bounds": run_bounds,
    "gradient": run_gradient,
    "shift-check": run_shift_check,
    "decomposition": run_decomposition,
    "rate-fit": run_rate_fit,
    "perturb": run_perturb,
    "oracle-compare": run_oracle_compare,
}


# --- output -----------------------------------------------------------------------

def render(cfg: ExperimentConfig, result: Result, timestamp: str | None = None) -> str:
    if cfg.format == "json":
        doc = {
            "experiment": cfg.kind,
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "columns": result.columns,
            "rows": [_json_value(r) for r in result.rows],
            "summary": _json_value(result.summary),
            "failures": result.failures,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    buf.write(f"# levygrad {__version__} {cfg.kind} time={ts} config_hash={cfg.config_hash()} seed={cfg.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def manifest(cfg: ExperimentConfig, result: Result, timestamp: str) -> dict:
    return {
        "experiment": cfg.kind,
        "timestamp": timestamp,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "config": _json_value(cfg.canonical()),
        "axes": result.axes,
        "columns": result.columns,
        "format": cfg.format,
        "summary": _json_value(result.summary),
        "failures": result.failures,
    }


def run(cfg: ExperimentConfig, stdout=None, stderr=None) -> int:
    """Run one experiment and write its report. Returns the process exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg.validate()
        result = RUNNERS[cfg.kind](cfg, _Streams(cfg.seed))
    except (ConfigError, DomainError, UnsupportedError, KeyError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (NumericalError, GridError, AccuracyError) as exc:
        diag = getattr(exc, "diagnostics", None)
        print(f"numeric error: {exc}" + (f" {json.dumps(_json_value(diag))}" if diag else ""), file=stderr)
        return EXIT_NUMERIC
    ts = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = render(cfg, result, ts)
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
            with open(cfg.out + ".manifest.json", "w", encoding="utf-8") as fh:
                json.dump(manifest(cfg, result, ts), fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            print(f"config error: cannot write {cfg.out}: {exc}", file=stderr)
            return EXIT_CONFIG
    else:
        stdout.write(text)
    if result.summary.get("fit"):
        fit = result.summary["fit"]
        print(f"fit: slope={_fmt(fit['slope'])} intercept={_fmt(fit['intercept'])} mode={fit['mode']}"
              + (" (inconclusive)" if fit["inconclusive"] else ""), file=stderr)
    if result.failures:
        print(f"statistical check failed in {result.failures} row(s)", file=stderr)
        return EXIT_STAT
    return EXIT_OK


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levygrad", description="Gradient estimates and bounds for Levy-driven OU semigroups.")
    p.add_argument("--version", action="version", version=f"levygrad {__version__}")
    p.add_argument("experiment", choices=KINDS)
    p.add_argument("--model", help=f"catalog name ({', '.join(MODEL_NAMES)}) or JSON model file")
    p.add_argument("--config", help="JSON experiment config; flags override its entries")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, dest="n")
    p.add_argument("--t", help="comma-separated times")
    p.add_argument("--x", help="comma-separated starting points (first coordinate)")
    p.add_argument("--f", help="test function, e.g. sin, cos:2, sign, halfspace:1:0.5, const:1")
    p.add_argument("--S", help="Bernstein function, e.g. power:0.5, log_power:1 or a JSON object")
    p.add_argument("--functional", help="comma-separated path functionals: 1, sin, even")
    p.add_argument("--sigma", help="perturbation as JSON {kappa: {...}, m: {...}}")
    p.add_argument("--h", type=float, help="finite-difference step")
    p.add_argument("--n-in", type=int, dest="n_in", help="inner samples for the decomposition check")
    p.add_argument("--steps", type=int, help="time steps for the Duhamel solver")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    return p


def config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
        base.pop("kind", None)
    known = set(ExperimentConfig.__dataclass_fields__) - {"kind"}
    unknown = set(base) - known
    if unknown:
        raise ConfigError(f"unknown config entries: {', '.join(sorted(unknown))}")
    over = {
        "model": args.model, "seed": args.seed, "n": args.n, "f": args.f, "S": args.S, "h": args.h,
        "n_in": args.n_in, "steps": args.steps, "out": args.out, "format": args.format, "threads": args.threads,
    }
    if args.t is not None:
        over["t"] = _floats(args.t)
    if args.x is not None:
        over["x"] = _floats(args.x)
    if args.functional is not None:
        over["functional"] = [v.strip() for v in args.functional.split(",") if v.strip()]
    if args.sigma is not None:
        over["sigma"] = json.loads(args.sigma)
    base.update({k: v for k, v in over.items() if v is not None})
    base.setdefault("threads", default_threads())
    return ExperimentConfig(args.experiment, **base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
