"""Declarative sweeps over analytic and Monte Carlo evaluators, written as CSV.

A spec is a YAML mapping; see ``preset`` for complete examples. Rows are
produced in a fixed grid order (sf, sir, lambda_cfo, sigma_tr2, receiver,
method, snr) and flushed one at a time, so an interrupted run resumes by
skipping the rows already on disk.

Combinations without an evaluator are not part of the grid: analytic
methods exist only for the coherent receiver with perfect phase knowledge,
and the phase-tracking variance only affects the coherent receiver.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Any, Iterator

import numpy as np
import yaml

from coherent_lora import analytic
from coherent_lora.chirp import LoraParams
from coherent_lora.errors import ConfigurationError, DomainError, NumericalError
from coherent_lora.montecarlo import TrialConfig, required_snr, simulate_frames, simulate_symbols

CSV_COLUMNS = ("sf", "snr_db", "sir_db", "lambda_cfo", "receiver", "method", "metric", "F",
               "sigma_tr2", "value", "ci_low", "ci_high", "n_trials", "seed")
KEY_COLUMNS = ("sf", "snr_db", "sir_db", "lambda_cfo", "receiver", "method", "metric", "F", "sigma_tr2")
METHODS = ("mc", "exact", "bound", "approx")
ANALYTIC = ("exact", "bound", "approx")
METRICS = ("ser", "fer", "required_snr")
RECEIVERS = ("coherent", "noncoherent")
PRESETS = ("fig4", "fig5", "fig6", "fig7", "fig8")


@dataclass(frozen=True)
class SnrGrid:
    start: float
    stop: float
    step: float

    def values(self) -> list[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 9) for i in range(count)]


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    sf: tuple[int, ...]
    snr: SnrGrid
    sir_db: tuple[float, ...]
    F: int = 1
    lambda_cfo: tuple[float, ...] = (0.0,)
    receivers: tuple[str, ...] = ("coherent",)
    methods: tuple[str, ...] = ("mc",)
    sigma_tr2: tuple[float, ...] = (0.0,)
    n_trials: int = 10_000
    seed: int = 0
    output: str = "results.csv"
    metric: str = "fer"
    target_fer: float = 0.1
    snr_bracket: tuple[float, float] = (-20.0, 10.0)
    K: int = 5
    eps: float = 0.2
    rho: float = math.pi / 2
    pair_samples: int | None = None
    workers: int = 1

    def quadrature(self) -> analytic.QuadratureSpec:
        return analytic.QuadratureSpec(eps=self.eps, rho=self.rho, pair_samples=self.pair_samples)


@dataclass(frozen=True)
class ResultRow:
    sf: int
    snr_db: float | None
    sir_db: float
    lambda_cfo: float
    receiver: str
    method: str
    metric: str
    F: int
    sigma_tr2: float
    value: float | str | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    n_trials: int | None = None
    seed: int | None = None

    def key(self) -> tuple[str, ...]:
        cells = self.cells()
        return tuple(cells[CSV_COLUMNS.index(c)] for c in KEY_COLUMNS)

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _path_error(path, message):
    return ConfigurationError(message, path)


def _as_list(raw, path, cast, allow_empty=False):
    if raw is None:
        raise _path_error(path, "missing")
    items = raw if isinstance(raw, (list, tuple)) else [raw]
    if not items and not allow_empty:
        raise _path_error(path, "must not be empty")
    out = []
    for i, item in enumerate(items):
        try:
            out.append(cast(item))
        except (TypeError, ValueError) as exc:
            raise _path_error(f"{path}[{i}]", f"invalid value {item!r}") from exc
    return tuple(out)


def _sir(value) -> float:
    v = float(value)
    if math.isnan(v) or v == -math.inf:
        raise ValueError(value)
    return v


def _number(data, key, cast, default, path=None):
    path = path or key
    if key not in data or data[key] is None:
        if default is ...:
            raise _path_error(path, "missing")
        return default
    try:
        return cast(data[key])
    except (TypeError, ValueError) as exc:
        raise _path_error(path, f"invalid value {data[key]!r}") from exc


KNOWN_KEYS = {"name", "sf", "snr", "sir_db", "F", "lambda_cfo", "receivers", "methods", "sigma_tr2",
              "n_trials", "seed", "output", "metric", "target_fer", "snr_bracket", "quadrature", "workers"}
QUAD_KEYS = {"K", "eps", "rho", "pair_samples"}


def spec_from_dict(data: dict[str, Any]) -> ExperimentSpec:
    """Validate a parsed spec mapping; errors carry the offending field path."""
    if not isinstance(data, dict):
        raise _path_error("<root>", "spec must be a mapping")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise _path_error(unknown[0], "unknown field")
    name = str(data.get("name", "experiment"))
    metric = str(data.get("metric", "fer"))
    if metric not in METRICS:
        raise _path_error("metric", f"must be one of {METRICS}")
    sfs = _as_list(data.get("sf"), "sf", int)
    for i, sf in enumerate(sfs):
        if not 7 <= sf <= 12:
            raise _path_error(f"sf[{i}]", "must lie in 7..12")
    snr = data.get("snr")
    if metric == "required_snr" and snr is None:
        snr = {"start": 0.0, "stop": 0.0, "step": 1.0}
    if not isinstance(snr, dict):
        raise _path_error("snr", "must be a mapping with start, stop, step")
    grid = SnrGrid(_number(snr, "start", float, ..., "snr.start"), _number(snr, "stop", float, ..., "snr.stop"),
                   _number(snr, "step", float, ..., "snr.step"))
    if not grid.step > 0:
        raise _path_error("snr.step", "must be positive")
    if grid.stop < grid.start:
        raise _path_error("snr", "empty grid (stop < start)")
    sirs = _as_list(data.get("sir_db"), "sir_db", _sir)
    lambdas = _as_list(data.get("lambda_cfo", [0.0]), "lambda_cfo", float)
    receivers = _as_list(data.get("receivers", ["coherent"]), "receivers", str)
    for i, r in enumerate(receivers):
        if r not in RECEIVERS:
            raise _path_error(f"receivers[{i}]", f"must be one of {RECEIVERS}")
    methods = _as_list(data.get("methods", ["mc"]), "methods", str)
    for i, m in enumerate(methods):
        if m not in METHODS:
            raise _path_error(f"methods[{i}]", f"must be one of {METHODS}")
    sig = _as_list(data.get("sigma_tr2", [0.0]), "sigma_tr2", float)
    for i, v in enumerate(sig):
        if not v >= 0:
            raise _path_error(f"sigma_tr2[{i}]", "must be >= 0")
    F = _number(data, "F", int, 1)
    if F < 1:
        raise _path_error("F", "must be >= 1")
    if metric == "ser" and F != 1:
        raise _path_error("F", "symbol error rate runs use F = 1")
    n_trials = _number(data, "n_trials", int, 10_000)
    if n_trials < 1:
        raise _path_error("n_trials", "must be >= 1")
    seed = _number(data, "seed", int, 0)
    if seed < 0:
        raise _path_error("seed", "must be non-negative")
    target = _number(data, "target_fer", float, 0.1)
    if not 0 < target < 1:
        raise _path_error("target_fer", "must lie in (0, 1)")
    bracket = _as_list(data.get("snr_bracket", [-20.0, 10.0]), "snr_bracket", float)
    if len(bracket) != 2 or not bracket[0] < bracket[1]:
        raise _path_error("snr_bracket", "must be [low, high] with low < high")
    workers = _number(data, "workers", int, 1)
    if workers < 1:
        raise _path_error("workers", "must be >= 1")
    quad = data.get("quadrature") or {}
    if not isinstance(quad, dict):
        raise _path_error("quadrature", "must be a mapping")
    unknown = sorted(set(quad) - QUAD_KEYS)
    if unknown:
        raise _path_error(f"quadrature.{unknown[0]}", "unknown field")
    K = _number(quad, "K", int, 5, "quadrature.K")
    if K < 1 or K % 2 == 0:
        raise _path_error("quadrature.K", "must be odd and positive")
    eps = _number(quad, "eps", float, 0.2, "quadrature.eps")
    rho = _number(quad, "rho", float, math.pi / 2, "quadrature.rho")
    if not eps > 0:
        raise _path_error("quadrature.eps", "must be positive")
    if not rho > 0:
        raise _path_error("quadrature.rho", "must be positive")
    pairs = _number(quad, "pair_samples", int, None, "quadrature.pair_samples")
    if pairs is not None and pairs < 1:
        raise _path_error("quadrature.pair_samples", "must be >= 1")
    output = str(data.get("output", f"{name}.csv"))
    parent = os.path.dirname(os.path.abspath(output))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise _path_error("output", f"directory {parent} is not writable")
    return ExperimentSpec(name=name, sf=sfs, snr=grid, sir_db=sirs, F=F, lambda_cfo=lambdas,
                          receivers=receivers, methods=methods, sigma_tr2=sig, n_trials=n_trials,
                          seed=seed, output=output, metric=metric, target_fer=target,
                          snr_bracket=(bracket[0], bracket[1]), K=K, eps=eps, rho=rho,
                          pair_samples=pairs, workers=workers)


def load_spec(path: str, overrides: dict[str, Any] | None = None) -> ExperimentSpec:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read spec: {exc}", "<file>") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed YAML: {exc}", "<file>") from exc
    data = dict(data or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return spec_from_dict(data)


def spec_to_dict(spec: ExperimentSpec) -> dict[str, Any]:
    d = asdict(spec)
    d["snr"] = asdict(spec.snr)
    d["quadrature"] = {k: d.pop(k) for k in ("K", "eps", "rho", "pair_samples")}
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return d


def preset(name: str) -> ExperimentSpec:
    """Specs reproducing the published figures.

    SNR ranges are read off plotted axes and are approximate.
    """
    common = dict(F=20, lambda_cfo=[0.0], receivers=["coherent", "noncoherent"], seed=1, metric="fer")
    table = {
        "fig4": dict(common, name="fig4", sf=[7], snr={"start": -14, "stop": 0, "step": 1}, sir_db=[0.0],
                     lambda_cfo=[0.0, 0.5], methods=["mc", "approx"], n_trials=20_000),
        "fig5": dict(common, name="fig5", sf=[7], snr={"start": -14, "stop": 0, "step": 1}, sir_db=[3.0],
                     lambda_cfo=[0.0, 0.5], methods=["mc", "approx"], n_trials=20_000),
        "fig6": dict(common, name="fig6", metric="ser", F=1, sf=[7, 9, 11],
                     snr={"start": -26, "stop": -2, "step": 1}, sir_db=[3.0], methods=["mc", "approx"],
                     n_trials=100_000, quadrature={"pair_samples": 4096}),
        "fig7": dict(common, name="fig7", metric="required_snr", sf=[7], sir_db=list(range(-3, 13)),
                     methods=["mc"], n_trials=10_000, target_fer=0.1, snr_bracket=[-15.0, 25.0]),
        "fig8": dict(common, name="fig8", sf=[7], snr={"start": -14, "stop": 0, "step": 1}, sir_db=[3.0],
                     sigma_tr2=[0.0, 0.2, 0.3, 0.4], methods=["mc"], n_trials=10_000),
    }
    if name not in table:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}", "preset")
    data = table[name]
    data.setdefault("output", f"{name}.csv")
    return spec_from_dict(data)


@dataclass(frozen=True)
class _Point:
    sf: int
    sir_db: float
    lambda_cfo: float
    sigma_tr2: float
    receiver: str
    method: str


def _applicable(pt: _Point) -> bool:
    if pt.method in ANALYTIC:
        return pt.receiver == "coherent" and pt.sigma_tr2 == 0
    if pt.receiver == "noncoherent":
        return pt.sigma_tr2 == 0
    return True


def grid_points(spec: ExperimentSpec) -> Iterator[_Point]:
    for sf in spec.sf:
        for sir in spec.sir_db:
            for lam in spec.lambda_cfo:
                for sig in spec.sigma_tr2:
                    for rx in spec.receivers:
                        for method in spec.methods:
                            pt = _Point(sf, sir, lam, sig, rx, method)
                            if _applicable(pt):
                                yield pt


def _p_i(sir_db: float) -> float:
    return -math.inf if sir_db == math.inf else -sir_db


def _base_row(spec, pt, snr, **kw):
    n = kw.pop("n_trials", spec.n_trials if pt.method == "mc" else None)
    seed = kw.pop("seed", spec.seed if pt.method == "mc" else None)
    F = 1 if spec.metric == "ser" else spec.F
    return ResultRow(pt.sf, snr, pt.sir_db, pt.lambda_cfo, pt.receiver, pt.method, spec.metric, F,
                     pt.sigma_tr2, n_trials=n, seed=seed, **kw)


def _error_code(exc: Exception) -> str:
    if isinstance(exc, NumericalError):
        return "error:numerical"
    if isinstance(exc, (ConfigurationError, DomainError)):
        return "error:configuration"
    return "error:" + type(exc).__name__


def _mc_rows(spec, pt, snrs):
    for snr in snrs:
        cfg = TrialConfig(LoraParams(pt.sf), snr, _p_i(pt.sir_db), pt.lambda_cfo, pt.receiver,
                          1 if spec.metric == "ser" else spec.F, pt.sigma_tr2, spec.n_trials, spec.seed)
        try:
            sim = simulate_symbols if spec.metric == "ser" else simulate_frames
            est = sim(cfg, workers=spec.workers)
            yield _base_row(spec, pt, snr, value=est.rate, ci_low=est.ci95[0], ci_high=est.ci95[1])
        except (NumericalError, ConfigurationError, DomainError, FloatingPointError) as exc:
            yield _base_row(spec, pt, snr, value=_error_code(exc))


def _analytic_values(spec, pt, snrs):
    p = LoraParams(pt.sf)
    quad = spec.quadrature()
    p_i = _p_i(pt.sir_db)
    snrs = np.asarray(snrs, dtype=float)
    if p_i == -math.inf:
        if pt.method == "exact":
            ser = np.array([analytic.awgn_error_probability(p.N, s, quad) for s in snrs])
        elif pt.method == "bound":
            ser = analytic.q_function(np.sqrt(p.N * analytic.snr_linear(snrs)))
        else:
            ser = analytic.awgn_ser(p, snrs)
        return ser if spec.metric == "ser" else -np.expm1(spec.F * np.log1p(-ser))
    prof = analytic.interference_profile(p, snrs, p_i, pt.lambda_cfo, quad, pt.method, K=spec.K,
                                         allow_expensive=True)
    if spec.metric == "ser":
        return np.atleast_1d(analytic.symbol_error_given_tau(prof, p).mean(axis=0))
    return np.atleast_1d(analytic.fer_from_profile(prof, spec.F, p))


def _analytic_rows(spec, pt, snrs):
    try:
        values = _analytic_values(spec, pt, snrs)
    except (NumericalError, ConfigurationError, DomainError, FloatingPointError) as exc:
        for snr in snrs:
            yield _base_row(spec, pt, snr, value=_error_code(exc))
        return
    for snr, v in zip(snrs, values):
        yield _base_row(spec, pt, snr, value=float(v), ci_low=float(v), ci_high=float(v))


def _required_rows(spec, pt):
    template = TrialConfig(LoraParams(pt.sf), spec.snr_bracket[1], 0.0, pt.lambda_cfo, pt.receiver,
                           spec.F, pt.sigma_tr2, spec.n_trials, spec.seed)
    method = "mc" if pt.method == "mc" else "analytic"
    try:
        res = required_snr(spec.target_fer, pt.sir_db, template, spec.snr_bracket, method,
                           workers=spec.workers, quad=spec.quadrature(), K=spec.K,
                           analytic_method=pt.method if method == "analytic" else "approx")
    except (NumericalError, ConfigurationError, DomainError, FloatingPointError) as exc:
        yield _base_row(spec, pt, None, value=_error_code(exc))
        return
    if res.reachable:
        yield _base_row(spec, pt, None, value=res.snr_db)
    else:
        # Unreachable target: report the floor as the interval and leave the value empty.
        floor = res.floor
        yield _base_row(spec, pt, None, value="unreachable", ci_low=floor, ci_high=floor)


def iter_rows(spec: ExperimentSpec, done: set | None = None) -> Iterator[ResultRow]:
    """Result rows in grid order, skipping keys already in ``done``."""
    done = done or set()
    snrs = spec.snr.values()
    for pt in grid_points(spec):
        if spec.metric == "required_snr":
            probe = _base_row(spec, pt, None)
            if probe.key() in done:
                continue
            yield from _required_rows(spec, pt)
            continue
        todo = [s for s in snrs if _base_row(spec, pt, s).key() not in done]
        if not todo:
            continue
        yield from (_mc_rows(spec, pt, todo) if pt.method == "mc" else _analytic_rows(spec, pt, todo))


def _read_done(path: str) -> set:
    done = set()
    if not os.path.exists(path):
        return done
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return done
    if tuple(header) != CSV_COLUMNS:
        raise ConfigurationError("existing file has a different header", "output")
    for cells in reader:
        if len(cells) == len(CSV_COLUMNS):
            done.add(tuple(cells[CSV_COLUMNS.index(c)] for c in KEY_COLUMNS))
    return done


def run_experiment(spec: ExperimentSpec, output: str | None = None) -> str:
    """Evaluate the grid and append rows to the CSV; returns the output path."""
    path = output or spec.output
    done = _read_done(path)
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            fh.write(f"# experiment {spec.name} started {stamp}\n")
            writer.writerow(CSV_COLUMNS)
            fh.flush()
        for row in iter_rows(spec, done):
            writer.writerow(row.cells())
            fh.flush()
    return path


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def single_point(metric: str, sf: int, snr_db: float | None, sir_db: float, lambda_cfo: float,
                 receiver: str, method: str, F: int, n_trials: int, seed: int, sigma_tr2: float = 0.0,
                 target_fer: float = 0.1, snr_bracket=(-20.0, 10.0), quad: dict | None = None,
                 workers: int = 1) -> ResultRow:
    """Evaluate one grid point through the same path as ``run_experiment``."""
    data = dict(name="single", metric=metric, sf=[sf], sir_db=[sir_db], F=F, lambda_cfo=[lambda_cfo],
                receivers=[receiver], methods=[method], sigma_tr2=[sigma_tr2], n_trials=n_trials,
                seed=seed, target_fer=target_fer, snr_bracket=list(snr_bracket), workers=workers,
                quadrature=quad or {}, output=os.devnull)
    if snr_db is not None:
        data["snr"] = {"start": snr_db, "stop": snr_db, "step": 1.0}
    spec = spec_from_dict(data)
    pts = list(grid_points(spec))
    if not pts:
        raise ConfigurationError(f"method {method!r} is not available for this receiver setting", "method")
    rows = list(iter_rows(spec))
    return rows[0]


__all__ = [
    "CSV_COLUMNS",
    "ExperimentSpec",
    "PRESETS",
    "ResultRow",
    "SnrGrid",
    "grid_points",
    "iter_rows",
    "load_spec",
    "preset",
    "rows_to_csv",
    "run_experiment",
    "single_point",
    "spec_from_dict",
    "spec_to_dict",
]
