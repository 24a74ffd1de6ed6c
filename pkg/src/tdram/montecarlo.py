"""Gaussian process-variation Monte Carlo over the 3T cell and sensitivity ranking."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .device import NOMINAL_CHANNEL_LENGTH, NOMINAL_OXIDE_THICKNESS, NOMINAL_TEMPERATURE
from .engine import NonConvergence, SolverConfig, transient
from .measure import MeasurementError, MetricVariant, measure_cycle
from .netlist.builders import CellParams, build_dram_cell


class Parameter(str, enum.Enum):
    TEMPERATURE = "temp"
    SUPPLY_VOLTAGE = "vdd"
    CHANNEL_LENGTH = "length"
    OXIDE_THICKNESS = "tox"


# CellParams field each parameter overrides
FIELDS = {
    Parameter.TEMPERATURE: "temperature",
    Parameter.SUPPLY_VOLTAGE: "vdd",
    Parameter.CHANNEL_LENGTH: "channel_length",
    Parameter.OXIDE_THICKNESS: "oxide_thickness",
}

NOMINALS = {
    Parameter.TEMPERATURE: NOMINAL_TEMPERATURE,
    Parameter.SUPPLY_VOLTAGE: 1.2,
    Parameter.CHANNEL_LENGTH: NOMINAL_CHANNEL_LENGTH,
    Parameter.OXIDE_THICKNESS: NOMINAL_OXIDE_THICKNESS,
}

# Deck and the cycles measured on it: writes 2->0, 0->1 and 0->2
MC_SEQUENCE = (2, 0, 1, 0, 2)
MEASURED_CYCLES = {0: 1, 1: 2, 2: 4}

METRICS = (
    "write_time_0", "write_time_1", "write_time_2",
    "read_sense_time_1", "read_sense_time_2",
    "avg_current", "avg_power",
)


@dataclass(frozen=True)
class VariationSpec:
    """Truncated Gaussian around ``nominal`` with absolute half-width ``three_sigma``.

    A zero half-width pins the parameter at nominal.
    """

    parameter: Parameter
    three_sigma: float
    nominal: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "parameter", Parameter(self.parameter))
        if self.nominal is None:
            object.__setattr__(self, "nominal", float(NOMINALS[self.parameter]))
        if not (self.three_sigma >= 0 and math.isfinite(self.three_sigma)):
            raise ValueError("three_sigma must be finite and non-negative")

    @property
    def sigma(self) -> float:
        return self.three_sigma / 3

    @property
    def bounds(self) -> tuple[float, float]:
        return self.nominal - self.three_sigma, self.nominal + self.three_sigma

    def draw(self, rng: np.random.Generator) -> float:
        if self.three_sigma == 0:
            return float(self.nominal)
        lo, hi = self.bounds
        while True:
            v = float(rng.normal(self.nominal, self.sigma))
            if lo <= v <= hi:
                return v


def default_spec(parameter: Parameter | str, nominal: float | None = None) -> VariationSpec:
    parameter = Parameter(parameter)
    nominal = float(NOMINALS[parameter]) if nominal is None else nominal
    if parameter is Parameter.TEMPERATURE:
        return VariationSpec(parameter, 15.0, nominal)
    return VariationSpec(parameter, 0.1 * nominal, nominal)


def default_specs() -> list[VariationSpec]:
    return [default_spec(p) for p in Parameter]


def _check_specs(specs: Sequence[VariationSpec]):
    seen = [s.parameter for s in specs]
    if len(set(seen)) != len(seen):
        raise ValueError("each parameter may be varied at most once")


def sample_trial(specs: Sequence[VariationSpec], seed: int, index: int) -> dict[str, float]:
    """Parameter set for trial ``index``; a pure function of (seed, index)."""
    rng = np.random.default_rng([seed, index])
    return {s.parameter.value: s.draw(rng) for s in specs}


def sample_trials(specs: Sequence[VariationSpec], n: int, seed: int) -> list[dict[str, float]]:
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_specs(specs)
    return [sample_trial(specs, seed, i) for i in range(n)]


def apply(p: CellParams, sample: dict[str, float]) -> CellParams:
    return p.with_(**{FIELDS[Parameter(k)]: v for k, v in sample.items()})


@dataclass
class TrialResult:
    index: int
    params: dict[str, float]
    metrics: dict[str, float | None]
    cycles: dict[int, dict] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(v is None for v in self.metrics.values())

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "params": self.params,
            "metrics": self.metrics,
            "cycles": {str(k): v for k, v in self.cycles.items()},
            "errors": self.errors,
        }


def evaluate(p: CellParams, cfg: SolverConfig | None = None,
             variant: MetricVariant | str = MetricVariant.EXCURSION, index: int = -1,
             params: dict | None = None) -> TrialResult:
    """Simulate the MC deck for ``p`` and extract the per-trit metrics.

    Solver and measurement failures are recorded on the result rather than raised.
    """
    result = TrialResult(index, dict(params or {}), {m: None for m in METRICS})
    circuit, sched = build_dram_cell(p, MC_SEQUENCE)
    if cfg is None:
        cfg = SolverConfig(t_stop=sched.t_stop)
    else:
        cfg = SolverConfig(sched.t_stop, cfg.dt, cfg.method, cfg.v_tol, cfg.i_tol, cfg.max_newton, cfg.g_min)
    try:
        wf = transient(circuit, cfg)
    except NonConvergence as exc:
        result.errors.append(f"NonConvergence: {exc}")
        return result
    measured = {}
    for trit, k in MEASURED_CYCLES.items():
        try:
            m = measure_cycle(wf, sched, k, variant)
        except MeasurementError as exc:
            result.errors.append(f"{type(exc).__name__}: {exc}")
            continue
        measured[trit] = m
        result.cycles[trit] = m.as_report()
        result.metrics[f"write_time_{trit}"] = m.write_time
        if trit:
            result.metrics[f"read_sense_time_{trit}"] = m.read_sense_time
    if len(measured) == len(MEASURED_CYCLES):
        result.metrics["avg_current"] = float(np.mean([m.avg_current for m in measured.values()]))
        result.metrics["avg_power"] = float(np.mean([m.avg_power for m in measured.values()]))
    return result


@dataclass(frozen=True)
class Stats:
    mean: float
    stddev: float
    min: float
    max: float
    count: int


def summarize(values: Sequence[float]) -> Stats | None:
    if not values:
        return None
    a = np.asarray(values, dtype=np.float64)
    return Stats(float(a.mean()), float(a.std()), float(a.min()), float(a.max()), len(a))


@dataclass
class McReport:
    seed: int
    specs: list[VariationSpec]
    trials: list[TrialResult]
    nominal: TrialResult
    summary: dict[str, Stats | None]
    worst_case_deviation: dict[str, float | None]
    failures: dict[str, int]

    @property
    def n(self) -> int:
        return len(self.trials)

    @property
    def failed_trials(self) -> list[int]:
        return [t.index for t in self.trials if t.failed]

    def values(self, metric: str) -> list[float]:
        return [t.metrics[metric] for t in self.trials if t.metrics[metric] is not None]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "specs": [
                {"parameter": s.parameter.value, "nominal": s.nominal, "three_sigma": s.three_sigma}
                for s in self.specs
            ],
            "nominal": self.nominal.metrics,
            "summary": {k: (None if v is None else v.__dict__) for k, v in self.summary.items()},
            "worst_case_deviation": self.worst_case_deviation,
            "failures": self.failures,
            "failed_trials": self.failed_trials,
            "trials": [t.to_dict() for t in self.trials],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        """One row per trial: index, sampled parameters, metrics (blank when failed)."""
        params = [s.parameter.value for s in self.specs]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", *params, *METRICS, "errors"])
        for t in self.trials:
            w.writerow([
                t.index,
                *(repr(t.params[p]) for p in params),
                *("" if t.metrics[m] is None else repr(t.metrics[m]) for m in METRICS),
                "; ".join(t.errors),
            ])
        return buf.getvalue()


def _aggregate(seed, specs, trials, nominal) -> McReport:
    summary, worst, failures = {}, {}, {}
    for m in METRICS:
        vals = [t.metrics[m] for t in trials if t.metrics[m] is not None]
        failures[m] = len(trials) - len(vals)
        summary[m] = summarize(vals)
        ref = nominal.metrics[m]
        worst[m] = None if (ref is None or not vals) else float(max(abs(v - ref) for v in vals))
    return McReport(seed, list(specs), trials, nominal, summary, worst, failures)


def run_mc(p: CellParams, specs: Sequence[VariationSpec], n: int, seed: int,
           cfg: SolverConfig | None = None, workers: int | None = None,
           variant: MetricVariant | str = MetricVariant.EXCURSION, order: Sequence[int] | None = None) -> McReport:
    """Run ``n`` trials of the MC deck with parameters drawn from ``specs``.

    Trials run on a thread pool (the solver releases the GIL) in ``order``
    if given; results are keyed by trial index so the report does not
    depend on scheduling.
    """
    samples = sample_trials(specs, n, seed)
    if order is None:
        order = range(n)
    elif sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the trial indices")

    def one(i):
        return evaluate(apply(p, samples[i]), cfg, variant, index=i, params=samples[i])

    workers = workers or os.cpu_count() or 1
    results: dict[int, TrialResult] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i, r in zip(order, pool.map(one, order)):
            results[i] = r
    trials = [results[i] for i in range(n)]
    nominal = evaluate(apply(p, {s.parameter.value: s.nominal for s in specs}), cfg, variant)
    return _aggregate(seed, specs, trials, nominal)


def temperature_sweep(p: CellParams, temperatures: Sequence[float], n: int, seed: int,
                      three_sigma: float = 15.0, **kwargs) -> dict[float, McReport]:
    return {
        t: run_mc(p, [VariationSpec(Parameter.TEMPERATURE, three_sigma, t)], n, seed, **kwargs)
        for t in temperatures
    }


def sensitivity_sweeps(p: CellParams, n: int, seed: int, parameters=tuple(Parameter),
                       **kwargs) -> dict[Parameter, McReport]:
    """One single-parameter MC run per parameter at its default spread."""
    return {Parameter(q): run_mc(p, [default_spec(q)], n, seed, **kwargs) for q in parameters}


def sensitivity_rank(reports: dict) -> dict[str, list[tuple[str, float]]]:
    """Per metric, parameters ordered by decreasing stddev; ties keep the reports' order."""
    ranking = {}
    for m in METRICS:
        spreads = []
        for key, rep in reports.items():
            s = rep.summary.get(m)
            name = key.value if isinstance(key, Parameter) else str(key)
            spreads.append((name, 0.0 if s is None else s.stddev))
        ranking[m] = sorted(spreads, key=lambda kv: -kv[1])
    return ranking
