"""Command-line front end: ``simulate``, ``measure``, ``mc`` and ``netlist-check``.

Exit codes: 0 success, 1 bad input (usage, netlist syntax, invalid trit),
2 solver non-convergence, 3 file I/O failure, 4 a measurement could not be
extracted from an otherwise successful run.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import measure as meas
from . import montecarlo as mc
from .engine import InvalidCircuit, Method, NonConvergence, SolverConfig, WaveformSet, transient
from .netlist import (
    CellParams,
    InvalidTrit,
    NetlistError,
    build_cell_with_sense,
    build_dram_cell,
    parse_netlist,
    parse_value,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_IO = 3
EXIT_MEASURE = 4

SEED_ENV = "TDRAM_SEED"
DEFAULT_NETLIST_TSTOP = 10e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def eng(text: str) -> float:
    """argparse type: a number with an optional engineering suffix."""
    try:
        return parse_value(text)
    except NetlistError as exc:
        raise argparse.ArgumentTypeError(exc.message) from None


def parse_sequence(text: str) -> list[int]:
    out = []
    for part in text.replace(" ", "").split(","):
        if part not in ("0", "1", "2"):
            raise InvalidTrit(f"invalid trit {part!r} in sequence {text!r}: must be 0, 1 or 2")
        out.append(int(part))
    return out


# waveform CSV ---------------------------------------------------------------

def write_waveform_csv(wf: WaveformSet, path) -> None:
    nodes = list(wf.node_voltages)
    branches = list(wf.branch_currents)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", *(f"v_{n}" for n in nodes), *(f"i_{b}" for b in branches)])
        cols = [wf.time, *(wf.node_voltages[n] for n in nodes), *(wf.branch_currents[b] for b in branches)]
        for row in zip(*cols):
            w.writerow([f"{x:.16e}" for x in row])


def read_waveform_csv(path) -> WaveformSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["time_s"]:
        raise ValueError(f"{path}: not a waveform CSV (missing time_s header)")
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64).reshape(-1, len(header))
    nodes, branches = {}, {}
    for j, name in enumerate(header[1:], start=1):
        kind, _, key = name.partition("_")
        if kind == "v":
            nodes[key] = data[:, j].copy()
        elif kind == "i":
            branches[key] = data[:, j].copy()
        else:
            raise ValueError(f"{path}: unrecognized column {name!r}")
    return WaveformSet(data[:, 0].copy(), nodes, branches)


# shared option groups --------------------------------------------------------

def _add_cell_options(p: argparse.ArgumentParser, sequence_default: str | None):
    g = p.add_argument_group("cell parameters")
    g.add_argument("--sequence", default=sequence_default, help="comma-separated trits, e.g. 0,1,2")
    g.add_argument("--vdd", type=eng, help="supply voltage (V)")
    g.add_argument("--temp", type=eng, help="temperature (degC)")
    g.add_argument("--length", type=eng, help="channel length (nm)")
    g.add_argument("--tox", type=eng, help="oxide thickness (nm)")
    g.add_argument("--cycle-time", type=eng, help="WL period per trit (s)")
    g.add_argument("--edge-time", type=eng, help="stimulus edge time (s)")


def _add_solver_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("solver")
    g.add_argument("--dt", type=eng, default=0.1e-12, help="time step (s), default 0.1p")
    g.add_argument("--method", choices=[m.value for m in Method], default=Method.TRAPEZOIDAL.value)


def _cell_params(args) -> CellParams:
    changes = {
        "vdd": args.vdd, "temperature": args.temp, "channel_length": args.length,
        "oxide_thickness": args.tox, "cycle_time": args.cycle_time, "edge_time": args.edge_time,
    }
    try:
        return CellParams().with_(**{k: v for k, v in changes.items() if v is not None})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _solver(args, t_stop: float) -> SolverConfig:
    try:
        return SolverConfig(t_stop=t_stop, dt=args.dt, method=args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_text(path, text: str):
    Path(path).write_text(text)


# subcommands -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.netlist:
        text = Path(args.netlist).read_text()
        circuit = parse_netlist(text)
        t_stop = args.tstop or DEFAULT_NETLIST_TSTOP
    else:
        p = _cell_params(args)
        seq = parse_sequence(args.sequence or "0,1,2")
        if args.with_sense:
            circuit, sched = build_cell_with_sense(p, seq)
        else:
            circuit, sched = build_dram_cell(p, seq)
        t_stop = args.tstop or sched.t_stop
    wf = transient(circuit, _solver(args, t_stop))
    write_waveform_csv(wf, args.out)
    print(f"wrote {len(wf.time)} samples x {1 + len(wf.node_voltages) + len(wf.branch_currents)} columns to {args.out}",
          file=sys.stderr)
    return EXIT_OK


def measurement_report(p: CellParams, seq: list[int], cfg: SolverConfig | None = None, with_sense: bool = False,
                       variant: str = meas.MetricVariant.EXCURSION.value) -> dict:
    """Simulate ``seq`` and collect per-cycle metrics plus flat per-trit keys."""
    if with_sense:
        circuit, sched = build_cell_with_sense(p, seq)
    else:
        circuit, sched = build_dram_cell(p, seq)
    if cfg is None:
        cfg = SolverConfig(t_stop=sched.t_stop)
    wf = transient(circuit, cfg)
    cycles = [meas.measure_cycle(wf, sched, k, variant) for k in range(sched.n_cycles)]
    sense = [meas.measure_sense_cycle(wf, sched, k) for k in range(sched.n_cycles)] if with_sense else None
    report = json.loads(meas.report_json(cycles, sense))
    report["metric_variant"] = meas.MetricVariant(variant).value
    per_trit = {}
    for k, m in enumerate(cycles):
        t = m.written_trit
        if f"write_time_s_{t}" in per_trit:
            continue
        per_trit[f"write_time_s_{t}"] = m.write_time
        per_trit[f"read_sense_time_s_{t}"] = m.read_sense_time
        per_trit[f"avg_current_a_{t}"] = m.avg_current
        per_trit[f"avg_power_w_{t}"] = m.avg_power
        if sense is not None:
            per_trit[f"sense_time_{t}"] = sense[k].sense_time
            per_trit[f"sense_trit_{t}"] = sense[k].read_trit
    report["per_trit"] = per_trit
    report["avg_current_a"] = float(np.mean([m.avg_current for m in cycles]))
    report["avg_power_w"] = float(np.mean([m.avg_power for m in cycles]))
    if sense is not None:
        report["sense_avg_current_a"] = float(np.mean([s.avg_current for s in sense]))
        report["sense_avg_power_w"] = float(np.mean([s.avg_power for s in sense]))
    return report


def cmd_measure(args) -> int:
    p = _cell_params(args)
    seq = parse_sequence(args.sequence)
    sched_t = len(seq) * p.cycle_time
    report = measurement_report(p, seq, _solver(args, sched_t), args.with_sense, args.metric_variant)
    text = json.dumps(report, indent=2)
    if args.json:
        _write_text(args.json, text + "\n")
    print(text)
    return EXIT_OK


def resolve_seed(seed: int | None) -> tuple[int, bool]:
    """Seed from the flag, else the environment, else a fresh random one (flagged for printing)."""
    if seed is not None:
        return seed, False
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env), False
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return secrets.randbelow(2**32), True


def cmd_mc(args) -> int:
    if args.trials < 1:
        raise UsageError(f"--trials must be at least 1 (got {args.trials})")
    seed, fresh = resolve_seed(args.seed)
    if seed < 0:
        raise UsageError("seed must be non-negative")
    if fresh:
        print(f"seed: {seed}", file=sys.stderr)
    if args.sigma_scale < 0:
        raise UsageError("--sigma-scale must be non-negative")
    names = args.vary or [q.value for q in mc.Parameter]
    specs = []
    for name in names:
        spec = mc.default_spec(name)
        if args.sigma_scale != 1.0:
            spec = mc.VariationSpec(spec.parameter, spec.three_sigma * args.sigma_scale, spec.nominal)
        specs.append(spec)
    p = _cell_params(args)
    cfg = _solver(args, len(mc.MC_SEQUENCE) * p.cycle_time)
    report = mc.run_mc(p, specs, args.trials, seed, cfg=cfg, workers=args.workers)
    if args.json:
        _write_text(args.json, report.to_json() + "\n")
    if args.csv:
        _write_text(args.csv, report.to_csv())
    print(f"seed {seed}, {report.n} trials, varying {', '.join(names)}")
    print(f"{'metric':<20}{'mean':>14}{'stddev':>14}{'min':>14}{'max':>14}{'worst dev':>14}{'failed':>8}")
    for m in mc.METRICS:
        s = report.summary[m]
        worst = report.worst_case_deviation[m]
        if s is None:
            print(f"{m:<20}{'-':>14}{'-':>14}{'-':>14}{'-':>14}{'-':>14}{report.failures[m]:>8}")
            continue
        print(f"{m:<20}{s.mean:>14.5g}{s.stddev:>14.5g}{s.min:>14.5g}{s.max:>14.5g}"
              f"{(worst if worst is not None else float('nan')):>14.5g}{report.failures[m]:>8}")
    for t in report.trials:
        if t.errors:
            print(f"trial {t.index} failed: {'; '.join(t.errors)}", file=sys.stderr)
    return EXIT_OK


def cmd_netlist_check(args) -> int:
    circuit = parse_netlist(Path(args.netlist).read_text())
    print(f"{args.netlist}: ok, {len(circuit.elements)} elements, {len(circuit.nodes)} nodes "
          f"({circuit.transistor_count} transistors)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tdram", description="CNTFET ternary DRAM cell simulator")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="run a transient and write the waveform CSV")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--netlist", help="netlist file")
    src.add_argument("--cell", action="store_true", help="build the 3T cell deck")
    _add_cell_options(s, None)
    s.add_argument("--with-sense", action="store_true", help="attach the ternary sense circuit")
    s.add_argument("--tstop", type=eng, help="stop time (s); default covers the whole sequence")
    s.add_argument("--out", required=True, help="waveform CSV path")
    _add_solver_options(s)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("measure", help="simulate the cell and print timing/current/power metrics")
    m.add_argument("--cell", action="store_true", help="accepted for symmetry; the cell deck is always used")
    _add_cell_options(m, "0,1,2")
    m.add_argument("--with-sense", action="store_true", help="add sense times and sense supply current/power")
    m.add_argument("--metric-variant", choices=[v.value for v in meas.MetricVariant],
                   default=meas.MetricVariant.EXCURSION.value)
    m.add_argument("--json", help="also write the report here")
    _add_solver_options(m)
    m.set_defaults(func=cmd_measure)

    c = sub.add_parser("mc", help="Monte Carlo process-variation run")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--seed", type=int, help=f"RNG seed (falls back to ${SEED_ENV}, else random and printed)")
    c.add_argument("--vary", action="append", choices=[q.value for q in mc.Parameter],
                   help="parameter to vary (repeatable); default all")
    c.add_argument("--sigma-scale", type=eng, default=1.0, help="multiply every default three-sigma")
    c.add_argument("--workers", type=int, default=None, help="worker threads (default: CPU count)")
    c.add_argument("--json", help="McReport JSON path")
    c.add_argument("--csv", help="per-trial CSV path")
    _add_cell_options(c, None)
    _add_solver_options(c)
    c.set_defaults(func=cmd_mc)

    k = sub.add_parser("netlist-check", help="parse and validate a netlist")
    k.add_argument("netlist")
    k.set_defaults(func=cmd_netlist_check)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NetlistError, InvalidTrit, InvalidCircuit, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergence as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except meas.MeasurementError as exc:
        print(f"error: measurement failed: {exc}", file=sys.stderr)
        return EXIT_MEASURE


if __name__ == "__main__":
    sys.exit(main())
