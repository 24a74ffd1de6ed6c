"""Timing, current and power extraction from cell waveforms, and ternary read classification."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .engine import WaveformSet
from .netlist.builders import SENSE_OUT, StimulusSchedule

CELL_SOURCES = ("vwl", "vbl1", "vdd")
CELL_BRANCHES = ("m1", "m2")
SENSE_SUPPLY = "vsense"


class MeasurementError(ValueError):
    pass


class TargetNeverReached(MeasurementError):
    pass


class ExcursionNeverReached(MeasurementError):
    pass


class AmbiguousRead(MeasurementError):
    pass


class MetricVariant(str, enum.Enum):
    # 20% of the excursion the trit should produce (VDD/2 for "1", VDD for "2")
    EXCURSION = "excursion"
    # 20% of the excursion actually observed by the end of the read window
    FINAL_VALUE = "final-value"


def crossing(time, y, level, t0, t1, direction=None) -> float | None:
    """First time in [t0, t1] where ``y`` crosses ``level``, linearly interpolated.

    ``direction`` is "rise", "fall" or None for either. A sample sitting
    exactly on the level counts as a crossing.
    """
    time = np.asarray(time)
    y = np.asarray(y)
    i0 = max(int(np.searchsorted(time, t0, side="left")) - 1, 0)
    i1 = min(int(np.searchsorted(time, t1, side="right")), len(time))
    ts = time[i0:i1]
    ys = y[i0:i1] - level
    if len(ts) < 2:
        return None
    a, b = ys[:-1], ys[1:]
    if direction == "rise":
        hits = (a < 0) & (b >= 0)
    elif direction == "fall":
        hits = (a > 0) & (b <= 0)
    else:
        hits = ((a < 0) & (b >= 0)) | ((a > 0) & (b <= 0))
    for j in np.flatnonzero(hits):
        tj, tk = ts[j], ts[j + 1]
        frac = a[j] / (a[j] - b[j])
        tc = tj + frac * (tk - tj)
        if tc < t0:
            continue
        if tc > t1:
            return None
        return float(tc)
    return None


def wl_edge(wf: WaveformSet, sched: StimulusSchedule, cycle: int, edge: str) -> float:
    """Time WL crosses VDD/2 on the cycle's rising or falling edge."""
    if edge == "rise":
        t0, t1 = sched.wl_rise(cycle), sched.wl_rise(cycle) + sched.edge_time
    else:
        t0, t1 = sched.wl_fall(cycle), sched.wl_fall(cycle) + sched.edge_time
    t = crossing(wf.time, wf.v("wl"), 0.5 * sched.vdd, t0 - sched.edge_time, t1 + sched.edge_time, edge)
    if t is None:
        raise MeasurementError(f"WL has no {edge} edge in cycle {cycle}")
    return t


def write_delay(wf: WaveformSet, sched: StimulusSchedule, cycle: int) -> float:
    """Delay from WL reaching 50% to X covering half its swing toward the stored target."""
    trit = sched.trits[cycle]
    t_wl = wl_edge(wf, sched, cycle, "rise")
    x = wf.v("x")
    x0 = wf.at(x, sched.wl_rise(cycle))
    target = sched.target(trit)
    swing = target - x0
    if abs(swing) < 1e-3 * sched.vdd:
        return 0.0
    level = x0 + 0.5 * swing
    w0, w1 = sched.write_window(cycle)
    t_x = crossing(wf.time, x, level, w0, w1, "rise" if swing > 0 else "fall")
    if t_x is None:
        raise TargetNeverReached(
            f"X never reached {level:.4g} V while writing {trit} in cycle {cycle}"
        )
    # X may start moving before WL is half way up; that counts as no delay
    return max(t_x - t_wl, 0.0)


def read_sense_time(wf: WaveformSet, sched: StimulusSchedule, cycle: int, expected_trit: int | None = None,
                    variant: MetricVariant | str = MetricVariant.EXCURSION) -> float:
    """Time from WL falling through 50% until BL2 has fallen by 20% of the read excursion."""
    trit = sched.trits[cycle] if expected_trit is None else expected_trit
    if trit not in (0, 1, 2):
        raise ValueError(f"invalid trit {trit!r}")
    if trit == 0:
        return 0.0
    variant = MetricVariant(variant)
    t_fall = wl_edge(wf, sched, cycle, "fall")
    r0, r1 = sched.read_window(cycle)
    bl2 = wf.v("bl2")
    v_start = wf.at(bl2, t_fall)
    if variant is MetricVariant.EXCURSION:
        excursion = sched.vdd / 2 if trit == 1 else sched.vdd
    else:
        excursion = v_start - wf.at(bl2, r1)
    if not excursion > 0:
        raise ExcursionNeverReached(f"BL2 did not fall during the read in cycle {cycle}")
    level = v_start - 0.2 * excursion
    t = crossing(wf.time, bl2, level, t_fall, r1, "fall")
    if t is None:
        raise ExcursionNeverReached(
            f"BL2 never fell to {level:.4g} V reading {trit} in cycle {cycle}"
        )
    return t - t_fall


def _mean(time, y, t0, t1) -> float:
    mask = (time >= t0) & (time <= t1)
    ts, ys = time[mask], y[mask]
    if len(ts) < 2 or ts[-1] <= ts[0]:
        return 0.0
    return float(np.trapezoid(ys, ts) / (ts[-1] - ts[0]))


def cycle_current(wf: WaveformSet, sched: StimulusSchedule, cycle: int, branches=CELL_BRANCHES) -> float:
    """Cycle-average of the summed magnitudes of the BL1->X and BL2 discharge branch currents."""
    total = sum(np.abs(wf.i(b)) for b in branches)
    return _mean(wf.time, total, sched.cycle_start(cycle), sched.cycle_end(cycle))


def source_power(wf: WaveformSet, t0: float, t1: float, sources) -> float:
    """Time-average power delivered by the named voltage sources over [t0, t1]."""
    terminals = wf.meta["sources"]
    total = np.zeros_like(wf.time)
    for name in sources:
        n_plus, n_minus = terminals[name]
        total = total + (wf.v(n_plus) - wf.v(n_minus)) * -wf.i(name)
    return _mean(wf.time, total, t0, t1)


def cycle_power(wf: WaveformSet, sched: StimulusSchedule, cycle: int, sources=CELL_SOURCES) -> tuple[float, float]:
    """(power delivered by the cell's sources, VDD x cycle current), both cycle averages."""
    t0, t1 = sched.cycle_start(cycle), sched.cycle_end(cycle)
    delivered = source_power(wf, t0, t1, sources)
    return delivered, sched.vdd * cycle_current(wf, sched, cycle)


def band(v: float, vdd: float) -> int:
    if v < vdd / 3:
        return 0
    if v < 2 * vdd / 3:
        return 1
    return 2


def classify_read(time, sense_out, window: tuple[float, float], vdd: float) -> int:
    """Trit read from the sense output at the end of ``window``.

    Raises AmbiguousRead if the output changes band in the last 10% of the window.
    """
    t0, t1 = window
    time = np.asarray(time)
    sense_out = np.asarray(sense_out)
    final = band(float(np.interp(t1, time, sense_out)), vdd)
    tail = (time >= t1 - 0.1 * (t1 - t0)) & (time <= t1)
    bands = {band(float(v), vdd) for v in sense_out[tail]}
    if bands - {final}:
        raise AmbiguousRead(f"sense output moves between bands {sorted(bands)} at the end of the window")
    return final


def read_trit(wf: WaveformSet, sched: StimulusSchedule, cycle: int) -> int:
    return classify_read(wf.time, wf.v(SENSE_OUT), sched.read_window(cycle), sched.vdd)


def sense_time(wf: WaveformSet, sched: StimulusSchedule, cycle: int, expected_trit: int | None = None) -> float:
    """Time from WL falling through 50% until the sense output enters the band of the stored trit."""
    trit = sched.trits[cycle] if expected_trit is None else expected_trit
    if trit == 0:
        return 0.0
    t_fall = wl_edge(wf, sched, cycle, "fall")
    level = sched.vdd / 3 if trit == 1 else 2 * sched.vdd / 3
    t = crossing(wf.time, wf.v(SENSE_OUT), level, t_fall, sched.read_window(cycle)[1], "rise")
    if t is None:
        raise ExcursionNeverReached(f"sense output never reached band {trit} in cycle {cycle}")
    return t - t_fall


def sense_supply(wf: WaveformSet, sched: StimulusSchedule, cycle: int) -> tuple[float, float]:
    """(average current, average power) drawn from the sense supply over a cycle."""
    t0, t1 = sched.cycle_start(cycle), sched.cycle_end(cycle)
    current = _mean(wf.time, -wf.i(SENSE_SUPPLY), t0, t1)
    return current, source_power(wf, t0, t1, (SENSE_SUPPLY,))


@dataclass(frozen=True)
class CycleMeasurements:
    cycle: int
    written_trit: int
    write_time: float
    read_sense_time: float
    avg_current: float
    avg_power: float
    avg_power_vdd_current: float
    stored_x: float

    def as_report(self) -> dict:
        return {
            "cycle": self.cycle,
            "trit": self.written_trit,
            "write_time_s": self.write_time,
            "read_sense_time_s": self.read_sense_time,
            "avg_current_a": self.avg_current,
            "avg_power_w": self.avg_power,
            "avg_power_vdd_x_current_w": self.avg_power_vdd_current,
            "stored_x_v": self.stored_x,
        }


@dataclass(frozen=True)
class SenseMeasurements:
    cycle: int
    read_trit: int
    sense_time: float
    avg_current: float
    avg_power: float

    def as_report(self) -> dict:
        return {
            "cycle": self.cycle,
            "sense_trit": self.read_trit,
            "sense_time_s": self.sense_time,
            "sense_avg_current_a": self.avg_current,
            "sense_avg_power_w": self.avg_power,
        }


def stored_value(wf: WaveformSet, sched: StimulusSchedule, cycle: int) -> float:
    """X at the end of the cycle's write half."""
    return wf.at(wf.v("x"), sched.write_window(cycle)[1])


def measure_cycle(wf: WaveformSet, sched: StimulusSchedule, cycle: int,
                  variant: MetricVariant | str = MetricVariant.EXCURSION) -> CycleMeasurements:
    power, power_vi = cycle_power(wf, sched, cycle)
    return CycleMeasurements(
        cycle=cycle,
        written_trit=sched.trits[cycle],
        write_time=write_delay(wf, sched, cycle),
        read_sense_time=read_sense_time(wf, sched, cycle, variant=variant),
        avg_current=cycle_current(wf, sched, cycle),
        avg_power=power,
        avg_power_vdd_current=power_vi,
        stored_x=stored_value(wf, sched, cycle),
    )


def measure_sense_cycle(wf: WaveformSet, sched: StimulusSchedule, cycle: int) -> SenseMeasurements:
    current, power = sense_supply(wf, sched, cycle)
    return SenseMeasurements(cycle, read_trit(wf, sched, cycle), sense_time(wf, sched, cycle), current, power)


def report_json(cycles, sense=None) -> str:
    rows = []
    for k, m in enumerate(cycles):
        row = m.as_report()
        if sense is not None:
            row.update(sense[k].as_report())
        rows.append(row)
    return json.dumps({"cycles": rows}, indent=2)
