"""Builders for the 3T ternary DRAM cell deck and its ternary sense circuit.

Cell node names: ``wl``, ``bl1``, ``x`` (storage), ``bl2``, ``a`` (M2/M3
junction), ``vdd``. Element names: ``m1`` ``m2`` ``m3`` ``cs`` ``cbl``
``spre`` ``vwl`` ``vbl1`` ``vdd``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from ..device import (
    Chirality,
    CntfetDevice,
    NOMINAL_CHANNEL_LENGTH,
    NOMINAL_OXIDE_THICKNESS,
    NOMINAL_TEMPERATURE,
    Polarity,
)
from .model import GROUND, Capacitor, Circuit, Cntfet, Pwl, Switch, VoltageSource


class InvalidTrit(ValueError):
    pass


@dataclass(frozen=True)
class CellParams:
    vdd: float = 1.2
    c_s: float = 0.1e-15
    c_bl: float = 0.7e-15
    vth_m1: float = 0.24
    vth_m2: float = 0.6
    vth_m3: float = -0.24
    edge_time: float = 50e-12
    cycle_time: float = 2e-9
    temperature: float = NOMINAL_TEMPERATURE
    channel_length: float = NOMINAL_CHANNEL_LENGTH
    oxide_thickness: float = NOMINAL_OXIDE_THICKNESS
    tubes_m1: int = 1
    tubes_m2: int = 34
    tubes_m3: int = 34
    precharge_ron: float = 10e3
    switch_roff: float = 1e12
    sense_load: float = 0.1e-15
    sense_tubes: int = 4

    def __post_init__(self):
        positive = ("vdd", "c_s", "c_bl", "vth_m1", "vth_m2", "edge_time", "cycle_time",
                    "channel_length", "oxide_thickness", "precharge_ron", "switch_roff", "sense_load")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.vth_m3 < 0:
            raise ValueError("vth_m3 must be negative (P device)")
        if not self.edge_time < self.cycle_time / 4:
            raise ValueError("edge_time must be shorter than a quarter cycle")
        if self.precharge_ron >= self.switch_roff:
            raise ValueError("precharge_ron must be below switch_roff")

    def with_(self, **changes) -> "CellParams":
        return replace(self, **changes)

    def device(self, polarity: Polarity, chirality, vth=None, tubes: int = 1) -> CntfetDevice:
        return CntfetDevice(
            polarity,
            Chirality(*chirality),
            tubes=tubes,
            channel_length=self.channel_length,
            oxide_thickness=self.oxide_thickness,
            vth_override=vth,
        )


@dataclass(frozen=True)
class StimulusSchedule:
    """Timing of a cell run. Cycle k spans [k*T, (k+1)*T).

    BL1 ramps to the trit level at the cycle start, WL rises two edge times
    later and falls half a cycle after that. The read half-cycle runs from
    the WL falling edge to the end of the cycle.
    """

    trits: tuple[int, ...]
    vdd: float
    cycle_time: float
    edge_time: float
    vth_m1: float

    @property
    def n_cycles(self) -> int:
        return len(self.trits)

    @property
    def t_stop(self) -> float:
        return self.n_cycles * self.cycle_time

    def cycle_start(self, k: int) -> float:
        self._check(k)
        return k * self.cycle_time

    def cycle_end(self, k: int) -> float:
        return self.cycle_start(k) + self.cycle_time

    def wl_rise(self, k: int) -> float:
        """Start of the WL rising ramp."""
        return self.cycle_start(k) + 2 * self.edge_time

    def wl_fall(self, k: int) -> float:
        """Start of the WL falling ramp."""
        return self.wl_rise(k) + self.cycle_time / 2

    def write_window(self, k: int) -> tuple[float, float]:
        return self.wl_rise(k), self.wl_fall(k) + self.edge_time

    def read_window(self, k: int) -> tuple[float, float]:
        return self.wl_fall(k), self.cycle_end(k)

    def level(self, trit: int) -> float:
        return trit_level(trit, self.vdd)

    def target(self, trit: int) -> float:
        """Value node X should hold after writing ``trit``."""
        if trit == 2:
            return self.vdd - self.vth_m1
        return self.level(trit)

    def _check(self, k):
        if not 0 <= k < self.n_cycles:
            raise IndexError(f"cycle {k} outside 0..{self.n_cycles - 1}")


def trit_level(trit: int, vdd: float) -> float:
    return {0: 0.0, 1: 0.5 * vdd, 2: vdd}[_check_trit(trit)]


def _check_trit(t) -> int:
    if isinstance(t, bool) or t not in (0, 1, 2):
        raise InvalidTrit(f"invalid trit {t!r}: must be 0, 1 or 2")
    return int(t)


def _dedupe(points):
    out = []
    for p in points:
        if not out or out[-1] != p:
            out.append(p)
    return tuple(out)


def wordline_waveform(s: StimulusSchedule) -> Pwl:
    pts = [(0.0, 0.0)]
    for k in range(s.n_cycles):
        r, f = s.wl_rise(k), s.wl_fall(k)
        pts += [(r, 0.0), (r + s.edge_time, s.vdd), (f, s.vdd), (f + s.edge_time, 0.0)]
    return Pwl(_dedupe(pts))


def bitline_waveform(s: StimulusSchedule) -> Pwl:
    pts = [(0.0, 0.0)]
    prev = 0.0
    for k, trit in enumerate(s.trits):
        t0 = s.cycle_start(k)
        lvl = s.level(trit)
        pts += [(t0, prev), (t0 + s.edge_time, lvl)]
        prev = lvl
    return Pwl(_dedupe(pts))


# M1 and M3 use the (23,0) tube (0.239 V); M2 uses the nearest semiconducting
# zigzag tube to 0.6 V, (10,0). The stated thresholds override both.
M1_CHIRALITY = (23, 0)
M2_CHIRALITY = (10, 0)
M3_CHIRALITY = (23, 0)


def build_dram_cell(p: CellParams, sequence: Sequence[int]) -> tuple[Circuit, StimulusSchedule]:
    """3T ternary DRAM cell driven through ``sequence``, one WL cycle per trit."""
    trits = tuple(_check_trit(t) for t in sequence)
    if not trits:
        raise InvalidTrit("trit sequence is empty")
    sched = StimulusSchedule(trits, p.vdd, p.cycle_time, p.edge_time, p.vth_m1)
    m1 = p.device(Polarity.N, M1_CHIRALITY, p.vth_m1, p.tubes_m1)
    m2 = p.device(Polarity.N, M2_CHIRALITY, p.vth_m2, p.tubes_m2)
    m3 = p.device(Polarity.P, M3_CHIRALITY, p.vth_m3, p.tubes_m3)
    elements = [
        Cntfet("m1", m1, drain="x", gate="wl", source="bl1"),
        Capacitor("cs", p.c_s, "x", GROUND),
        # read path: BL2 -> M3 (P, gated by WL) -> A -> M2 (gated by X) -> ground
        Cntfet("m3", m3, drain="a", gate="wl", source="bl2"),
        Cntfet("m2", m2, drain="a", gate="x", source=GROUND),
        Capacitor("cbl", p.c_bl, "bl2", GROUND),
        Switch("spre", "vwl", 0.5 * p.vdd, p.precharge_ron, p.switch_roff, "bl2", "vdd"),
        VoltageSource("vwl", wordline_waveform(sched), "wl", GROUND),
        VoltageSource("vbl1", bitline_waveform(sched), "bl1", GROUND),
        VoltageSource("vdd", Pwl.dc(p.vdd), "vdd", GROUND),
    ]
    title = "3T ternary DRAM " + "".join(str(t) for t in trits)
    return Circuit.build(elements, title=title, temperature=p.temperature), sched


# Standard ternary inverter: the direct output pair sets the rails, the
# low-threshold pair plus two diode-connected tubes sets the middle level.
STI_OUTPUT_CHIRALITY = (10, 0)
STI_PASS_CHIRALITY = (19, 0)
STI_DIODE_CHIRALITY = (19, 0)

SENSE_OUT = "sout"


def build_sense_circuit(p: CellParams, with_enable: bool = False, enabled: bool = True,
                        input_node: str = "bl2") -> Circuit:
    """Ternary sense inverter whose input gate attaches to ``input_node``.

    With ``with_enable`` a P header (gate ``enb``) and N footer (gate ``en``)
    cut the inverter from the rails; ``enabled`` sets the En level.
    The fragment carries its own supply source ``vsense``.
    """
    t = p.sense_tubes
    top = "svdd" if with_enable else "vdds"
    bottom = "sgnd" if with_enable else GROUND
    elements = [
        VoltageSource("vsense", Pwl.dc(p.vdd), "vdds", GROUND),
        Cntfet("msp1", p.device(Polarity.P, STI_OUTPUT_CHIRALITY, tubes=t), SENSE_OUT, input_node, top),
        Cntfet("msn1", p.device(Polarity.N, STI_OUTPUT_CHIRALITY, tubes=t), SENSE_OUT, input_node, bottom),
        Cntfet("msp2", p.device(Polarity.P, STI_PASS_CHIRALITY, tubes=t), "sn1", input_node, top),
        Cntfet("msd1", p.device(Polarity.N, STI_DIODE_CHIRALITY, tubes=t), "sn1", "sn1", SENSE_OUT),
        Cntfet("msd2", p.device(Polarity.N, STI_DIODE_CHIRALITY, tubes=t), SENSE_OUT, SENSE_OUT, "sn2"),
        Cntfet("msn2", p.device(Polarity.N, STI_PASS_CHIRALITY, tubes=t), "sn2", input_node, bottom),
        Capacitor("csout", p.sense_load, SENSE_OUT, GROUND),
    ]
    if with_enable:
        en = p.vdd if enabled else 0.0
        elements += [
            Cntfet("mhead", p.device(Polarity.P, STI_PASS_CHIRALITY, tubes=t), top, "enb", "vdds"),
            Cntfet("mfoot", p.device(Polarity.N, STI_PASS_CHIRALITY, tubes=t), bottom, "en", GROUND),
            VoltageSource("ven", Pwl.dc(en), "en", GROUND),
            VoltageSource("venb", Pwl.dc(p.vdd - en), "enb", GROUND),
        ]
    title = "ternary sense circuit" + (" with enable" if with_enable else "")
    return Circuit.build(elements, title=title, temperature=p.temperature)


def build_cell_with_sense(p: CellParams, sequence: Sequence[int], with_enable: bool = False,
                          enabled: bool = True) -> tuple[Circuit, StimulusSchedule]:
    cell, sched = build_dram_cell(p, sequence)
    sense = build_sense_circuit(p, with_enable=with_enable, enabled=enabled)
    return cell.merged(sense, title=cell.title + " + sense"), sched
