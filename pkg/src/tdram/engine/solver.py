from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..netlist.model import Capacitor, Circuit, Cntfet, Switch, VoltageSource, validate
from . import kernel

log = logging.getLogger(__name__)

SOURCE_STEPS = 10


class Method(str, enum.Enum):
    BACKWARD_EULER = "be"
    TRAPEZOIDAL = "trap"


class NonConvergence(RuntimeError):
    def __init__(self, message: str, iterations: int = 0, worst_node: str = "", time: float | None = None):
        self.iterations = iterations
        self.worst_node = worst_node
        self.time = time
        super().__init__(message)


class InvalidCircuit(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    t_stop: float
    dt: float = 0.1e-12
    method: Method = Method.TRAPEZOIDAL
    v_tol: float = 1e-6
    i_tol: float = 1e-12
    max_newton: int = 50
    g_min: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_stop > self.dt:
            raise ValueError("t_stop must exceed dt")
        if not (self.v_tol > 0 and self.i_tol > 0 and self.g_min > 0):
            raise ValueError("tolerances and g_min must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")


@dataclass
class WaveformSet:
    """Sampled node voltages and branch currents.

    Branch currents are positive flowing into ``n_plus`` (or the drain) from
    the external circuit.
    """

    time: np.ndarray
    node_voltages: dict[str, np.ndarray]
    branch_currents: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.time)
        for kind in (self.node_voltages, self.branch_currents):
            for name, s in kind.items():
                if len(s) != n:
                    raise ValueError(f"series {name!r} has {len(s)} samples, time has {n}")

    def v(self, node: str) -> np.ndarray:
        if node == "0":
            return np.zeros_like(self.time)
        return self.node_voltages[node.lower()]

    def i(self, element: str) -> np.ndarray:
        return self.branch_currents[element.lower()]

    def at(self, series: np.ndarray, t: float) -> float:
        return float(np.interp(t, self.time, series))

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of samples with t0 <= t <= t1."""
        return (self.time >= t0) & (self.time <= t1)

    def equals(self, other: "WaveformSet") -> bool:
        """Bit-identical comparison."""
        if not np.array_equal(self.time, other.time):
            return False
        for a, b in ((self.node_voltages, other.node_voltages), (self.branch_currents, other.branch_currents)):
            if a.keys() != b.keys():
                return False
            if not all(np.array_equal(a[k], b[k]) for k in a):
                return False
        return True


@dataclass
class Compiled:
    circuit: Circuit
    node_names: list[str]  # non-ground, in matrix order
    caps: list[Capacitor]
    switches: list[Switch]
    fets: list[Cntfet]
    sources: list[VoltageSource]
    arrays: dict

    @property
    def n(self) -> int:
        return len(self.node_names)

    @property
    def size(self) -> int:
        return self.n + len(self.sources)

    def cap_args(self):
        a = self.arrays
        return a["cap_a"], a["cap_b"], a["cap_c"]

    def switch_args(self):
        a = self.arrays
        return a["sw_a"], a["sw_b"], a["sw_ctrl"], a["sw_thr"], a["sw_gon"], a["sw_goff"]

    def fet_args(self):
        a = self.arrays
        return a["fet_d"], a["fet_g"], a["fet_s"], a["fet_p"]

    def source_args(self):
        a = self.arrays
        return a["src_a"], a["src_b"], a["src_off"], a["src_t"], a["src_v"]


def compile_circuit(c: Circuit) -> Compiled:
    problems = validate(c)
    if problems:
        raise InvalidCircuit("; ".join(str(p) for p in problems))
    names = [n.name for n in c.nodes[1:]]
    index = {name: i for i, name in enumerate(names)}
    index["0"] = -1

    def idx(*nodes):
        return [index[x] for x in nodes]

    caps = c.of_type(Capacitor)
    switches = c.of_type(Switch)
    fets = c.of_type(Cntfet)
    sources = c.of_type(VoltageSource)
    src_pos = {s.name.lower(): j for j, s in enumerate(sources)}

    def ints(values, width=None):
        arr = np.array(values, dtype=np.int64)
        return arr.reshape(-1) if width is None else arr.reshape(-1, width)

    def floats(values):
        return np.array(values, dtype=np.float64).reshape(-1)

    off = [0]
    pt, pv = [], []
    for s in sources:
        for t, v in s.waveform.points:
            pt.append(t)
            pv.append(v)
        off.append(len(pt))

    fet_p = np.array([f.device.effective(c.temperature) for f in fets], dtype=np.float64).reshape(-1, 6)
    arrays = dict(
        cap_a=ints([index[x.n_plus] for x in caps]),
        cap_b=ints([index[x.n_minus] for x in caps]),
        cap_c=floats([x.farads for x in caps]),
        sw_a=ints([index[x.n_plus] for x in switches]),
        sw_b=ints([index[x.n_minus] for x in switches]),
        sw_ctrl=ints([src_pos[x.ctrl.lower()] for x in switches]),
        sw_thr=floats([x.threshold for x in switches]),
        sw_gon=floats([1.0 / x.on_resistance for x in switches]),
        sw_goff=floats([1.0 / x.off_resistance for x in switches]),
        fet_d=ints([index[x.drain] for x in fets]),
        fet_g=ints([index[x.gate] for x in fets]),
        fet_s=ints([index[x.source] for x in fets]),
        fet_p=fet_p,
        src_a=ints([index[x.n_plus] for x in sources]),
        src_b=ints([index[x.n_minus] for x in sources]),
        src_off=ints(off),
        src_t=floats(pt),
        src_v=floats(pv),
    )
    return Compiled(c, names, caps, switches, fets, sources, arrays)


def _newton(comp: Compiled, x, t, scale, gmin, v_tol, i_tol, max_iter):
    empty = np.zeros(len(comp.caps))
    return kernel.newton(x, t, comp.n, gmin, scale, False, 0.0, False,
                         *comp.cap_args(), empty, empty,
                         *comp.switch_args(), *comp.fet_args(), *comp.source_args(),
                         v_tol, i_tol, max_iter)


def _solve_op(comp: Compiled, at_time: float, cfg: SolverConfig | None) -> np.ndarray:
    v_tol = cfg.v_tol if cfg else 1e-6
    i_tol = cfg.i_tol if cfg else 1e-12
    max_iter = cfg.max_newton if cfg else 50
    gmin = cfg.g_min if cfg else 1e-12

    x = np.zeros(comp.size)
    ok, iters, worst = _newton(comp, x, at_time, 1.0, gmin, v_tol, i_tol, max_iter)
    if ok:
        return x
    log.debug("plain Newton failed at t=%g after %d iterations; source stepping", at_time, iters)
    x = np.zeros(comp.size)
    total = iters
    for step in range(1, SOURCE_STEPS + 1):
        ok, iters, worst = _newton(comp, x, at_time, step / SOURCE_STEPS, gmin, v_tol, i_tol, max_iter)
        total += iters
        if not ok:
            name = comp.node_names[worst] if comp.n else ""
            raise NonConvergence(
                f"operating point at t={at_time:g} s did not converge (source step {step}/{SOURCE_STEPS}, "
                f"worst node '{name}')",
                iterations=total,
                worst_node=name,
                time=at_time,
            )
    return x


def dc_operating_point(c: Circuit, at_time: float = 0.0, cfg: SolverConfig | None = None) -> dict[str, float]:
    """Node voltages with sources frozen at ``at_time`` and capacitors open."""
    comp = compile_circuit(c)
    x = _solve_op(comp, at_time, cfg)
    out = {"0": 0.0}
    out.update({name: float(x[i]) for i, name in enumerate(comp.node_names)})
    return out


_METHOD_CODES = {Method.BACKWARD_EULER: kernel.BACKWARD_EULER, Method.TRAPEZOIDAL: kernel.TRAPEZOIDAL}


def transient(c: Circuit, cfg: SolverConfig) -> WaveformSet:
    """Fixed-step transient from the t=0 operating point."""
    comp = compile_circuit(c)
    x0 = _solve_op(comp, 0.0, cfg)
    n_steps = int(math.ceil(cfg.t_stop / cfg.dt - 1e-9))
    samples = n_steps + 1
    out_x = np.zeros((samples, comp.size))
    out_icap = np.zeros((samples, len(comp.caps)))
    out_isw = np.zeros((samples, len(comp.switches)))
    out_ifet = np.zeros((samples, len(comp.fets)))
    status, t_fail, worst = kernel.run_transient(
        x0, comp.n, n_steps, cfg.dt, _METHOD_CODES[cfg.method], cfg.g_min, cfg.v_tol, cfg.i_tol,
        cfg.max_newton, *comp.cap_args(), *comp.switch_args(), *comp.fet_args(), *comp.source_args(),
        out_x, out_icap, out_isw, out_ifet,
    )
    if status != kernel.OK:
        name = comp.node_names[worst] if comp.n else ""
        raise NonConvergence(
            f"transient step at t={t_fail:.6g} s failed after {kernel.MAX_HALVINGS} halvings (worst node '{name}')",
            iterations=cfg.max_newton,
            worst_node=name,
            time=float(t_fail),
        )

    time = np.arange(samples, dtype=np.float64) * cfg.dt
    nodes = {name: out_x[:, i].copy() for i, name in enumerate(comp.node_names)}
    currents = {}
    for j, s in enumerate(comp.sources):
        currents[s.name.lower()] = out_x[:, comp.n + j].copy()
    for j, e in enumerate(comp.caps):
        currents[e.name.lower()] = out_icap[:, j].copy()
    for j, e in enumerate(comp.switches):
        currents[e.name.lower()] = out_isw[:, j].copy()
    for j, e in enumerate(comp.fets):
        currents[e.name.lower()] = out_ifet[:, j].copy()
    # stable column order: elements as declared
    currents = {e.name.lower(): currents[e.name.lower()] for e in c.elements}
    for arr in list(nodes.values()) + list(currents.values()):
        if not np.all(np.isfinite(arr)):
            raise NonConvergence("non-finite sample in transient result")
    return WaveformSet(time, nodes, currents, meta={
        "title": c.title, "dt": cfg.dt, "method": cfg.method.value,
        "sources": {s.name.lower(): (s.n_plus, s.n_minus) for s in comp.sources},
    })
