"""Circuit data model: nodes, elements, stimuli and validation."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Union

from ..device import CntfetDevice, NOMINAL_TEMPERATURE

GROUND = "0"


@dataclass(frozen=True)
class Pwl:
    """Piecewise-linear waveform; holds the end values outside its span."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.points)
        if not pts:
            raise ValueError("pwl needs at least one point")
        for (t0, _), (t1, _) in zip(pts, pts[1:]):
            if t1 < t0:
                raise ValueError(f"pwl times must be non-decreasing ({t0:g} then {t1:g})")
        object.__setattr__(self, "points", pts)

    @classmethod
    def dc(cls, v: float) -> "Pwl":
        return cls(((0.0, v),))

    @property
    def is_dc(self) -> bool:
        return len(self.points) == 1

    def __call__(self, t: float) -> float:
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1]
        if t >= pts[-1][0]:
            return pts[-1][1]
        times = [p[0] for p in pts]
        i = bisect.bisect_right(times, t)
        (t0, v0), (t1, v1) = pts[i - 1], pts[i]
        if t1 == t0:
            return v1
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)

    def scaled(self, factor: float) -> "Pwl":
        return Pwl(tuple((t, v * factor) for t, v in self.points))

    @property
    def peak(self) -> float:
        return max(v for _, v in self.points)


@dataclass(frozen=True)
class Cntfet:
    name: str
    device: CntfetDevice
    drain: str
    gate: str
    source: str

    @property
    def terminals(self):
        return (self.drain, self.gate, self.source)


@dataclass(frozen=True)
class Capacitor:
    name: str
    farads: float
    n_plus: str
    n_minus: str

    @property
    def terminals(self):
        return (self.n_plus, self.n_minus)


@dataclass(frozen=True)
class VoltageSource:
    name: str
    waveform: Pwl
    n_plus: str
    n_minus: str

    @property
    def terminals(self):
        return (self.n_plus, self.n_minus)


@dataclass(frozen=True)
class Switch:
    """Voltage-controlled resistor; on while the control source exceeds ``threshold``."""

    name: str
    ctrl: str
    threshold: float
    on_resistance: float
    off_resistance: float
    n_plus: str
    n_minus: str

    @property
    def terminals(self):
        return (self.n_plus, self.n_minus)


Element = Union[Cntfet, Capacitor, VoltageSource, Switch]


@dataclass(frozen=True)
class Node:
    name: str
    index: int


@dataclass(frozen=True)
class Circuit:
    nodes: tuple[Node, ...]
    elements: tuple[Element, ...]
    title: str = ""
    temperature: float = NOMINAL_TEMPERATURE

    @classmethod
    def build(
        cls,
        elements: Iterable[Element],
        title: str = "",
        temperature: float = NOMINAL_TEMPERATURE,
        extra_nodes: Iterable[str] = (),
    ) -> "Circuit":
        """Collect nodes in first-use order; ground is always index 0."""
        elements = tuple(elements)
        names = [GROUND]
        seen = {GROUND}
        for name in [n for e in elements for n in e.terminals] + list(extra_nodes):
            if name not in seen:
                seen.add(name)
                names.append(name)
        nodes = tuple(Node(n, i) for i, n in enumerate(names))
        return cls(nodes=nodes, elements=elements, title=title, temperature=temperature)

    @property
    def node_names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def element(self, name: str) -> Element:
        key = name.lower()
        for e in self.elements:
            if e.name.lower() == key:
                return e
        raise KeyError(name)

    def of_type(self, kind) -> list:
        return [e for e in self.elements if isinstance(e, kind)]

    @property
    def transistor_count(self) -> int:
        return len(self.of_type(Cntfet))

    def merged(self, other: "Circuit", title: str | None = None) -> "Circuit":
        """Union of two circuits joined on node names; element names must not clash."""
        names = {e.name.lower() for e in self.elements}
        clash = [e.name for e in other.elements if e.name.lower() in names]
        if clash:
            raise ValueError(f"element names collide: {', '.join(clash)}")
        return Circuit.build(
            self.elements + other.elements,
            title=self.title if title is None else title,
            temperature=self.temperature,
            extra_nodes=self.node_names + other.node_names,
        )

    def with_temperature(self, temperature: float) -> "Circuit":
        return Circuit(self.nodes, self.elements, self.title, temperature)


@dataclass(frozen=True)
class Diagnostic:
    subject: str
    message: str

    def __str__(self):
        return f"{self.subject}: {self.message}"


def validate(c: Circuit) -> list[Diagnostic]:
    """Check circuit invariants; an empty list means the circuit is usable."""
    out: list[Diagnostic] = []
    names = [n.name for n in c.nodes]
    declared = set(names)

    if not names or names[0] != GROUND or c.nodes[0].index != 0:
        out.append(Diagnostic(GROUND, "ground node '0' must be present at index 0"))
    if len(declared) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        out.append(Diagnostic(", ".join(dupes), "duplicate node names"))
    if [n.index for n in c.nodes] != list(range(len(c.nodes))):
        out.append(Diagnostic("nodes", "node indices must be dense and ordered"))

    seen: dict[str, str] = {}
    for e in c.elements:
        key = e.name.lower()
        if key in seen:
            out.append(Diagnostic(e.name, "duplicate element name"))
        seen[key] = e.name
        for t in e.terminals:
            if t not in declared:
                out.append(Diagnostic(e.name, f"references undeclared node '{t}'"))
        if isinstance(e, Capacitor) and not e.farads > 0:
            out.append(Diagnostic(e.name, f"capacitance must be positive, got {e.farads:g}"))
        if isinstance(e, Switch):
            if not 0 < e.on_resistance < e.off_resistance:
                out.append(Diagnostic(e.name, "need 0 < on_resistance < off_resistance"))

    sources = {e.name.lower() for e in c.elements if isinstance(e, VoltageSource)}
    if not sources:
        out.append(Diagnostic(c.title or "circuit", "circuit has no voltage source"))
    for sw in c.of_type(Switch):
        if sw.ctrl.lower() not in sources:
            out.append(Diagnostic(sw.name, f"control source '{sw.ctrl}' does not exist"))

    used = {t for e in c.elements for t in e.terminals}
    for n in names[1:]:
        if n not in used:
            out.append(Diagnostic(n, "node is not connected to any element"))
    return out
