"""Line-oriented SPICE-flavoured netlist reader and writer.

Grammar (one element per line, case-insensitive)::

    M<name> <drain> <gate> <source> <n|p> chirality=<n>,<m> [tubes=K] [vth=V]
            [l=<nm>] [tox=<nm>] [kon=<A/V^2>] [ioff=<A>] [ss=<mV/dec>]
    C<name> <n+> <n-> <farads>
    V<name> <n+> <n-> dc <v>  |  pwl(<t> <v> ...)
    S<name> <n+> <n-> ctrl=<source> ron=<ohms> roff=<ohms> [vt=<volts>]
    * comment
    .title <text>   .temp <celsius>   .end
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass

from ..device import (
    Chirality,
    ChiralityError,
    CntfetDevice,
    NOMINAL_CHANNEL_LENGTH,
    NOMINAL_OXIDE_THICKNESS,
    NOMINAL_TEMPERATURE,
    Polarity,
)
from .model import GROUND, Capacitor, Circuit, Cntfet, Pwl, Switch, VoltageSource, validate

SUFFIXES = {
    "t": 1e12,
    "g": 1e9,
    "meg": 1e6,
    "k": 1e3,
    "m": 1e-3,
    "u": 1e-6,
    "µ": 1e-6,
    "n": 1e-9,
    "p": 1e-12,
    "f": 1e-15,
}

_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([^\d.+-].*)?$")
_NAME = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.:#\[\]-]*$")
_TOKEN_CHARS = re.compile(r"[A-Za-z0-9_.:#\[\]+\-=,µ]")

_DEFAULTS = CntfetDevice(Polarity.N, Chirality(19, 0))


class NetlistError(ValueError):
    """Parse failure with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(str(self))

    def __str__(self):
        if self.column:
            return f"line {self.line}, column {self.column}: {self.message}"
        return f"line {self.line}: {self.message}"


@dataclass
class _Tok:
    text: str
    col: int


def parse_value(text: str, line: int = 0, column: int = 0) -> float:
    """Parse a number with an optional engineering suffix (``0.1f``, ``1meg``)."""
    m = _NUMBER.match(text.strip())
    if not m:
        raise NetlistError(f"malformed number '{text}'", line, column)
    value = float(m.group(1))
    suffix = (m.group(2) or "").lower()
    if suffix:
        if suffix not in SUFFIXES:
            raise NetlistError(f"unknown suffix '{m.group(2)}'", line, column + len(m.group(1)))
        value *= SUFFIXES[suffix]
    return value


def _tokenize(text: str, line: int) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            toks.append(_Tok(ch, i + 1))
            i += 1
        elif _TOKEN_CHARS.match(ch):
            start = i
            while i < len(text) and _TOKEN_CHARS.match(text[i]):
                i += 1
            toks.append(_Tok(text[start:i], start + 1))
        else:
            raise NetlistError(f"unexpected character {ch!r}", line, i + 1)
    return toks


def _node(tok: _Tok, line: int) -> str:
    if "=" in tok.text or not _NAME.match(tok.text):
        raise NetlistError(f"bad node name '{tok.text}'", line, tok.col)
    return tok.text.lower()


def _keywords(toks: list[_Tok], line: int, allowed: set[str]) -> dict[str, _Tok]:
    out: dict[str, _Tok] = {}
    for t in toks:
        key, eq, val = t.text.partition("=")
        key = key.lower()
        if not eq or not val:
            raise NetlistError(f"expected key=value, got '{t.text}'", line, t.col)
        if key not in allowed:
            raise NetlistError(f"unknown parameter '{key}'", line, t.col)
        if key in out:
            raise NetlistError(f"parameter '{key}' given twice", line, t.col)
        out[key] = _Tok(val, t.col + len(key) + 1)
    return out


def _require_count(toks, n, line, what):
    if len(toks) < n:
        col = toks[-1].col + len(toks[-1].text) if toks else 1
        raise NetlistError(f"{what}: expected at least {n - 1} fields after the name", line, col)


def _chirality(tok: _Tok, line: int) -> Chirality:
    parts = tok.text.split(",")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise NetlistError(f"malformed chirality '{tok.text}', expected <n>,<m>", line, tok.col)
    try:
        return Chirality(int(parts[0]), int(parts[1]))
    except ChiralityError as exc:
        raise NetlistError(f"malformed chirality '{tok.text}': {exc}", line, tok.col) from None


def _parse_cntfet(name, toks, line):
    _require_count(toks, 6, line, "transistor")
    drain, gate, source = (_node(t, line) for t in toks[1:4])
    pol = toks[4].text.lower()
    if pol not in ("n", "p"):
        raise NetlistError(f"polarity must be n or p, got '{toks[4].text}'", line, toks[4].col)
    kw = _keywords(toks[5:], line, {"chirality", "tubes", "vth", "l", "tox", "kon", "ioff", "ss"})
    if "chirality" not in kw:
        raise NetlistError("transistor needs chirality=<n>,<m>", line, toks[0].col)
    chir = _chirality(kw["chirality"], line)
    args = {}
    if "tubes" in kw:
        t = kw["tubes"]
        if not t.text.isdigit() or int(t.text) < 1:
            raise NetlistError(f"tubes must be a positive integer, got '{t.text}'", line, t.col)
        args["tubes"] = int(t.text)

    def num(key):
        return parse_value(kw[key].text, line, kw[key].col)

    if "vth" in kw:
        args["vth_override"] = num("vth")
    if "l" in kw:
        args["channel_length"] = num("l")
    if "tox" in kw:
        args["oxide_thickness"] = num("tox")
    if "kon" in kw:
        args["k_on"] = num("kon")
    if "ioff" in kw:
        args["i_off"] = num("ioff")
    if "ss" in kw:
        args["ss"] = num("ss")
    try:
        dev = CntfetDevice(Polarity(pol), chir, **args)
    except ChiralityError as exc:
        raise NetlistError(f"malformed chirality '{kw['chirality'].text}': {exc}", line, kw["chirality"].col) from None
    except ValueError as exc:
        raise NetlistError(str(exc), line, toks[0].col) from None
    return Cntfet(name, dev, drain, gate, source)


def _parse_capacitor(name, toks, line):
    _require_count(toks, 4, line, "capacitor")
    if len(toks) > 4:
        raise NetlistError(f"unexpected field '{toks[4].text}'", line, toks[4].col)
    a, b = _node(toks[1], line), _node(toks[2], line)
    value = parse_value(toks[3].text, line, toks[3].col)
    if not value > 0:
        raise NetlistError("capacitance must be positive", line, toks[3].col)
    return Capacitor(name, value, a, b)


def _parse_source(name, toks, line):
    _require_count(toks, 4, line, "voltage source")
    a, b = _node(toks[1], line), _node(toks[2], line)
    rest = toks[3:]
    kind = rest[0].text.lower()
    if kind == "dc":
        if len(rest) != 2:
            col = rest[-1].col
            raise NetlistError("dc needs exactly one value", line, col)
        return VoltageSource(name, Pwl.dc(parse_value(rest[1].text, line, rest[1].col)), a, b)
    if kind == "pwl":
        if len(rest) < 2 or rest[1].text != "(":
            raise NetlistError("expected '(' after pwl", line, rest[0].col + 3)
        if rest[-1].text != ")":
            raise NetlistError("unterminated pwl(...)", line, rest[-1].col + len(rest[-1].text))
        body = rest[2:-1]
        if any(t.text in "()" for t in body):
            bad = next(t for t in body if t.text in "()")
            raise NetlistError("unbalanced parenthesis", line, bad.col)
        if not body or len(body) % 2:
            raise NetlistError("pwl needs time/value pairs", line, rest[1].col)
        vals = [parse_value(t.text, line, t.col) for t in body]
        pts = list(zip(vals[0::2], vals[1::2]))
        for k in range(1, len(pts)):
            if pts[k][0] < pts[k - 1][0]:
                raise NetlistError("pwl times must be non-decreasing", line, body[2 * k].col)
        return VoltageSource(name, Pwl(tuple(pts)), a, b)
    if len(rest) == 1:
        return VoltageSource(name, Pwl.dc(parse_value(rest[0].text, line, rest[0].col)), a, b)
    raise NetlistError(f"expected dc or pwl, got '{rest[0].text}'", line, rest[0].col)


def _parse_switch(name, toks, line):
    _require_count(toks, 4, line, "switch")
    a, b = _node(toks[1], line), _node(toks[2], line)
    kw = _keywords(toks[3:], line, {"ctrl", "ron", "roff", "vt"})
    for key in ("ctrl", "ron", "roff"):
        if key not in kw:
            raise NetlistError(f"switch needs {key}=", line, toks[0].col)
    ron = parse_value(kw["ron"].text, line, kw["ron"].col)
    roff = parse_value(kw["roff"].text, line, kw["roff"].col)
    if not 0 < ron < roff:
        raise NetlistError("switch needs 0 < ron < roff", line, kw["ron"].col)
    vt = parse_value(kw["vt"].text, line, kw["vt"].col) if "vt" in kw else None
    return Switch(name, kw["ctrl"].text.lower(), vt, ron, roff, a, b), kw["ctrl"]


def parse_netlist(text: str) -> Circuit:
    """Parse netlist text into a validated :class:`Circuit`."""
    title = ""
    temperature = NOMINAL_TEMPERATURE
    elements = []
    names: dict[str, int] = {}
    refs: dict[str, list[tuple[int, int]]] = defaultdict(list)
    pending_switches = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if stripped.startswith("."):
            word, _, arg = stripped.partition(" ")
            word = word.lower()
            if word == ".title":
                title = arg.strip()
            elif word == ".end":
                break
            elif word == ".temp":
                col = raw.index(arg.strip()) + 1 if arg.strip() else len(raw) + 1
                if not arg.strip():
                    raise NetlistError(".temp needs a value", lineno, col)
                temperature = parse_value(arg.strip(), lineno, col)
            else:
                raise NetlistError(f"unsupported directive '{word}'", lineno, raw.index(".") + 1)
            continue

        toks = _tokenize(raw, lineno)
        head = toks[0]
        if not _NAME.match(head.text):
            raise NetlistError(f"bad element name '{head.text}'", lineno, head.col)
        name = head.text.lower()
        letter = name[0]
        if name in names:
            raise NetlistError(f"duplicate element name '{head.text}' (first on line {names[name]})", lineno, head.col)
        names[name] = lineno

        if letter == "m":
            el = _parse_cntfet(name, toks, lineno)
        elif letter == "c":
            el = _parse_capacitor(name, toks, lineno)
        elif letter == "v":
            el = _parse_source(name, toks, lineno)
        elif letter == "s":
            el, ctrl_tok = _parse_switch(name, toks, lineno)
            pending_switches.append((len(elements), ctrl_tok, lineno))
        else:
            raise NetlistError(f"unknown element letter '{head.text[0]}'", lineno, head.col)

        node_toks = [t for t in toks[1 : 1 + len(el.terminals)]]
        for node, t in zip(el.terminals, node_toks):
            refs[node].append((lineno, t.col))
        elements.append(el)

    sources = {e.name: e for e in elements if isinstance(e, VoltageSource)}
    for idx, ctrl_tok, lineno in pending_switches:
        sw = elements[idx]
        src = sources.get(sw.ctrl)
        if src is None:
            raise NetlistError(f"dangling reference: control source '{ctrl_tok.text}' is not defined", lineno, ctrl_tok.col)
        if sw.threshold is None:
            elements[idx] = Switch(sw.name, sw.ctrl, 0.5 * src.waveform.peak, sw.on_resistance,
                                   sw.off_resistance, sw.n_plus, sw.n_minus)

    for node, where in refs.items():
        if node != GROUND and len(where) < 2:
            lineno, col = where[0]
            raise NetlistError(f"dangling node '{node}' has a single connection", lineno, col)

    if not elements:
        raise NetlistError("netlist contains no elements", 1, 1)
    if not sources:
        raise NetlistError("netlist has no voltage source", max(names.values()), 1)
    circuit = Circuit.build(elements, title=title, temperature=temperature)
    problems = validate(circuit)
    if problems:
        raise NetlistError("; ".join(str(p) for p in problems), 0)
    return circuit


def _fmt(x: float) -> str:
    return repr(float(x))


def _device_fields(d: CntfetDevice) -> list[str]:
    out = [f"chirality={d.chirality.n},{d.chirality.m}"]
    if d.tubes != _DEFAULTS.tubes:
        out.append(f"tubes={d.tubes}")
    if d.vth_override is not None:
        out.append(f"vth={_fmt(d.vth_override)}")
    if d.channel_length != NOMINAL_CHANNEL_LENGTH:
        out.append(f"l={_fmt(d.channel_length)}")
    if d.oxide_thickness != NOMINAL_OXIDE_THICKNESS:
        out.append(f"tox={_fmt(d.oxide_thickness)}")
    if d.k_on != _DEFAULTS.k_on:
        out.append(f"kon={_fmt(d.k_on)}")
    if d.i_off != _DEFAULTS.i_off:
        out.append(f"ioff={_fmt(d.i_off)}")
    if d.ss != _DEFAULTS.ss:
        out.append(f"ss={_fmt(d.ss)}")
    return out


def serialize(c: Circuit) -> str:
    """Render a circuit in the netlist grammar; the output re-parses to an equal circuit."""
    lines = []
    if c.title:
        lines.append(f".title {c.title}")
    if c.temperature != NOMINAL_TEMPERATURE:
        lines.append(f".temp {_fmt(c.temperature)}")
    for e in c.elements:
        if isinstance(e, Cntfet):
            d = e.device
            fields = [e.name, e.drain, e.gate, e.source, d.polarity.value] + _device_fields(d)
        elif isinstance(e, Capacitor):
            fields = [e.name, e.n_plus, e.n_minus, _fmt(e.farads)]
        elif isinstance(e, VoltageSource):
            w = e.waveform
            if w.is_dc:
                spec = f"dc {_fmt(w.points[0][1])}"
            else:
                spec = "pwl(" + " ".join(f"{_fmt(t)} {_fmt(v)}" for t, v in w.points) + ")"
            fields = [e.name, e.n_plus, e.n_minus, spec]
        elif isinstance(e, Switch):
            fields = [e.name, e.n_plus, e.n_minus, f"ctrl={e.ctrl}", f"ron={_fmt(e.on_resistance)}",
                      f"roff={_fmt(e.off_resistance)}", f"vt={_fmt(e.threshold)}"]
        else:  # pragma: no cover
            raise TypeError(type(e))
        lines.append(" ".join(fields))
    lines.append(".end")
    return "\n".join(lines) + "\n"
