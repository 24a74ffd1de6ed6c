from pathlib import Path

import pytest

from tdram.device import Chirality, CntfetDevice, Polarity
from tdram.netlist import (
    CellParams,
    Capacitor,
    Circuit,
    Cntfet,
    InvalidTrit,
    NetlistError,
    Pwl,
    Switch,
    VoltageSource,
    build_cell_with_sense,
    build_dram_cell,
    build_sense_circuit,
    parse_netlist,
    parse_value,
    serialize,
    validate,
)

CORPUS = Path(__file__).parent / "corpus"
VALID = sorted((CORPUS / "valid").glob("*.sp"))
MALFORMED = sorted((CORPUS / "malformed").glob("*.sp"))


def test_corpus_sizes():
    assert len(VALID) >= 15
    assert len(MALFORMED) >= 10


class TestValues:
    @pytest.mark.parametrize("text, value", [
        ("0.1f", 0.1e-15), ("1meg", 1e6), ("1MEG", 1e6), ("2.2k", 2200.0), ("10u", 10e-6),
        ("3n", 3e-9), ("4p", 4e-12), ("5m", 5e-3), ("1t", 1e12), ("1g", 1e9), ("-1.5e-3", -1.5e-3), (".5", 0.5),
    ])
    def test_suffixes(self, text, value):
        assert parse_value(text) == pytest.approx(value, rel=1e-15)

    @pytest.mark.parametrize("text", ["abc", "1x", "", "1..2"])
    def test_bad(self, text):
        with pytest.raises(NetlistError):
            parse_value(text)


class TestParseExamples:
    def test_capacitor(self):
        c = parse_netlist("V1 x 0 dc 1\nC1 x 0 0.1f\n")
        cap = c.element("c1")
        assert isinstance(cap, Capacitor)
        assert cap.farads == pytest.approx(0.1e-15)
        assert set(cap.terminals) == {"x", "0"}

    def test_cntfet(self):
        c = parse_netlist("V1 wl 0 dc 1\nV2 bl1 0 dc 0\nC1 x 0 1f\nM1 x wl bl1 n chirality=23,0 tubes=3\n")
        m = c.element("M1")
        assert isinstance(m, Cntfet)
        assert (m.drain, m.gate, m.source) == ("x", "wl", "bl1")
        assert m.device.polarity is Polarity.N
        assert m.device.chirality == Chirality(23, 0)
        assert m.device.tubes == 3

    def test_unknown_suffix_position(self):
        with pytest.raises(NetlistError) as ei:
            parse_netlist("C1 x 0 0.1q")
        assert ei.value.line == 1
        assert "unknown suffix 'q'" in str(ei.value)

    def test_switch_default_threshold(self):
        c = parse_netlist("V1 a 0 pwl(0 0 1n 1.2)\nS1 a b ctrl=v1 ron=1k roff=1t\nC1 b 0 1f\n")
        assert c.element("s1").threshold == pytest.approx(0.6)

    def test_title_and_temp(self):
        c = parse_netlist(".title hello world\n.temp 70\nV1 a 0 1\nC1 a 0 1f\n")
        assert c.title == "hello world"
        assert c.temperature == 70.0

    def test_ground_first(self):
        c = parse_netlist("V1 a 0 1\nC1 a 0 1f\n")
        assert c.nodes[0].name == "0" and c.nodes[0].index == 0


@pytest.mark.parametrize("path", VALID, ids=lambda p: p.stem)
def test_round_trip(path):
    c1 = parse_netlist(path.read_text())
    text = serialize(c1)
    c2 = parse_netlist(text)
    assert c2 == c1
    assert serialize(c2) == text


@pytest.mark.parametrize("path", MALFORMED, ids=lambda p: p.stem)
def test_malformed_positioned(path):
    with pytest.raises(NetlistError) as ei:
        parse_netlist(path.read_text())
    assert ei.value.line >= 1
    assert ei.value.column >= 1
    assert str(ei.value).startswith(f"line {ei.value.line}, column {ei.value.column}:")


@pytest.mark.parametrize("text, needle", [
    ("V1 x 0 dc 1\nC1 x 0 1f\nC2 z 0 1f\n", "'z'"),
    ("V1 x 0 dc 1\nS1 x 0 ctrl=vq ron=1k roff=1t\n", "'vq'"),
    ("V1 x 0 dc 1\nM1 x x 0 n chirality=ab\n", "chirality"),
    ("V1 x 0 dc 1\nC1 x 0 1f\nc1 x 0 1f\n", "duplicate"),
    ("V1 x 0 dc 1\nQ1 x 0 1f\n", "unknown element letter"),
])
def test_error_messages(text, needle):
    with pytest.raises(NetlistError, match=needle):
        parse_netlist(text)


def _src(name="v1", node="a"):
    return VoltageSource(name, Pwl.dc(1.0), node, "0")


class TestValidate:
    def test_cell_clean(self):
        c, _ = build_dram_cell(CellParams(), [0, 1, 2])
        assert validate(c) == []

    def test_undeclared_node(self):
        good = Circuit.build([_src(), Capacitor("c1", 1e-15, "a", "0")])
        bad = Circuit(good.nodes, good.elements + (Capacitor("c2", 1e-15, "z", "0"),))
        diags = validate(bad)
        assert len(diags) == 1
        assert "z" in str(diags[0])

    def test_no_source(self):
        c = Circuit.build([Capacitor("c1", 1e-15, "a", "0")])
        diags = validate(c)
        assert len(diags) == 1
        assert "source" in diags[0].message

    def test_element_invariants(self):
        c = Circuit.build([
            _src(),
            Capacitor("c1", 0.0, "a", "0"),
            Switch("s1", "v1", 0.5, 1e6, 1e3, "a", "0"),
            Switch("s2", "vx", 0.5, 1e3, 1e6, "a", "0"),
        ])
        subjects = sorted(d.subject for d in validate(c))
        assert subjects == ["c1", "s1", "s2"]

    def test_unconnected_node(self):
        c = Circuit.build([_src()], extra_nodes=["lonely"])
        assert [d.subject for d in validate(c)] == ["lonely"]


class TestCellBuilder:
    def test_counts(self):
        c, _ = build_dram_cell(CellParams(), [0, 1, 2])
        assert c.transistor_count == 3
        assert len(c.of_type(Capacitor)) == 2
        assert len(c.of_type(Switch)) == 1
        assert len(c.of_type(VoltageSource)) == 3

    def test_empty(self):
        with pytest.raises(InvalidTrit):
            build_dram_cell(CellParams(), [])

    @pytest.mark.parametrize("bad", [[3], [0, -1], [1.5], [True]])
    def test_bad_trit(self, bad):
        with pytest.raises(InvalidTrit):
            build_dram_cell(CellParams(), bad)

    def test_single_two(self):
        p = CellParams()
        c, s = build_dram_cell(p, [2])
        wl = c.element("vwl").waveform
        bl1 = c.element("vbl1").waveform
        rises = sum(1 for (t0, v0), (t1, v1) in zip(wl.points, wl.points[1:]) if v0 < v1)
        assert rises == 1
        w0, w1 = s.write_window(0)
        for t in (w0, 0.5 * (w0 + w1), w1):
            assert bl1(t) == 1.2

    def test_levels(self):
        p = CellParams()
        c, s = build_dram_cell(p, [0, 1, 2])
        bl1 = c.element("vbl1").waveform
        assert [bl1(s.write_window(k)[1]) for k in range(3)] == [0.0, 0.6, 1.2]
        assert s.target(2) == pytest.approx(0.96)

    def test_thresholds(self):
        c, _ = build_dram_cell(CellParams(), [0])
        assert c.element("m1").device.vth == 0.24
        assert c.element("m2").device.vth == 0.6
        assert c.element("m3").device.vth == -0.24
        assert c.element("m3").device.polarity is Polarity.P

    def test_deterministic(self):
        a, _ = build_dram_cell(CellParams(), [2, 0, 1])
        b, _ = build_dram_cell(CellParams(), [2, 0, 1])
        assert serialize(a) == serialize(b)

    def test_cell_round_trip(self):
        c, _ = build_cell_with_sense(CellParams(temperature=40.0), [0, 1, 2], with_enable=True)
        assert parse_netlist(serialize(c)) == c

    @pytest.mark.parametrize("kw", [dict(vdd=0), dict(c_s=-1e-15), dict(vth_m3=0.24), dict(edge_time=1e-9)])
    def test_params_invalid(self, kw):
        with pytest.raises(ValueError):
            CellParams(**kw)

    def test_schedule(self):
        _, s = build_dram_cell(CellParams(), [0, 1, 2])
        assert s.t_stop == pytest.approx(6e-9)
        r0, r1 = s.read_window(1)
        w0, w1 = s.write_window(1)
        assert s.cycle_start(1) < w0 < r0 < w1 < r1 == s.cycle_end(1)
        with pytest.raises(IndexError):
            s.cycle_start(3)


class TestSenseBuilder:
    def test_counts(self):
        assert build_sense_circuit(CellParams()).transistor_count == 6
        assert build_sense_circuit(CellParams(), with_enable=True).transistor_count == 8

    def test_chiralities(self):
        c = build_sense_circuit(CellParams())
        assert c.element("msn1").device.chirality == Chirality(10, 0)
        assert c.element("msp2").device.chirality == Chirality(19, 0)

    def test_merged_valid(self):
        c, _ = build_cell_with_sense(CellParams(), [1], with_enable=True)
        assert validate(c) == []
        assert c.transistor_count == 11

    def test_merge_clash(self):
        c = Circuit.build([_src()])
        with pytest.raises(ValueError):
            c.merged(Circuit.build([_src()]))


def test_pwl():
    w = Pwl(((0.0, 0.0), (1.0, 2.0)))
    assert w(-1) == 0.0 and w(0.5) == 1.0 and w(5) == 2.0
    with pytest.raises(ValueError):
        Pwl(((1.0, 0.0), (0.0, 1.0)))


def test_device_field_round_trip():
    dev = CntfetDevice(Polarity.P, Chirality(13, 2), tubes=5, channel_length=12.5, oxide_thickness=3.25,
                       k_on=33e-6, i_off=3e-12, ss=85.0, vth_override=-0.31)
    c = Circuit.build([_src("vd", "d"), _src("vg", "g"), Cntfet("mx", dev, "d", "g", "0")])
    assert parse_netlist(serialize(c)) == c
