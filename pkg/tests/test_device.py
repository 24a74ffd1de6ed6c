import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdram.device import (
    CONSTANTS,
    Chirality,
    ChiralityError,
    CntfetDevice,
    Conduction,
    Polarity,
    REFERENCE_VTH,
    chiral_angle,
    classify_conduction,
    drain_current,
    threshold_voltage,
    tube_diameter,
)

A_NM = 0.249
V_PI = 3.033


def hand_vth_zigzag(n):
    # D = a n / pi for (n, 0), so Vth = pi V_pi / (sqrt(3) n)
    return math.pi * V_PI / (math.sqrt(3) * n)


semiconducting_zigzag = st.integers(min_value=1, max_value=200).filter(lambda n: n % 3 != 0)


class TestChirality:
    def test_constants_fixed(self):
        assert CONSTANTS.a_nm == 0.249
        assert CONSTANTS.v_pi_ev == 3.033
        with pytest.raises(Exception):
            CONSTANTS.a_nm = 0.3

    @pytest.mark.parametrize("bad", [(0, 0), (-1, 0), (3, 5), (1.5, 0)])
    def test_invalid_rejected(self, bad):
        with pytest.raises(ChiralityError):
            Chirality(*bad)

    def test_str(self):
        assert str(Chirality(19, 0)) == "19,0"


class TestDiameter:
    @pytest.mark.parametrize("c, expected, tol", [
        ((19, 0), 1.5059, 1e-4),
        ((10, 0), 0.79259, 1e-5),
        ((1, 0), 0.249 / math.pi, 1e-12),
    ])
    def test_examples(self, c, expected, tol):
        assert tube_diameter(Chirality(*c)) == pytest.approx(expected, abs=tol)

    def test_hand_formula_general(self):
        n, m = 12, 5
        assert tube_diameter((n, m)) == pytest.approx(A_NM * math.sqrt(n * n + m * m + n * m) / math.pi, rel=1e-14)

    def test_zero_rejected(self):
        with pytest.raises(ChiralityError):
            tube_diameter((0, 0))

    @given(st.integers(min_value=1, max_value=300))
    def test_strictly_increasing_zigzag(self, n):
        assert tube_diameter((n + 1, 0)) > tube_diameter((n, 0))


class TestChiralAngle:
    @pytest.mark.parametrize("c, expected", [((5, 5), 30.0), ((19, 0), 60.0), ((1, 1), 30.0)])
    def test_examples(self, c, expected):
        assert chiral_angle(c) == pytest.approx(expected, abs=1e-12)

    @given(st.integers(1, 50), st.integers(0, 50), st.integers(2, 5))
    def test_scale_invariant(self, n, m, k):
        if m > n:
            n, m = m, n
        assert chiral_angle((k * n, k * m)) == pytest.approx(chiral_angle((n, m)), abs=1e-12)


class TestConduction:
    @pytest.mark.parametrize("c, kind", [
        ((6, 6), Conduction.METALLIC),
        ((9, 0), Conduction.METALLIC),
        ((19, 0), Conduction.SEMICONDUCTING),
    ])
    def test_examples(self, c, kind):
        assert classify_conduction(c) is kind

    def test_brute_force(self):
        for n in range(1, 31):
            for m in range(0, n + 1):
                metallic = (n - m) % 3 == 0
                assert (classify_conduction((n, m)) is Conduction.METALLIC) == metallic, (n, m)


class TestThreshold:
    @pytest.mark.parametrize("c, expected", [((19, 0), 0.28954), ((10, 0), 0.55012), ((23, 0), 0.2392)])
    def test_examples(self, c, expected):
        assert threshold_voltage(c) == pytest.approx(expected, abs=1e-4)

    @pytest.mark.parametrize("n", [1, 2, 4, 10, 19, 23, 100])
    def test_matches_hand_evaluation(self, n):
        assert threshold_voltage((n, 0)) == pytest.approx(hand_vth_zigzag(n), rel=1e-13)

    def test_metallic_rejected(self):
        with pytest.raises(ChiralityError):
            threshold_voltage((9, 0))

    @given(semiconducting_zigzag, semiconducting_zigzag)
    def test_ratio_law(self, n1, n2):
        ratio = threshold_voltage((n1, 0)) / threshold_voltage((n2, 0))
        assert ratio == pytest.approx(n2 / n1, rel=1e-12)

    @given(semiconducting_zigzag)
    def test_decreasing_in_n(self, n):
        nxt = n + 1 if (n + 1) % 3 else n + 2
        assert threshold_voltage((nxt, 0)) < threshold_voltage((n, 0))

    def test_reference(self):
        assert REFERENCE_VTH == threshold_voltage((19, 0))


def n_dev(**kw):
    return CntfetDevice(Polarity.N, Chirality(19, 0), **kw)


def p_dev(**kw):
    return CntfetDevice(Polarity.P, Chirality(19, 0), **kw)


class TestDevice:
    @pytest.mark.parametrize("kw", [dict(tubes=0), dict(channel_length=0), dict(oxide_thickness=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            n_dev(**kw)

    def test_metallic_device_rejected(self):
        with pytest.raises(ChiralityError):
            CntfetDevice(Polarity.N, Chirality(9, 0))

    def test_signed_vth(self):
        assert n_dev().vth == pytest.approx(0.28954, abs=1e-4)
        assert p_dev().vth == pytest.approx(-0.28954, abs=1e-4)
        assert CntfetDevice(Polarity.P, Chirality(23, 0), vth_override=-0.24).vth == -0.24

    def test_subthreshold_leakage(self):
        for tubes in (1, 3):
            i = drain_current(n_dev(tubes=tubes), 0.0, 1.2)
            ioff = 1e-12 * tubes
            assert ioff / 10 < i < 10 * ioff

    def test_zero_bias(self):
        assert drain_current(n_dev(), 0.0, 0.0) == 0.0
        assert drain_current(p_dev(), 0.0, 0.0) == 0.0

    def test_gate_ordering(self):
        d = n_dev()
        assert drain_current(d, 1.2, 1.2) > drain_current(d, 0.6, 1.2) > drain_current(d, 0.3, 1.2)

    def test_tubes_scale_linearly(self):
        assert drain_current(n_dev(tubes=4), 0.9, 0.5) == pytest.approx(4 * drain_current(n_dev(), 0.9, 0.5), rel=1e-12)

    @settings(max_examples=200)
    @given(st.floats(-1.5, 1.5), st.floats(0.001, 0.3), st.floats(0.0, 1.5))
    def test_monotone_in_vgs(self, vgs, dv, vds):
        d = n_dev()
        assert drain_current(d, vgs + dv, vds) >= drain_current(d, vgs, vds)

    @given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
    def test_p_symmetry(self, vgs, vds):
        assert drain_current(p_dev(), vgs, vds) == -drain_current(n_dev(), -vgs, -vds)

    @given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
    def test_source_drain_swap(self, vg, vd):
        # exchanging drain and source terminals reverses the current
        d = n_dev()
        assert drain_current(d, vg, vd) == pytest.approx(-drain_current(d, vg - vd, -vd), rel=1e-12, abs=1e-30)

    @pytest.mark.parametrize("vds", [0.05, 0.3, 1.2])
    def test_continuous_at_threshold(self, vds):
        d = n_dev()
        below = drain_current(d, d.vth - 1e-9, vds)
        above = drain_current(d, d.vth + 1e-9, vds)
        assert above == pytest.approx(below, rel=1e-3)

    def test_temperature(self):
        d = n_dev()
        assert drain_current(d, 0.0, 1.2, 70) > drain_current(d, 0.0, 1.2, 25)
        assert drain_current(d, 0.0, 1.2, 37) == pytest.approx(2 * drain_current(d, 0.0, 1.2, 25), rel=1e-2)
        # strong inversion: k_on derating wins
        strong = lambda t: drain_current(d, 1.2, 1.2, t) - drain_current(d, d.vth, 1.2, t)
        assert strong(70) < strong(25)

    def test_geometry_scaling(self):
        base = n_dev()
        short = n_dev(channel_length=8.0)
        extra = lambda dev: drain_current(dev, 1.2, 1.2) - drain_current(dev, dev.vth, 1.2)
        assert extra(short) == pytest.approx(2 * extra(base), rel=1e-9)
