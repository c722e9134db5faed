import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cphase_switch import fock, model
from cphase_switch.model import PolarizationPairState, SwitchParams

R_SMALL = math.sqrt(4.7 / 256)
R_LARGE = math.sqrt(5.2 / 1.1)


def brute_max_shift(r, n=200_001):
    theta = np.linspace(-np.pi, np.pi, n)
    return np.abs(np.angle(1 + r * np.exp(1j * theta))).max()


class TestParams:
    def test_guard(self):
        with pytest.raises(ValueError, match="alpha"):
            SwitchParams(0.6, 0.1, 0.0)
        with pytest.raises(ValueError, match="bs2_transmissivity"):
            SwitchParams(0.1, 0.1, 0.0, bs2_transmissivity=1.3)

    def test_ratio_and_pump_phase(self):
        p = SwitchParams.from_ratio(0.1, 0.2, 2.0, 1.1)
        assert p.r == pytest.approx(2.0)
        assert p.theta_p == pytest.approx(1.1)
        q = SwitchParams(0.1 * cmath.exp(0.3j), 0.2 * cmath.exp(-1.0j), p.a_dc * cmath.exp(-0.7j))
        assert q.theta_p == pytest.approx(1.1)
        assert q.with_pump_phase(-0.4).theta_p == pytest.approx(-0.4)

    @pytest.mark.parametrize(
        "r,regime",
        [(0.0, model.Regime.SMALL), (0.5, model.Regime.SMALL), (1.0, model.Regime.BOUNDARY), (2.2, model.Regime.LARGE)],
    )
    def test_regime(self, r, regime):
        assert model.classify_regime(r).regime is regime


class TestAmplitudes:
    def test_product_state(self):
        a = model.evolved_amplitudes(SwitchParams(0.1, 0.2j, 0.0))
        assert a.c11 == a.c10 * a.c01

    def test_pure_down_conversion(self):
        a = model.evolved_amplitudes(SwitchParams(0.0, 0.0, 0.03))
        np.testing.assert_array_equal(a.as_array(), [1, 0, 0, 0.03])

    def test_against_exact_engine(self):
        p = SwitchParams(0.1, 0.1, 0.05j)
        assert model.evolved_amplitudes(p).c11 == pytest.approx(0.01 + 0.05j, abs=1e-15)
        basis = fock.FockBasis(2, 3)
        s = fock.spdc_evolve(fock.coherent_product_state([0.1, 0.1], basis), 0, 1, 0.05j).phase_aligned()
        exact = s.amplitude((1, 1)) / abs(s.amplitude((0, 0)))
        assert abs(exact - (0.01 + 0.05j)) / abs(0.01 + 0.05j) < 5e-3

    def test_conditional_amplitude(self):
        assert model.conditional_amplitude(SwitchParams(0.1, 0.2, 0)) == 0.1
        assert model.conditional_amplitude(SwitchParams(0, 0.2, 0.01)) == pytest.approx(0.05)
        a_dc = 0.01 * cmath.exp(1j * math.radians(95))
        expected = complex(0.1 + 0.1 * math.cos(math.radians(95)), 0.1 * math.sin(math.radians(95)))
        assert model.conditional_amplitude(SwitchParams(0.1, 0.1, a_dc)) == pytest.approx(expected, abs=1e-15)
        with pytest.raises(ZeroDivisionError):
            model.conditional_amplitude(SwitchParams(0.1, 0, 0.01))


class TestPhaseShift:
    def test_zero_ratio(self):
        for t in np.linspace(-3, 3, 7):
            assert model.conditional_phase_shift(0, t) == 0

    def test_small_regime_maximum(self):
        assert R_SMALL == pytest.approx(0.1355, abs=1e-4)
        brute = brute_max_shift(R_SMALL)
        assert brute == pytest.approx(math.asin(R_SMALL), abs=1e-9)
        assert math.degrees(brute) == pytest.approx(7.79, abs=0.01)
        assert math.degrees(model.max_small_regime_shift(R_SMALL)) == pytest.approx(7.79, abs=0.01)

    def test_large_regime_point(self):
        t = math.radians(95)
        oracle = math.degrees(math.atan2(2.174 * math.sin(t), 1 + 2.174 * math.cos(t)))
        assert oracle == pytest.approx(69.5, abs=0.05)
        assert math.degrees(model.conditional_phase_shift(2.174, t)) == pytest.approx(oracle, abs=1e-12)

    def test_extreme_limit(self):
        t = math.radians(123)
        assert math.degrees(model.conditional_phase_shift(1000, t)) == pytest.approx(123, abs=0.1)

    def test_undefined_point(self):
        with pytest.raises(model.UndefinedPhaseError):
            model.conditional_phase_shift(1.0, math.pi)

    def test_interval(self):
        assert model.conditional_phase_shift(5.0, math.pi) == pytest.approx(math.pi)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 0.999), st.floats(-2 * math.pi, 2 * math.pi))
    def test_small_regime_bound(self, r, t):
        assert abs(model.conditional_phase_shift(r, t)) <= math.asin(r) + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.001, 0.999))
    def test_bound_attained(self, r):
        assert abs(model.conditional_phase_shift(r, math.acos(-r))) == pytest.approx(math.asin(r), abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.001, 1e3))
    def test_large_regime_monotone(self, r):
        theta = np.linspace(0, 2 * np.pi, 4001, endpoint=False)
        phi = np.unwrap(model.theory_curve(r, theta).phase_shift)
        assert np.all(np.diff(phi) > 0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(100, 1e6), st.floats(0, 2 * math.pi))
    def test_extreme_convergence(self, r, t):
        assert abs(model.wrap_phase(model.conditional_phase_shift(r, t) - t)) <= math.asin(1 / r) + 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 50), st.floats(-math.pi, math.pi))
    def test_rate_phase_consistency(self, r, t):
        z = 1 + r * cmath.exp(1j * t)
        assume(abs(z) > 1e-9)
        rebuilt = math.sqrt(model.pair_rate_modulation(r, t)) * cmath.exp(1j * model.conditional_phase_shift(r, t))
        assert abs(rebuilt - z) <= 1e-12 * max(1, abs(z))


class TestRates:
    def test_values(self):
        assert model.pair_rate_modulation(0, 1.0) == 1
        assert model.pair_rate_modulation(1, math.pi) == pytest.approx(0, abs=1e-30)
        m = model.pair_rate_modulation(0.1355, 0)
        assert m == pytest.approx(1.1355**2, rel=1e-14)
        assert 256 * m == pytest.approx(330, abs=0.5)


class TestTheoryCurve:
    def test_zero_ratio(self):
        c = model.theory_curve(0, np.linspace(0, 6, 10))
        assert np.all(c.phase_shift == 0)

    def test_small_regime_extrema(self):
        c = model.theory_curve(R_SMALL, np.linspace(0, 2 * np.pi, 3601))
        assert math.degrees(c.phase_shift.max()) == pytest.approx(7.79, abs=0.01)
        assert math.degrees(c.phase_shift.min()) == pytest.approx(-7.79, abs=0.01)

    def test_flags_undefined(self):
        c = model.theory_curve(1.0, [0.0, math.pi, 1.0])
        assert c.defined.tolist() == [True, False, True]
        assert math.isnan(c.phase_shift[1])
        assert len(c.points()) == 3

    def test_matches_pointwise(self):
        theta = np.linspace(-3, 3, 13)
        c = model.theory_curve(R_LARGE, theta)
        for t, phi in c.points():
            assert phi == pytest.approx(model.conditional_phase_shift(R_LARGE, t), abs=1e-14)


class TestDet1:
    def test_no_reference(self):
        p = SwitchParams(0.1, 0.1, 0, ref_amp=0, bs2_transmissivity=0.9)
        np.testing.assert_allclose(model.det1_singles_probability(0.1, p, np.linspace(0, 6, 5)), 0.9 * 0.01)

    def test_full_visibility(self):
        p = SwitchParams(0.1, 0.1, 0, ref_amp=0.1, bs2_transmissivity=0.5)
        assert model.det1_singles_probability(0.1, p, math.pi) == pytest.approx(0, abs=1e-18)
        assert model.fringe_visibility(0.1, p) == pytest.approx(1)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(0, 20),
        st.floats(-math.pi, math.pi),
        st.floats(0.01, 0.3),
        st.floats(0.01, 0.3),
        st.floats(0.05, 0.95),
    )
    def test_fringe_shift_identity(self, r, t, alpha, ref, trans):
        assume(abs(1 + r * cmath.exp(1j * t)) > 1e-6)
        beta = 0.01
        assume(r * alpha * beta <= 0.5)
        p = SwitchParams.from_ratio(alpha, beta, r, t, ref_amp=ref, bs2_transmissivity=trans)
        cond = model.conditional_amplitude(p)
        shift = model.conditional_phase_shift(r, t)
        phi = np.linspace(0, 2 * np.pi, 37)
        lhs = model.det1_singles_probability(cond * alpha / abs(cond), p, phi)
        rhs = model.det1_singles_probability(alpha, p, phi - shift)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestPolarization:
    def test_identity(self):
        s = PolarizationPairState(0.1, 0.6, 0.8, 0, 0)
        out = model.polarization_switch(s, 0)
        np.testing.assert_allclose(out.coefficients(), s.coefficients())

    def test_bell_state(self):
        out = model.polarization_switch(PolarizationPairState(0.1, 1, 0, 0, 0), 0.1)
        np.testing.assert_allclose(out.coefficients(), np.array([1, 0, 0, 1]) / math.sqrt(2), atol=1e-15)
        assert model.concurrence(out) == pytest.approx(1, abs=1e-12)

    def test_only_vv_touched(self):
        out = model.polarization_switch(PolarizationPairState(0.1, 0, 1, 0, 0), 0.05)
        assert out.b == pytest.approx(1 / math.sqrt(1.25))
        assert out.d == pytest.approx(0.5 / math.sqrt(1.25))
        assert out.a == 0 and out.c == 0

    def test_physical_pair_amplitude_preserved(self):
        s = PolarizationPairState(0.1, 0.3, 0.4, 0.5, 0.2)
        out = model.polarization_switch(s, 0.02j)
        assert out.eps * out.d == pytest.approx(s.eps * s.d + 0.02j)
        assert out.eps * out.a == pytest.approx(s.eps * s.a)

    def test_eps_zero(self):
        with pytest.raises(ZeroDivisionError):
            model.polarization_switch(PolarizationPairState(0, 1, 0, 0, 0), 0.1)

    @pytest.mark.parametrize(
        "coeffs,expected",
        [((1, 0, 0, 0), 0.0), ((1, 0, 0, 1), 1.0), ((1, 0, 0, 0.5), 2 * 0.5 / 1.25)],
    )
    def test_concurrence(self, coeffs, expected):
        assert model.concurrence(PolarizationPairState(1, *coeffs)) == pytest.approx(expected, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=1), min_size=4, max_size=4), st.floats(-math.pi, math.pi))
    def test_concurrence_global_phase(self, coeffs, g):
        assume(np.linalg.norm(coeffs) > 1e-3)
        s = PolarizationPairState(1, *coeffs)
        rot = PolarizationPairState(1, *(np.array(coeffs) * cmath.exp(1j * g)))
        assert model.concurrence(rot) == pytest.approx(model.concurrence(s), abs=1e-12)


class TestContract:
    def test_no_switch(self):
        rep = model.cphi_contract_check(SwitchParams(0.1, 0.1j, 0))
        assert rep.passed
        assert rep.phase_shift == 0 and rep.residual_10 == 0 and rep.residual_01 == 0

    def test_small_regime(self):
        for t in np.linspace(-3, 3, 25):
            rep = model.cphi_contract_check(SwitchParams.from_ratio(0.05, 0.05, R_SMALL, t))
            assert rep.passed
            assert abs(rep.phase_shift) <= math.asin(R_SMALL) + 1e-12

    def test_large_regime_half_turn(self):
        rep = model.cphi_contract_check(SwitchParams.from_ratio(0.05, 0.05, 3.0, math.pi))
        assert rep.passed
        assert abs(rep.phase_shift) == pytest.approx(math.pi)

    def test_agrees_with_exact_engine(self):
        rng = np.random.default_rng(3)
        basis = fock.FockBasis(2, 3)
        for ma, mb, mk in itertools.product([0.02, 0.05, 0.1], repeat=3):
            a = ma * cmath.exp(1j * rng.uniform(0, 2 * np.pi))
            b = mb * cmath.exp(1j * rng.uniform(0, 2 * np.pi))
            k = mk * cmath.exp(1j * rng.uniform(0, 2 * np.pi))
            rep = model.cphi_contract_check(SwitchParams(a, b, k))
            s = fock.spdc_evolve(fock.coherent_product_state([a, b], basis), 0, 1, k)
            cond, _ = fock.project_on_click(s, [1], clicked=True)
            exact = cmath.phase(fock.conditional_mode_ratio(cond, 0, {1: 1}) / a)
            assert abs(model.wrap_phase(exact - rep.phase_shift)) <= 10 * max(ma, mb, mk)


def test_pump_delay_conversion_warns():
    with pytest.warns(UserWarning, match="360 deg per pump period"):
        deg = model.pump_delay_to_phase_deg(1.6)
    assert deg == pytest.approx(1.6 / (405e-9 / 299_792_458.0 * 1e15) * 360)
    assert deg == pytest.approx(426, abs=1)


def test_wrap_phase():
    assert model.wrap_phase(math.pi) == pytest.approx(math.pi)
    assert model.wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert model.wrap_phase(math.radians(350)) == pytest.approx(math.radians(-10))
