import cmath
import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cphase_switch import fock
from cphase_switch.fock import FockBasis, StateVector


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fock.TruncationWarning)
        yield


def series_coherent(amp, cutoff):
    """Direct evaluation of exp(-|a|^2/2) a^n / sqrt(n!), renormalized."""
    c = [math.exp(-abs(amp) ** 2 / 2) * amp**n / math.sqrt(math.factorial(n)) for n in range(cutoff + 1)]
    c = np.array(c, dtype=complex)
    return c / np.linalg.norm(c)


class TestBasis:
    def test_dimension(self):
        assert FockBasis(3, 3).dimension == 64
        assert FockBasis(2, 4).dimension == 25

    def test_enumeration_order(self):
        b = FockBasis(2, 2)
        assert b.states() == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]
        for i, occ in enumerate(b.states()):
            assert b.index(occ) == i

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            FockBasis(2, 0)
        with pytest.raises(ValueError):
            FockBasis(0, 3)
        with pytest.raises(IndexError):
            fock.coherent_state(2, 0.1, FockBasis(2, 3))

    def test_boundary_mask(self):
        b = FockBasis(2, 1)
        assert b.boundary_mask().tolist() == [False, True, True, True]


class TestCoherentState:
    def test_zero_amplitude_is_vacuum(self):
        s = fock.coherent_state(0, 0.0, FockBasis(2, 3))
        assert s.amplitudes[0] == 1
        assert np.count_nonzero(s.amplitudes) == 1

    def test_ratio(self):
        s = fock.coherent_state(0, 0.1, FockBasis(1, 3))
        assert abs(s.amplitudes[1] / s.amplitudes[0] - 0.1) < 1e-12

    def test_series_oracle(self):
        amp = 0.3
        s = fock.coherent_state(0, amp, FockBasis(1, 4))
        np.testing.assert_allclose(s.amplitudes, series_coherent(amp, 4), atol=1e-14)
        assert abs(s.norm - 1) < 1e-12
        # truncated <n> sits just below |amp|^2 by the dropped tail
        p = np.abs(series_coherent(amp, 4)) ** 2
        assert s.mean_photon_number() == pytest.approx(np.dot(np.arange(5), p), abs=1e-14)
        assert 0 < amp**2 - s.mean_photon_number() < 1e-4

    def test_other_mode_vacuum(self):
        b = FockBasis(2, 3)
        s = fock.coherent_state(1, 0.2j, b)
        assert s.amplitude((0, 1)) / s.amplitude((0, 0)) == pytest.approx(0.2j)
        assert abs(s.amplitude((1, 0))) == 0

    def test_leakage_warning(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", fock.TruncationWarning)
            with pytest.raises(fock.TruncationWarning):
                fock.coherent_state(0, 0.9, FockBasis(1, 3))

    def test_leakage_is_reported(self):
        s = fock.coherent_state(0, 0.5, FockBasis(1, 2))
        expected = np.abs(series_coherent(0.5, 2)[2]) ** 2
        assert s.leakage() == pytest.approx(expected, rel=1e-12)


class TestBeamsplitter:
    def test_identity(self):
        b = FockBasis(2, 3)
        np.testing.assert_allclose(fock.beamsplitter(b, 0, 1, 1.0).matrix, np.eye(16), atol=1e-14)

    @pytest.mark.parametrize("t", [0.5, 0.9])
    def test_single_photon_split(self, t):
        b = FockBasis(2, 3)
        out = fock.beamsplitter(b, 0, 1, t).apply(StateVector.fock(b, (1, 0)))
        assert abs(out.amplitude((1, 0))) ** 2 == pytest.approx(t, abs=1e-12)
        assert abs(out.amplitude((0, 1))) ** 2 == pytest.approx(1 - t, abs=1e-12)

    def test_heisenberg_output_field(self):
        # mode-0 output amplitude of coherent inputs is sqrt(T) a + e^{i phi} sqrt(1-T) b
        b = FockBasis(2, 6)
        t, phi, a, r = 0.7, 0.4, 0.1, 0.05j
        s = fock.beamsplitter(b, 0, 1, t, phi).apply(fock.coherent_product_state([a, r], b))
        expect = math.sqrt(t) * a + cmath.exp(1j * phi) * math.sqrt(1 - t) * r
        got = np.vdot(s.amplitudes, fock.annihilation(b, 0) @ s.amplitudes)
        assert abs(got - expect) < 1e-9

    def test_errors(self):
        b = FockBasis(2, 2)
        with pytest.raises(ValueError):
            fock.beamsplitter(b, 0, 0, 0.5)
        with pytest.raises(ValueError):
            fock.beamsplitter(b, 0, 1, 1.2)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0, 1), st.floats(-math.pi, math.pi))
    def test_unitary_and_number_conserving(self, t, phi):
        b = FockBasis(2, 3)
        op = fock.beamsplitter(b, 0, 1, t, phi)
        assert op.unitarity_error() <= 1e-9
        s = fock.coherent_product_state([0.3, 0.2j], b)
        assert op.apply(s).mean_photon_number() == pytest.approx(s.mean_photon_number(), abs=1e-9)


class TestPhaseShift:
    def test_identity_cases(self):
        s = fock.coherent_product_state([0.2, 0.1], FockBasis(2, 3))
        np.testing.assert_array_equal(fock.phase_shift(s, 0, 0.0).amplitudes, s.amplitudes)
        np.testing.assert_allclose(fock.phase_shift(s, 0, 2 * np.pi).amplitudes, s.amplitudes, atol=1e-12)

    def test_single_photon_quarter_turn(self):
        b = FockBasis(1, 2)
        out = fock.phase_shift(StateVector.fock(b, (1,)), 0, np.pi / 2)
        assert out.amplitude((1,)) == pytest.approx(1j)

    def test_operator_form_matches(self):
        b = FockBasis(2, 3)
        s = fock.coherent_product_state([0.2, 0.3], b)
        np.testing.assert_allclose(
            fock.phase_shifter(b, 1, 0.7).apply(s).amplitudes, fock.phase_shift(s, 1, 0.7).amplitudes
        )

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-10, 10))
    def test_number_conserving(self, theta):
        s = fock.coherent_product_state([0.3, 0.2], FockBasis(2, 3))
        assert fock.phase_shift(s, 1, theta).mean_photon_number() == pytest.approx(s.mean_photon_number(), abs=1e-9)


class TestSpdc:
    def test_zero_kappa(self):
        s = fock.coherent_product_state([0.1, 0.1], FockBasis(2, 3))
        assert fock.spdc_evolve(s, 0, 1, 0) is s

    def test_vacuum_pair_amplitude(self):
        kappa = 0.05
        out = fock.spdc_evolve(StateVector.vacuum(FockBasis(2, 3)), 0, 1, kappa)
        c11 = out.amplitude((1, 1))
        assert abs(c11 - kappa) <= abs(kappa) ** 3
        # closed-form two-mode squeezed vacuum: tanh(r)/cosh(r)
        assert c11 == pytest.approx(math.tanh(kappa) / math.cosh(kappa), abs=1e-6)

    def test_pair_amplitude_first_order(self):
        a = b = 0.1
        kappa = 0.05
        basis = FockBasis(2, 3)
        out = fock.spdc_evolve(fock.coherent_product_state([a, b], basis), 0, 1, kappa).phase_aligned()
        c = out.amplitudes / abs(out.amplitudes[0])
        assert abs(c[basis.index((1, 1))] - (a * b + kappa)) < 2e-4

    def test_norm_preserved(self):
        s = fock.coherent_product_state([0.1, 0.05j], FockBasis(2, 3))
        out = fock.spdc_evolve(s, 0, 1, 0.08 * cmath.exp(0.3j))
        assert abs(out.norm - 1) < 1e-9

    def test_squeezer_unitary(self):
        op = fock.two_mode_squeezer(FockBasis(2, 3), 0, 1, 0.1j)
        assert op.unitarity_error() <= 1e-9

    def test_excess_leakage_is_error(self):
        s = fock.coherent_product_state([0.1, 0.1], FockBasis(2, 1))
        with pytest.raises(fock.TruncationError, match="leakage"):
            fock.spdc_evolve(s, 0, 1, 0.05)

    def test_expm_routes_agree(self):
        b = FockBasis(2, 3)
        a1, a2 = fock.annihilation(b, 0), fock.annihilation(b, 1)
        k = 0.3 + 0.2j
        gen = k * a1.conj().T @ a2.conj().T - np.conj(k) * a1 @ a2
        from scipy.linalg import expm

        np.testing.assert_allclose(fock.expm_series(gen), expm(gen), atol=1e-12)
        np.testing.assert_allclose(fock.expm_series(8 * gen), expm(8 * gen), atol=1e-10)


def _grid_points(seed=0):
    rng = np.random.default_rng(seed)
    for ma, mb, mk in itertools.product([0.02, 0.05, 0.1], repeat=3):
        pa, pb, pk = rng.uniform(0, 2 * np.pi, 3)
        yield ma * cmath.exp(1j * pa), mb * cmath.exp(1j * pb), mk * cmath.exp(1j * pk)


def test_oracle_equivalence_grid():
    basis = FockBasis(2, 3)
    for a, b, k in _grid_points():
        out = fock.spdc_evolve(fock.coherent_product_state([a, b], basis), 0, 1, k).phase_aligned()
        c = out.amplitudes / abs(out.amplitudes[0])
        got = np.array([c[basis.index(o)] for o in [(0, 0), (1, 0), (0, 1), (1, 1)]])
        want = np.array([1, a, b, a * b + k])
        bound = 10 * max(abs(a), abs(b), abs(k)) ** 3
        assert np.abs(got - want).max() <= bound


def test_truncation_monotonicity():
    occs = [(0, 0), (1, 0), (0, 1), (1, 1)]
    for a, b, k in _grid_points(1):
        lo = fock.spdc_evolve(fock.coherent_product_state([a, b], FockBasis(2, 3)), 0, 1, k)
        hi = fock.spdc_evolve(fock.coherent_product_state([a, b], FockBasis(2, 4)), 0, 1, k)
        diff = max(abs(lo.amplitude(o) - hi.amplitude(o)) for o in occs)
        assert diff <= fock.DEFAULT_MAX_LEAKAGE


class TestClicks:
    def test_vacuum(self):
        d = fock.click_probabilities(StateVector.vacuum(FockBasis(2, 2)), ([0], [1]))
        assert d.none == 1

    def test_single_photon_det1(self):
        d = fock.click_probabilities(StateVector.fock(FockBasis(2, 2), (1, 0)), ([0], [1]))
        assert d.det1_only == 1

    def test_independent_thinning(self):
        d = fock.click_probabilities(StateVector.fock(FockBasis(2, 2), (1, 1)), ([0], [1]), (0.5, 0.5))
        np.testing.assert_allclose(d.as_array(), [0.25] * 4, atol=1e-15)

    def test_multi_photon_threshold(self):
        d = fock.click_probabilities(StateVector.fock(FockBasis(2, 3), (2, 0)), ([0], [1]), (0.5, 1.0))
        assert d.det1_only == pytest.approx(0.75)

    def test_bad_efficiency(self):
        with pytest.raises(ValueError):
            fock.click_probabilities(StateVector.vacuum(FockBasis(2, 2)), ([0], [1]), (1.1, 1.0))

    @settings(max_examples=30, deadline=None)
    @given(
        st.complex_numbers(max_magnitude=0.4),
        st.complex_numbers(max_magnitude=0.4),
        st.floats(0, 1),
        st.floats(0, 1),
    )
    def test_sums_to_one(self, a, b, e1, e2):
        s = fock.coherent_product_state([a, b], FockBasis(2, 3))
        assert fock.click_probabilities(s, ([0], [1]), (e1, e2)).as_array().sum() == pytest.approx(1, abs=1e-10)


class TestProjection:
    def test_no_click_on_vacuum(self):
        out, p = fock.project_on_click(StateVector.vacuum(FockBasis(2, 2)), [1], clicked=False)
        assert p == 1
        assert out.amplitudes[0] == 1

    def test_zero_probability_outcome(self):
        with pytest.raises(ValueError):
            fock.project_on_click(StateVector.vacuum(FockBasis(2, 2)), [1], clicked=True)

    def test_consistent_with_click_probabilities(self):
        s = fock.coherent_product_state([0.2, 0.3], FockBasis(2, 3))
        _, p = fock.project_on_click(s, [1], clicked=True)
        assert p == pytest.approx(fock.click_probabilities(s, ([0], [1])).det2)

    def test_conditional_amplitude_real(self):
        alpha = beta = 0.1
        kappa = 0.05
        s = fock.spdc_evolve(fock.coherent_product_state([alpha, beta], FockBasis(2, 3)), 0, 1, kappa)
        cond, _ = fock.project_on_click(s, [1], clicked=True)
        ratio = fock.conditional_mode_ratio(cond, 0, {1: 1})
        assert abs(cmath.phase(ratio)) < 1e-12
        # alpha + kappa / beta = 0.6 up to O(eps^2) corrections
        assert ratio == pytest.approx(alpha + kappa / beta, abs=0.6 * 10 * 0.1**2)
