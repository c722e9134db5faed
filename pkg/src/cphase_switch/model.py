"""Lowest-order analytic model of the conditional-phase switch.

Weak coherent signal (alpha) and control (beta) beams cross in a pumped
chi(2) crystal that adds a pair amplitude ``a_dc``.  To lowest order the
two-mode state is

    |00> + alpha |10> + beta |01> + (alpha beta + a_dc) |11>

so detecting a control photon changes the signal's amplitude from
``alpha`` to ``alpha + a_dc / beta``.  With alpha and beta taken real and
positive, everything depends on ``r = |a_dc / (alpha beta)|`` and the pump
phase ``theta_p = arg(a_dc)``, and the signal picks up a conditional phase
``arg(1 + r e^{i theta_p})``.
"""
from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

MAX_AMPLITUDE = 0.5
PUMP_WAVELENGTH_NM = 405.0
SPEED_OF_LIGHT = 299_792_458.0

# |1 + r e^{i theta}| below this counts as the undefined-phase point
_ZERO_AMPLITUDE = 1e-12


class UndefinedPhaseError(ValueError):
    """The conditional amplitude vanishes, so its phase is undefined."""


def wrap_phase(phi):
    """Map angles (radians) into (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SwitchParams:
    alpha: complex
    beta: complex
    a_dc: complex
    ref_amp: complex = 0.0
    bs2_transmissivity: float = 0.9

    def __post_init__(self):
        for name in ("alpha", "beta", "a_dc", "ref_amp"):
            value = complex(getattr(self, name))
            if abs(value) > MAX_AMPLITUDE:
                raise ValueError(
                    f"|{name}| = {abs(value):.3g} exceeds the weak-field bound {MAX_AMPLITUDE}"
                )
            object.__setattr__(self, name, value)
        if not 0.0 <= self.bs2_transmissivity <= 1.0:
            raise ValueError(
                f"bs2_transmissivity must lie in [0, 1], got {self.bs2_transmissivity}"
            )

    @classmethod
    def from_ratio(
        cls,
        alpha: float,
        beta: float,
        r: float,
        theta_p: float,
        ref_amp: complex = 0.0,
        bs2_transmissivity: float = 0.9,
    ) -> "SwitchParams":
        """Real positive alpha, beta and a_dc = r alpha beta e^{i theta_p}."""
        a_dc = r * alpha * beta * cmath.exp(1j * theta_p)
        return cls(alpha, beta, a_dc, ref_amp, bs2_transmissivity)

    @property
    def r(self) -> float:
        ab = self.alpha * self.beta
        if ab == 0:
            return math.inf if self.a_dc != 0 else 0.0
        return abs(self.a_dc / ab)

    @property
    def theta_p(self) -> float:
        """Pump phase relative to the product of the input phases."""
        return cmath.phase(self.a_dc * (self.alpha * self.beta).conjugate())

    def with_pump_phase(self, theta_p: float) -> "SwitchParams":
        """Same magnitudes, pump phase set to ``theta_p``."""
        ab = self.alpha * self.beta
        ref = ab / abs(ab) if ab != 0 else 1.0
        return SwitchParams(
            self.alpha,
            self.beta,
            abs(self.a_dc) * ref * cmath.exp(1j * theta_p),
            self.ref_amp,
            self.bs2_transmissivity,
        )


@dataclass(frozen=True)
class PairAmplitudes:
    """Unnormalized photon-number amplitudes of the two-mode output."""

    c00: complex
    c10: complex
    c01: complex
    c11: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.c00, self.c10, self.c01, self.c11], dtype=complex)


class Regime(enum.Enum):
    SMALL = "small"
    BOUNDARY = "boundary"
    LARGE = "large"


@dataclass(frozen=True)
class RegimeReport:
    r: float
    regime: Regime


def classify_regime(r: float, tol: float = 1e-12) -> RegimeReport:
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    if abs(r - 1.0) <= tol:
        return RegimeReport(r, Regime.BOUNDARY)
    return RegimeReport(r, Regime.SMALL if r < 1 else Regime.LARGE)


def evolved_amplitudes(params: SwitchParams) -> PairAmplitudes:
    a, b = params.alpha, params.beta
    return PairAmplitudes(1.0 + 0j, a, b, a * b + params.a_dc)


def conditional_amplitude(params: SwitchParams) -> complex:
    """Signal amplitude given one control photon: alpha + a_dc / beta."""
    if params.beta == 0:
        raise ZeroDivisionError("beta = 0: no control photon to condition on")
    return params.alpha + params.a_dc / params.beta


def conditional_phase_shift(r: float, theta_p: float) -> float:
    """Phase of 1 + r e^{i theta_p} in (-pi, pi]."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    z = 1.0 + r * cmath.exp(1j * theta_p)
    if abs(z) < _ZERO_AMPLITUDE:
        raise UndefinedPhaseError(
            f"conditional amplitude vanishes at r={r}, theta_p={theta_p}"
        )
    return wrap_phase(cmath.phase(z))


def pair_rate_modulation(r: float, theta_p: float) -> float:
    """Pair rate relative to the accidental rate, |1 + r e^{i theta_p}|^2."""
    return abs(1.0 + r * cmath.exp(1j * theta_p)) ** 2


def max_small_regime_shift(r: float) -> float:
    """Largest |phase shift| reachable for r < 1 (at cos theta_p = -r)."""
    if not 0 <= r < 1:
        raise ValueError("bounded phase shift only exists for 0 <= r < 1")
    return math.asin(r)


class TheoryCurve(NamedTuple):
    theta_p: np.ndarray
    phase_shift: np.ndarray  # nan where undefined
    defined: np.ndarray

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.theta_p.tolist(), self.phase_shift.tolist()))


def theory_curve(r: float, theta_p) -> TheoryCurve:
    """Conditional phase shift over a grid of pump phases.

    Depends on nothing but the ratio ``r``; undefined points are flagged and
    set to nan rather than interpolated.
    """
    theta = np.asarray(theta_p, dtype=float).reshape(-1)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta_p grid must be finite")
    z = 1.0 + r * np.exp(1j * theta)
    defined = np.abs(z) >= _ZERO_AMPLITUDE
    phase = np.where(defined, wrap_phase(np.angle(z)), np.nan)
    return TheoryCurve(theta, phase, defined)


def det1_singles_probability(mode1_amp: complex, params: SwitchParams, phi_ref):
    """Lowest-order click probability at Det. 1 behind the recombining splitter."""
    t = params.bs2_transmissivity
    field = math.sqrt(t) * mode1_amp + math.sqrt(1 - t) * params.ref_amp * np.exp(
        1j * np.asarray(phi_ref, dtype=float)
    )
    out = np.abs(field) ** 2
    return float(out) if np.ndim(out) == 0 else out


def fringe_visibility(mode1_amp: complex, params: SwitchParams) -> float:
    t = params.bs2_transmissivity
    s = t * abs(mode1_amp) ** 2
    ref = (1 - t) * abs(params.ref_amp) ** 2
    if s + ref == 0:
        return 0.0
    return 2 * math.sqrt(s * ref) / (s + ref)


@dataclass(frozen=True)
class PolarizationPairState:
    """|0>|0> + eps (a|HH> + b|HV> + c|VH> + d|VV>)."""

    eps: complex
    a: complex
    b: complex
    c: complex
    d: complex

    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=complex)

    def normalized(self) -> "PolarizationPairState":
        """Unit-norm coincidence subspace, with eps rescaled so eps*(a..d) is unchanged."""
        coeffs = self.coefficients()
        n = np.linalg.norm(coeffs)
        if n == 0:
            raise ValueError("coincidence subspace is empty")
        a, b, c, d = coeffs / n
        return PolarizationPairState(self.eps * n, a, b, c, d)


def polarization_switch(state: PolarizationPairState, a_dc: complex) -> PolarizationPairState:
    """Add a pair amplitude to the VV term only, then renormalize."""
    if state.eps == 0:
        raise ZeroDivisionError("eps = 0: no pair amplitude to act on")
    shifted = PolarizationPairState(state.eps, state.a, state.b, state.c, state.d + a_dc / state.eps)
    return shifted.normalized()


def concurrence(state: PolarizationPairState) -> float:
    a, b, c, d = state.normalized().coefficients()
    return float(min(1.0, 2 * abs(a * d - b * c)))


@dataclass(frozen=True)
class ContractReport:
    """Residuals of the lowest-order c-phi behaviour, all in radians."""

    residual_10: float
    residual_01: float
    phase_shift: float
    expected_shift: float
    residual_11: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.residual_10, self.residual_01, self.residual_11) <= self.tol


def cphi_contract_check(params: SwitchParams, tol: float = 1e-12) -> ContractReport:
    """Check that only the |11> amplitude picks up a phase.

    The |10> and |01> amplitudes must keep the input phases and the |11>
    amplitude must rotate by ``conditional_phase_shift(r, theta_p)``.
    """
    if params.alpha == 0 or params.beta == 0:
        raise ValueError("alpha and beta must be nonzero")
    amps = evolved_amplitudes(params)
    res10 = abs(wrap_phase(cmath.phase(amps.c10 / amps.c00) - cmath.phase(params.alpha)))
    res01 = abs(wrap_phase(cmath.phase(amps.c01 / amps.c00) - cmath.phase(params.beta)))
    ratio = amps.c11 / (params.alpha * params.beta)
    if abs(ratio) < _ZERO_AMPLITUDE:
        raise UndefinedPhaseError("|11> amplitude vanishes")
    phi = cmath.phase(ratio)
    expected = conditional_phase_shift(params.r, params.theta_p)
    return ContractReport(
        residual_10=res10,
        residual_01=res01,
        phase_shift=wrap_phase(phi),
        expected_shift=expected,
        residual_11=abs(wrap_phase(phi - expected)),
        tol=tol,
    )


def pump_delay_to_phase_deg(delay_fs: float, pump_wavelength_nm: float = PUMP_WAVELENGTH_NM) -> float:
    """Pump phase in degrees for a pump delay in femtoseconds (360 deg per optical period).

    One 405 nm period is 1.351 fs, so 1.6 fs maps to about 426 deg.  A
    1.6 fs delay has also been quoted as about 455 deg, so the convention
    behind measured delays is ambiguous; prefer working in phase directly.
    """
    warnings.warn(
        "delay-to-phase conversion assumes 360 deg per pump period; "
        "1.6 fs -> ~455 deg quoted elsewhere does not follow this rule",
        stacklevel=2,
    )
    period_fs = pump_wavelength_nm * 1e-9 / SPEED_OF_LIGHT * 1e15
    return 360.0 * delay_fs / period_fs
