"""Monte-Carlo photon-counting run of the interferometer.

Each laser pulse ends in one of four joint outcomes: no click, Det. 1 only,
Det. 2 only, or both.  A scan steps the reference delay; at each step the
counts are one multinomial draw over those outcomes, so the Det. 1 /
Det. 2 correlation that carries the conditional phase is kept intact.
"""
from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from . import model
from .model import SwitchParams

REP_RATE = 8.0e7
SIGNAL_WAVELENGTH_UM = 0.81
DELAY_STEP_UM = 0.04
SCAN_FORMAT_VERSION = 1
SCAN_COLUMNS = ("delay_um", "phi_ref_rad", "n_pulses", "singles1", "singles2", "coinc")

# tolerated overshoot of a click probability before it is a model error
_PROB_SLACK = 1e-3


class ModelValidityError(ValueError):
    """The lowest-order model produced probabilities it cannot represent."""


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    switch: SwitchParams
    rep_rate: float = REP_RATE
    dwell_time: float = 1.0
    det1_efficiency: float = 1.0
    det2_efficiency: float = 1.0
    dark_rate_1: float = 0.0
    dark_rate_2: float = 0.0
    accidental_floor: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.rep_rate * self.dwell_time < 1:
            raise ValueError("rep_rate * dwell_time must be at least one pulse")
        for name in ("det1_efficiency", "det2_efficiency"):
            eta = getattr(self, name)
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {eta}")
        for name in ("dark_rate_1", "dark_rate_2", "accidental_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def n_pulses(self) -> int:
        return int(round(self.rep_rate * self.dwell_time))


@dataclass(frozen=True)
class ScanSpec:
    start_um: float = 0.0
    step_um: float = DELAY_STEP_UM
    count: int = 64
    wavelength_um: float = SIGNAL_WAVELENGTH_UM

    def __post_init__(self):
        if self.step_um <= 0:
            raise ValueError("step_um must be positive")
        if self.wavelength_um <= 0:
            raise ValueError("wavelength_um must be positive")
        if self.count < 5:
            raise ValueError("a scan needs at least 5 steps")

    @property
    def delays(self) -> np.ndarray:
        return self.start_um + self.step_um * np.arange(self.count)

    @property
    def periods_covered(self) -> float:
        return self.step_um * (self.count - 1) / self.wavelength_um


@dataclass(frozen=True, eq=False)
class ScanRecord:
    """Counts per reference-delay step.  Arrays are aligned by step."""

    delay_um: np.ndarray
    phi_ref: np.ndarray
    n_pulses: np.ndarray
    singles1: np.ndarray
    singles2: np.ndarray
    coinc: np.ndarray
    wavelength_um: float = SIGNAL_WAVELENGTH_UM

    def __len__(self):
        return len(self.delay_um)

    def check(self) -> None:
        if np.any(self.coinc > np.minimum(self.singles1, self.singles2)):
            raise ValueError("coincidences exceed singles")
        for name in ("singles1", "singles2", "coinc"):
            if np.any(getattr(self, name) > self.n_pulses):
                raise ValueError(f"{name} exceeds pulse count")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# cphase-switch scan v{SCAN_FORMAT_VERSION} wavelength_um={self.wavelength_um!r}\n"
        )
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCAN_COLUMNS)
        for row in zip(self.delay_um, self.phi_ref, self.n_pulses, self.singles1, self.singles2, self.coinc):
            w.writerow([repr(float(row[0])), repr(float(row[1]))] + [str(int(v)) for v in row[2:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScanRecord":
        wavelength = None
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("wavelength_um="):
                        wavelength = float(tok.split("=", 1)[1])
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        if not rows or tuple(rows[0]) != SCAN_COLUMNS:
            raise ValueError(f"scan CSV header must be {','.join(SCAN_COLUMNS)}")
        data = rows[1:]
        if not data:
            raise ValueError("scan CSV has no rows")
        cols = list(zip(*data))
        delay = np.array(cols[0], dtype=float)
        phi = np.array(cols[1], dtype=float)
        if wavelength is None:
            nz = delay != 0
            if not nz.any():
                raise ValueError("cannot infer wavelength from an all-zero delay column")
            wavelength = float(np.median(2 * np.pi * delay[nz] / phi[nz]))
        return cls(
            delay_um=delay,
            phi_ref=phi,
            n_pulses=np.array(cols[2], dtype=np.int64),
            singles1=np.array(cols[3], dtype=np.int64),
            singles2=np.array(cols[4], dtype=np.int64),
            coinc=np.array(cols[5], dtype=np.int64),
            wavelength_um=wavelength,
        )


class JointProbabilities(NamedTuple):
    """Per-pulse probabilities of the four joint detector outcomes."""

    none: float
    det1_only: float
    det2_only: float
    both: float

    @property
    def det1(self) -> float:
        return self.det1_only + self.both

    @property
    def det2(self) -> float:
        return self.det2_only + self.both

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def _clamp(p: float, what: str) -> float:
    if p > 1.0 + _PROB_SLACK or p < -_PROB_SLACK:
        raise ModelValidityError(f"{what} probability {p:.4g} is outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def per_pulse_probabilities(
    switch: SwitchParams,
    phi_ref: float,
    det1_efficiency: float = 1.0,
    det2_efficiency: float = 1.0,
    dark_prob_1: float = 0.0,
    dark_prob_2: float = 0.0,
    floor_prob: float = 0.0,
) -> JointProbabilities:
    """Joint click distribution for one pulse at reference phase ``phi_ref``.

    Det. 1 singles follow the fringe of the bare signal amplitude ``alpha``
    (pulses without a control photon dominate them).  A control photon is
    present with probability ``|beta|^2 + |alpha beta + a_dc|^2``, and in
    that branch Det. 1 sees the fringe of ``alpha + a_dc / beta``; the joint
    term is built from the pair amplitudes directly, so ``beta = 0`` (pure
    down-conversion) is well defined.  Efficiencies thin photon clicks, dark
    counts are independent per-pulse Bernoulli events, and ``floor_prob`` is
    an extra per-pulse chance of a forced coincidence.  The two single-
    detector outcomes follow by inclusion-exclusion; when down-conversion pairs
    outweigh the signal fringe, Det. 1 singles are raised to the coincidence
    probability so the distribution stays consistent.
    """
    amps = model.evolved_amplitudes(switch)
    t = switch.bs2_transmissivity
    ref = math.sqrt(1 - t) * switch.ref_amp * cmath.exp(1j * phi_ref)

    def with_dark(p, d):
        return 1 - (1 - p) * (1 - d)

    p_ctrl = _clamp(abs(amps.c01) ** 2 + abs(amps.c11) ** 2, "control photon")
    f_bare = _clamp(det1_efficiency * model.det1_singles_probability(switch.alpha, switch, phi_ref), "Det. 1")
    joint_photon = det1_efficiency * abs(math.sqrt(t) * amps.c11 + ref * amps.c01) ** 2
    if p_ctrl > 0:
        f_cond = _clamp(joint_photon / p_ctrl, "conditional Det. 1")
    else:
        f_cond = f_bare

    u_bare, u_cond = with_dark(f_bare, dark_prob_1), with_dark(f_cond, dark_prob_1)
    v_ctrl = with_dark(det2_efficiency, dark_prob_2)
    # pair photons can reach Det. 1 only together with a control photon
    p2 = p_ctrl * v_ctrl + (1 - p_ctrl) * dark_prob_2
    p12 = p_ctrl * u_cond * v_ctrl + (1 - p_ctrl) * u_bare * dark_prob_2
    p1 = max(u_bare, p12)
    if floor_prob:
        p1 = (1 - floor_prob) * p1 + floor_prob
        p2 = (1 - floor_prob) * p2 + floor_prob
        p12 = (1 - floor_prob) * p12 + floor_prob
    dist = np.array([
        _clamp(1 - p1 - p2 + p12, "no-click"),
        _clamp(p1 - p12, "Det. 1 only"),
        _clamp(p2 - p12, "Det. 2 only"),
        _clamp(p12, "coincidence"),
    ])
    dist /= dist.sum()
    return JointProbabilities(*map(float, dist))


def config_probabilities(config: SourceConfig, phi_ref: float) -> JointProbabilities:
    return per_pulse_probabilities(
        config.switch,
        phi_ref,
        config.det1_efficiency,
        config.det2_efficiency,
        config.dark_rate_1 / config.rep_rate,
        config.dark_rate_2 / config.rep_rate,
        config.accidental_floor / config.rep_rate,
    )


def point_rng(seed: int, *index: int) -> np.random.Generator:
    """Independent generator for one scan point, keyed by (seed, *index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=index))


def simulate_scan(config: SourceConfig, spec: ScanSpec, stream: int = 0) -> ScanRecord:
    """Draw counts for every reference-delay step of one scan.

    ``stream`` separates scans sharing a seed (e.g. points of a pump-phase
    sweep); each step draws from its own generator keyed by
    ``(rng_seed, stream, step)`` so results do not depend on execution order.
    """
    delays = spec.delays
    phi = 2 * np.pi * delays / spec.wavelength_um
    n = config.n_pulses
    counts = np.empty((len(delays), 4), dtype=np.int64)
    for i, p in enumerate(phi):
        probs = config_probabilities(config, float(p)).as_array()
        counts[i] = point_rng(config.rng_seed, stream, i).multinomial(n, probs)
    rec = ScanRecord(
        delay_um=delays,
        phi_ref=phi,
        n_pulses=np.full(len(delays), n, dtype=np.int64),
        singles1=counts[:, 1] + counts[:, 3],
        singles2=counts[:, 2] + counts[:, 3],
        coinc=counts[:, 3],
        wavelength_um=spec.wavelength_um,
    )
    return rec


@dataclass(frozen=True)
class RateSet:
    """Detected count rates (s^-1) measured with the interference switched off."""

    singles_1_sig: float
    singles_1_ref: float
    singles_2: float
    acc_coinc: float
    dc_coinc: float


SMALL_REGIME_RATES = RateSet(88e3, 79e3, 282e3, 256.0, 4.7)
LARGE_REGIME_RATES = RateSet(700.0, 8600.0, 129e3, 1.1, 5.2)


def calibrate_from_rates(
    singles_1_sig: float,
    singles_1_ref: float,
    singles_2: float,
    acc_coinc: float,
    dc_coinc: float,
    rep_rate: float = REP_RATE,
    efficiencies: tuple[float, float] = (1.0, 1.0),
    bs2_transmissivity: float = 0.9,
    theta_p: float = 0.0,
) -> SwitchParams:
    """Amplitudes that reproduce the measured singles and coincidence rates.

    Signal and reference magnitudes come from the Det. 1 singles.  The
    control magnitude is solved from the accidental coincidence rate, so the
    simulated accidental and down-conversion coincidence rates match the
    inputs exactly; control singles in excess of ``rep_rate * eta2 * |beta|^2``
    are reported by :func:`control_singles_excess`.  ``|a_dc| = r |alpha beta|``
    with ``r = sqrt(dc_coinc / acc_coinc)``.  All amplitudes are real and
    positive except ``a_dc``, which carries the pump phase ``theta_p``.
    """
    rates = (singles_1_sig, singles_1_ref, singles_2, acc_coinc, dc_coinc)
    if any(x < 0 for x in rates):
        raise CalibrationError("rates must be nonnegative")
    if acc_coinc <= 0:
        raise CalibrationError("accidental coincidence rate must be positive")
    eta1, eta2 = efficiencies
    if not (0 < eta1 <= 1 and 0 < eta2 <= 1):
        raise CalibrationError("efficiencies must lie in (0, 1]")
    t = bs2_transmissivity
    if not 0 < t < 1:
        raise CalibrationError("bs2_transmissivity must lie strictly inside (0, 1)")
    p_sig = singles_1_sig / (rep_rate * eta1 * t)
    p_ref = singles_1_ref / (rep_rate * eta1 * (1 - t))
    if p_sig <= 0:
        raise CalibrationError("signal singles rate must be positive")
    p_ctrl = acc_coinc / (rep_rate * eta1 * t * eta2 * p_sig)
    for name, p in (("signal", p_sig), ("reference", p_ref), ("control", p_ctrl)):
        if p > 1:
            raise CalibrationError(f"implied {name} photon probability {p:.3g} exceeds 1")
    alpha, beta, rho = math.sqrt(p_sig), math.sqrt(p_ctrl), math.sqrt(p_ref)
    r = math.sqrt(dc_coinc / acc_coinc)
    try:
        return SwitchParams.from_ratio(alpha, beta, r, theta_p, rho, t)
    except ValueError as exc:
        raise CalibrationError(str(exc)) from exc


def calibrate(rates: RateSet, **kwargs) -> SwitchParams:
    return calibrate_from_rates(
        rates.singles_1_sig, rates.singles_1_ref, rates.singles_2, rates.acc_coinc, rates.dc_coinc, **kwargs
    )


def control_singles_excess(rates: RateSet, switch: SwitchParams, rep_rate: float = REP_RATE, eta2: float = 1.0) -> float:
    """Measured Det. 2 singles not accounted for by the calibrated control beam."""
    return rates.singles_2 - rep_rate * eta2 * abs(switch.beta) ** 2


def expected_rates(config: SourceConfig, phi_ref: Iterable[float] | None = None) -> dict[str, float]:
    """Mean count rates (s^-1), averaged over a full reference fringe by default."""
    if phi_ref is None:
        phi_ref = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    probs = np.mean([config_probabilities(config, float(p)).as_array() for p in phi_ref], axis=0)
    r = config.rep_rate
    return {
        "singles1": r * (probs[1] + probs[3]),
        "singles2": r * (probs[2] + probs[3]),
        "coinc": r * probs[3],
    }
