"""Exact state-vector engine on a truncated multimode Fock space.

Basis states are the occupation tuples ``(n_0, ..., n_{M-1})`` with
``0 <= n_k <= cutoff``, enumerated in lexicographic order with mode 0 the
most significant digit.  The flat index of a tuple is therefore its value in
base ``cutoff + 1``, which is also the C-order index of an array of shape
``(cutoff + 1,) * n_modes``.

The pump is never a Fock mode: it enters only through the complex squeezing
parameter ``kappa`` of :func:`spdc_evolve`.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

DEFAULT_CUTOFF = 3
DEFAULT_MAX_LEAKAGE = 1e-4
COHERENT_LEAKAGE_WARN = 1e-6


class TruncationError(RuntimeError):
    """Raised when an oracle run puts too much weight on the cutoff boundary."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FockBasis:
    n_modes: int
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be positive, got {self.n_modes}")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be at least 1, got {self.cutoff}")

    @property
    def dimension(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cutoff + 1,) * self.n_modes

    def states(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.cutoff + 1), repeat=self.n_modes))

    def index(self, occupations: Sequence[int]) -> int:
        if len(occupations) != self.n_modes:
            raise ValueError(f"expected {self.n_modes} occupations, got {len(occupations)}")
        for n in occupations:
            if not 0 <= n <= self.cutoff:
                raise ValueError(f"occupation {n} outside [0, {self.cutoff}]")
        return int(np.ravel_multi_index(tuple(occupations), self.shape))

    def occupations(self) -> np.ndarray:
        """(dimension, n_modes) integer table of occupations in basis order."""
        return np.array(self.states(), dtype=np.int64).reshape(self.dimension, self.n_modes)

    def check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode {mode} out of range for {self.n_modes} modes")

    def boundary_mask(self) -> np.ndarray:
        """True for basis states with at least one mode at the cutoff."""
        return (self.occupations() == self.cutoff).any(axis=1)


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.basis.dimension:
            raise ValueError(
                f"amplitude vector has length {amps.size}, basis needs {self.basis.dimension}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def vacuum(cls, basis: FockBasis) -> "StateVector":
        amps = np.zeros(basis.dimension, dtype=complex)
        amps[0] = 1.0
        return cls(basis, amps)

    @classmethod
    def fock(cls, basis: FockBasis, occupations: Sequence[int]) -> "StateVector":
        amps = np.zeros(basis.dimension, dtype=complex)
        amps[basis.index(occupations)] = 1.0
        return cls(basis, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    def amplitude(self, occupations: Sequence[int]) -> complex:
        return complex(self.amplitudes[self.basis.index(occupations)])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def leakage(self) -> float:
        """Probability carried by basis states with some mode at the cutoff.

        Measured relative to the squared norm, so it is meaningful for
        unnormalized vectors as well.
        """
        p = self.probabilities()
        total = p.sum()
        if total == 0:
            return 0.0
        return float(p[self.basis.boundary_mask()].sum() / total)

    def mean_photon_number(self, mode: int | None = None) -> float:
        occ = self.basis.occupations()
        n = occ.sum(axis=1) if mode is None else occ[:, mode]
        p = self.probabilities()
        return float(np.dot(p, n) / p.sum())

    def phase_aligned(self) -> "StateVector":
        """Divide out the phase of the vacuum amplitude."""
        c0 = self.amplitudes[0]
        if c0 == 0:
            raise ValueError("vacuum amplitude is zero; no reference phase")
        return StateVector(self.basis, self.amplitudes * (abs(c0) / c0))


@dataclass(frozen=True, eq=False)
class ModeOperator:
    basis: FockBasis
    matrix: np.ndarray
    unitary: bool = False
    hermitian: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.basis.dimension
        if m.shape != (d, d):
            raise ValueError(f"operator shape {m.shape} does not match basis dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, state: StateVector) -> StateVector:
        if state.basis != self.basis:
            raise ValueError("operator and state live on different bases")
        return StateVector(self.basis, self.matrix @ state.amplitudes)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, ModeOperator):
            return ModeOperator(
                self.basis,
                self.matrix @ other.matrix,
                unitary=self.unitary and other.unitary,
            )
        return NotImplemented

    def unitarity_error(self) -> float:
        """max |U^dag U - I| over basis states away from the cutoff boundary."""
        inner = ~self.basis.boundary_mask()
        gram = self.matrix.conj().T @ self.matrix - np.eye(self.basis.dimension)
        return float(np.abs(gram[np.ix_(inner, inner)]).max())


def _single_mode_annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def annihilation(basis: FockBasis, mode: int) -> np.ndarray:
    """Matrix of the annihilation operator of ``mode`` on the full basis."""
    basis.check_mode(mode)
    eye = np.eye(basis.cutoff + 1, dtype=complex)
    out = np.ones((1, 1), dtype=complex)
    for k in range(basis.n_modes):
        out = np.kron(out, _single_mode_annihilation(basis.cutoff) if k == mode else eye)
    return out


def number_operator(basis: FockBasis, mode: int) -> np.ndarray:
    basis.check_mode(mode)
    return np.diag(basis.occupations()[:, mode].astype(complex))


def expm_series(generator: np.ndarray, tol: float = 1e-15, max_terms: int = 200) -> np.ndarray:
    """Matrix exponential by scaled Taylor series plus repeated squaring.

    Independent of :func:`scipy.linalg.expm`; used as the fallback route and
    as a cross-check of it.
    """
    g = np.asarray(generator, dtype=complex)
    nrm = np.abs(g).sum(axis=1).max() if g.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(nrm))) + 1) if nrm > 0.5 else 0
    g = g / 2.0**squarings
    result = np.eye(g.shape[0], dtype=complex)
    term = np.eye(g.shape[0], dtype=complex)
    for k in range(1, max_terms):
        term = term @ g / k
        result = result + term
        if np.abs(term).max() < tol:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def _expm(generator: np.ndarray) -> np.ndarray:
    try:
        out = linalg.expm(generator)
    except (ValueError, np.linalg.LinAlgError):
        return expm_series(generator)
    if not np.all(np.isfinite(out)):
        return expm_series(generator)
    return out


def coherent_amplitudes(amp: complex, cutoff: int) -> np.ndarray:
    """Single-mode coherent-state amplitudes on |0>..|cutoff>, renormalized."""
    n = np.arange(cutoff + 1)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if amp == 0:
        c = np.zeros(cutoff + 1, dtype=complex)
        c[0] = 1.0
        return c
    c = np.exp(-abs(amp) ** 2 / 2 - 0.5 * log_fact) * np.power(complex(amp), n)
    return c / np.linalg.norm(c)


def coherent_product_state(amps: Sequence[complex], basis: FockBasis) -> StateVector:
    """Product of coherent states, one amplitude per mode."""
    if len(amps) != basis.n_modes:
        raise ValueError(f"need {basis.n_modes} amplitudes, got {len(amps)}")
    vec = np.ones(1, dtype=complex)
    for a in amps:
        vec = np.kron(vec, coherent_amplitudes(a, basis.cutoff))
    state = StateVector(basis, vec)
    leak = state.leakage()
    if leak > COHERENT_LEAKAGE_WARN:
        warnings.warn(
            f"coherent state puts {leak:.2e} of its weight on the cutoff boundary "
            f"(cutoff={basis.cutoff})",
            TruncationWarning,
            stacklevel=2,
        )
    return state


def coherent_state(mode: int, amp: complex, basis: FockBasis) -> StateVector:
    """Coherent state ``amp`` on ``mode``, vacuum on every other mode."""
    basis.check_mode(mode)
    amps = [0j] * basis.n_modes
    amps[mode] = amp
    return coherent_product_state(amps, basis)


def beamsplitter(
    basis: FockBasis, mode_a: int, mode_b: int, transmissivity: float, phase: float = 0.0
) -> ModeOperator:
    """Two-mode mixer exp[theta (e^{i phase} a^dag b - e^{-i phase} a b^dag)].

    ``theta = arccos(sqrt(T))``, so a photon entering ``mode_a`` stays there
    with probability ``T``.  In the Heisenberg picture the ``mode_a`` output
    field is ``sqrt(T) a + e^{i phase} sqrt(1-T) b``.
    """
    if mode_a == mode_b:
        raise ValueError("beamsplitter needs two distinct modes")
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    a = annihilation(basis, mode_a)
    b = annihilation(basis, mode_b)
    theta = math.acos(math.sqrt(transmissivity))
    gen = theta * (np.exp(1j * phase) * a.conj().T @ b - np.exp(-1j * phase) * a @ b.conj().T)
    return ModeOperator(basis, _expm(gen), unitary=True)


def phase_shifter(basis: FockBasis, mode: int, theta: float) -> ModeOperator:
    basis.check_mode(mode)
    n = basis.occupations()[:, mode]
    return ModeOperator(basis, np.diag(np.exp(1j * theta * n)), unitary=True)


def phase_shift(state: StateVector, mode: int, theta: float) -> StateVector:
    """Multiply each amplitude by exp(i n theta), n the occupation of ``mode``."""
    state.basis.check_mode(mode)
    n = state.basis.occupations()[:, mode]
    return StateVector(state.basis, state.amplitudes * np.exp(1j * theta * n))


def two_mode_squeezer(basis: FockBasis, mode_1: int, mode_2: int, kappa: complex) -> ModeOperator:
    if mode_1 == mode_2:
        raise ValueError("down-conversion needs two distinct modes")
    a1 = annihilation(basis, mode_1)
    a2 = annihilation(basis, mode_2)
    gen = kappa * a1.conj().T @ a2.conj().T - np.conj(kappa) * a1 @ a2
    return ModeOperator(basis, _expm(gen), unitary=True)


def spdc_evolve(
    state: StateVector,
    mode_1: int,
    mode_2: int,
    kappa: complex,
    max_leakage: float = DEFAULT_MAX_LEAKAGE,
) -> StateVector:
    """Evolve under the pair-creation generator kappa a1^dag a2^dag - h.c.

    ``kappa`` is the product of coupling, classical pump amplitude and
    interaction time.  Raises :class:`TruncationError` if the result puts
    more than ``max_leakage`` of its weight on the cutoff boundary.
    """
    if kappa == 0:
        return state
    out = two_mode_squeezer(state.basis, mode_1, mode_2, kappa).apply(state)
    leak = out.leakage()
    if leak > max_leakage:
        raise TruncationError(
            f"truncation leakage {leak:.3e} exceeds bound {max_leakage:.1e} "
            f"at cutoff {state.basis.cutoff}; raise the cutoff or shrink the amplitudes"
        )
    return out


@dataclass(frozen=True)
class ClickDistribution:
    """Joint threshold-detector outcome probabilities for two detectors."""

    none: float
    det1_only: float
    det2_only: float
    both: float

    def as_array(self) -> np.ndarray:
        return np.array([self.none, self.det1_only, self.det2_only, self.both])

    @property
    def det1(self) -> float:
        return self.det1_only + self.both

    @property
    def det2(self) -> float:
        return self.det2_only + self.both


def _check_efficiency(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")


def _detector_counts(basis: FockBasis, modes: Iterable[int]) -> np.ndarray:
    modes = list(modes)
    for m in modes:
        basis.check_mode(m)
    return basis.occupations()[:, modes].sum(axis=1)


def click_probabilities(
    state: StateVector,
    detector_modes: tuple[Iterable[int], Iterable[int]],
    efficiencies: tuple[float, float] = (1.0, 1.0),
) -> ClickDistribution:
    """Outcome probabilities of two non-number-resolving detectors.

    Each detector sees the photons in its set of modes; each photon survives
    independently with the detector's efficiency and the detector clicks if
    at least one survives.
    """
    for eta in efficiencies:
        _check_efficiency(eta)
    n1 = _detector_counts(state.basis, detector_modes[0])
    n2 = _detector_counts(state.basis, detector_modes[1])
    p = state.probabilities()
    p = p / p.sum()
    miss1 = (1.0 - efficiencies[0]) ** n1
    miss2 = (1.0 - efficiencies[1]) ** n2
    return ClickDistribution(
        none=float(np.dot(p, miss1 * miss2)),
        det1_only=float(np.dot(p, (1 - miss1) * miss2)),
        det2_only=float(np.dot(p, miss1 * (1 - miss2))),
        both=float(np.dot(p, (1 - miss1) * (1 - miss2))),
    )


def project_on_click(
    state: StateVector, detector_modes: Iterable[int], clicked: bool
) -> tuple[StateVector, float]:
    """Ideal threshold measurement on a set of modes.

    Returns the renormalized post-measurement state and the outcome
    probability.
    """
    n = _detector_counts(state.basis, detector_modes)
    keep = n > 0 if clicked else n == 0
    p_all = state.probabilities()
    prob = float(p_all[keep].sum() / p_all.sum())
    if prob <= 0.0:
        raise ValueError(f"conditioning outcome clicked={clicked} has zero probability")
    amps = np.where(keep, state.amplitudes, 0.0)
    return StateVector(state.basis, amps).normalize(), prob


def conditional_mode_ratio(state: StateVector, mode: int, fixed: dict[int, int]) -> complex:
    """Amplitude ratio <..1_mode..|psi> / <..0_mode..|psi> with other modes fixed.

    Modes not named in ``fixed`` are taken empty.
    """
    occ = [0] * state.basis.n_modes
    for m, n in fixed.items():
        occ[m] = n
    occ[mode] = 0
    den = state.amplitude(occ)
    occ[mode] = 1
    num = state.amplitude(occ)
    if den == 0:
        raise ZeroDivisionError("reference amplitude is zero")
    return num / den
