"""Cosine fringe fitting and phase-difference extraction.

Model: ``A + B cos(2 pi x / L + phi)``.  With ``L`` fixed the problem is
linear in ``(A, B cos phi, B sin phi)``; a free period is found by an outer
one-dimensional search over ``L`` with the linear solve inside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .detection import ScanRecord
from .model import wrap_phase

PERIOD_BRACKET = (0.5, 2.0)
PERIOD_GRID_POINTS = 600


class FitError(ValueError):
    pass


class PeriodMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FringeModel:
    offset: float
    amplitude: float
    phase: float
    period: float

    def __call__(self, x):
        return self.offset + self.amplitude * np.cos(2 * np.pi * np.asarray(x) / self.period + self.phase)


@dataclass(frozen=True, eq=False)
class FitResult:
    model: FringeModel
    covariance: np.ndarray  # order (offset, amplitude, phase[, period])
    chi2: float
    dof: int
    period_fixed: bool
    flags: tuple[str, ...] = field(default=())

    @property
    def phase_sigma(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))

    @property
    def amplitude_sigma(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    @property
    def low_visibility(self) -> bool:
        return "low_visibility" in self.flags


def poisson_weights(counts: np.ndarray) -> np.ndarray:
    return 1.0 / np.maximum(counts, 1.0)


def _linear_solve(x, y, w, period):
    k = 2 * np.pi / period
    design = np.column_stack([np.ones_like(x), np.cos(k * x), -np.sin(k * x)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    resid = y - design @ coef
    return coef, float(np.sum(w * resid**2))


def _to_model(coef, period) -> FringeModel:
    a, c, s = coef
    amp = math.hypot(c, s)
    phase = wrap_phase(math.atan2(s, c)) if amp > 0 else 0.0
    return FringeModel(float(a), amp, phase, float(period))


def _jacobian(m: FringeModel, x: np.ndarray, with_period: bool) -> np.ndarray:
    arg = 2 * np.pi * x / m.period + m.phase
    cols = [np.ones_like(x), np.cos(arg), -m.amplitude * np.sin(arg)]
    if with_period:
        cols.append(m.amplitude * np.sin(arg) * 2 * np.pi * x / m.period**2)
    return np.column_stack(cols)


def _covariance(m: FringeModel, x, w, with_period: bool) -> np.ndarray:
    j = _jacobian(m, x, with_period)
    info = j.T @ (j * w[:, None])
    cov = np.linalg.pinv(info, hermitian=True)
    return 0.5 * (cov + cov.T)


def _search_period(x, y, w, nominal):
    lo, hi = PERIOD_BRACKET[0] * nominal, PERIOD_BRACKET[1] * nominal
    grid = np.geomspace(lo, hi, PERIOD_GRID_POINTS)
    chi = np.array([_linear_solve(x, y, w, p)[1] for p in grid])
    i = int(np.argmin(chi))

    def f(p):
        return _linear_solve(x, y, w, p)[1]

    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(
            f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=1e-9
        )
    else:
        j0, j1 = max(i - 1, 0), min(i + 1, len(grid) - 1)
        res = optimize.minimize_scalar(
            f, bounds=(grid[j0], grid[j1]), method="bounded", options={"xatol": 1e-9 * grid[i]}
        )
    return float(res.x)


def _polish(x, y, w, m: FringeModel) -> FringeModel:
    """Joint Gauss-Newton pass over all four parameters."""
    sw = np.sqrt(w)

    def resid(p):
        return sw * (p[0] + p[1] * np.cos(2 * np.pi * x / p[3] + p[2]) - y)

    p0 = np.array([m.offset, m.amplitude, m.phase, m.period])
    res = optimize.least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not res.success or res.cost > 0.5 * np.sum(resid(p0) ** 2):
        return m
    a, b, phi, period = res.x
    if b < 0:
        b, phi = -b, phi + np.pi
    return FringeModel(float(a), float(b), wrap_phase(phi), float(period))


def fit_fringe(
    delay: Sequence[float],
    counts: Sequence[float],
    period: float | None = None,
    weights: Sequence[float] | str = "poisson",
    nominal_period: float | None = None,
) -> FitResult:
    """Weighted least-squares cosine fit to a fringe.

    ``period`` fixes L; otherwise L is searched over ``[0.5, 2] *
    nominal_period`` and refined.  Weights default to ``1 / max(count, 1)``.
    A result whose amplitude is within one standard error of zero is flagged
    ``low_visibility``; its phase is still reported, with the large
    uncertainty the covariance gives it.
    """
    x = np.asarray(delay, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("delay and counts must be 1-D arrays of equal length")
    if len(x) < 5:
        raise FitError(f"need at least 5 points, got {len(x)}")
    if np.any(y < 0):
        raise FitError("counts must be nonnegative")
    if np.ptp(x) == 0:
        raise FitError("degenerate design: all delays identical")
    if isinstance(weights, str):
        if weights != "poisson":
            raise ValueError(f"unknown weighting {weights!r}")
        w = poisson_weights(y)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape or np.any(w < 0):
            raise FitError("weights must be nonnegative and match counts")

    if period is not None:
        if period <= 0:
            raise FitError("period must be positive")
        span_ref = period
    else:
        if nominal_period is None or nominal_period <= 0:
            raise FitError("a free-period fit needs a positive nominal_period")
        span_ref = nominal_period
    if np.ptp(x) < span_ref * (1 - 1e-9):
        raise FitError("data must span at least one fringe period")

    if period is None:
        best = _search_period(x, y, w, nominal_period)
        coef, _ = _linear_solve(x, y, w, best)
        m = _polish(x, y, w, _to_model(coef, best))
        lo, hi = PERIOD_BRACKET[0] * nominal_period, PERIOD_BRACKET[1] * nominal_period
        if not lo <= m.period <= hi:
            m = _to_model(coef, best)
    else:
        coef, _ = _linear_solve(x, y, w, period)
        m = _to_model(coef, period)

    free = period is None
    resid = y - m(x)
    chi2 = float(np.sum(w * resid**2))
    dof = len(x) - (4 if free else 3)
    if m.amplitude > 0:
        cov = _covariance(m, x, w, free)
    else:
        n = 4 if free else 3
        cov = np.full((n, n), 0.0)
        cov[2, 2] = np.pi**2
    flags = []
    sigma_b = math.sqrt(max(cov[1, 1], 0.0))
    if m.amplitude <= sigma_b:
        flags.append("low_visibility")
        cov[2, 2] = max(cov[2, 2], np.pi**2 / 3)
    return FitResult(m, cov, chi2, dof, not free, tuple(flags))


@dataclass(frozen=True)
class PhaseDifference:
    """Lag of the coincidence fringe behind the singles fringe (radians)."""

    delta: float
    sigma: float

    @property
    def delta_deg(self) -> float:
        return math.degrees(self.delta)

    @property
    def sigma_deg(self) -> float:
        return math.degrees(self.sigma)


def phase_difference(singles_fit: FitResult, coinc_fit: FitResult) -> PhaseDifference:
    """How far the coincidence fringe lags the singles fringe, in (-pi, pi].

    With the ``cos(2 pi x / L + phi)`` model a lagging fringe has the smaller
    fitted phase, so the lag is ``phi_singles - phi_coinc``.  Uncertainties
    add in quadrature.
    """
    ls, lc = singles_fit.model.period, coinc_fit.model.period
    if not math.isclose(ls, lc, rel_tol=1e-12):
        raise PeriodMismatchError(
            f"fringe periods differ ({ls!r} vs {lc!r}); fit coincidences with the singles period"
        )
    delta = wrap_phase(singles_fit.model.phase - coinc_fit.model.phase)
    return PhaseDifference(delta, math.hypot(singles_fit.phase_sigma, coinc_fit.phase_sigma))


@dataclass(frozen=True)
class ScanAnalysis:
    singles: FitResult | None
    coinc: FitResult | None
    difference: PhaseDifference | None
    flags: tuple[str, ...]


def analyze_scan(record: ScanRecord) -> ScanAnalysis:
    """Free-period fit of Det. 1 singles, then coincidences at that period."""
    try:
        s_fit = fit_fringe(record.delay_um, record.singles1, nominal_period=record.wavelength_um)
        c_fit = fit_fringe(record.delay_um, record.coinc, period=s_fit.model.period)
        diff = phase_difference(s_fit, c_fit)
    except (FitError, PeriodMismatchError, np.linalg.LinAlgError) as exc:
        return ScanAnalysis(None, None, None, (f"fit_error: {exc}",))
    flags = tuple(f"singles_{f}" for f in s_fit.flags) + tuple(f"coinc_{f}" for f in c_fit.flags)
    return ScanAnalysis(s_fit, c_fit, diff, flags)


@dataclass(frozen=True)
class SweepPoint:
    theta_p: float
    delta_phi: float
    sigma: float
    chi2: float
    dof: int
    flags: tuple[str, ...]

    def to_record(self) -> dict:
        return {
            "theta_p_deg": math.degrees(self.theta_p),
            "delta_phi_deg": math.degrees(self.delta_phi),
            "sigma_deg": math.degrees(self.sigma),
            "chi2": self.chi2,
            "dof": self.dof,
            "flags": list(self.flags),
        }


def sweep_point(theta_p: float, record: ScanRecord) -> SweepPoint:
    a = analyze_scan(record)
    if a.difference is None:
        return SweepPoint(theta_p, math.nan, math.nan, math.nan, 0, a.flags)
    return SweepPoint(theta_p, a.difference.delta, a.difference.sigma, a.coinc.chi2, a.coinc.dof, a.flags)


def sweep_analysis(scans: Sequence[tuple[float, ScanRecord]]) -> list[SweepPoint]:
    """Phase lag per pump phase; failed scans become flagged points, values stay wrapped."""
    return [sweep_point(theta, rec) for theta, rec in scans]
