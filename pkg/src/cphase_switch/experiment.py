"""Descriptor-driven runs that regenerate the fringe and phase-sweep data sets.

Descriptors are INI-style text files::

    [experiment]
    preset = large          ; small | large | custom
    seed = 7
    theta_p_deg = 95        ; pump phase of the single-scan run
    output_dir = out
    format = csv            ; csv | json for tabular outputs

    [rates]                 ; only with preset = custom, all five required
    singles_1_sig = 700
    ...

    [source]                ; optional overrides
    dwell_time = 40

    [scan]
    step_um = 0.04

    [sweep]
    points = 24             ; uniform grid over [0, 360)
    ; theta_p_deg = 0, 30, 60   (explicit grid instead of points)
"""
from __future__ import annotations

import configparser
import itertools
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import detection, fitting, fock, model
from .detection import RateSet, ScanSpec, SourceConfig
from .model import SwitchParams

FORMAT_VERSION = 1
DEFAULT_SWEEP_POINTS = 24
PRESET_DWELL = {"small": 1.0, "large": 40.0}
PRESET_RATES = {"small": detection.SMALL_REGIME_RATES, "large": detection.LARGE_REGIME_RATES}

_SECTIONS = {
    "experiment": {"preset", "seed", "theta_p_deg", "output_dir", "format"},
    "rates": {"singles_1_sig", "singles_1_ref", "singles_2", "acc_coinc", "dc_coinc"},
    "source": {
        "rep_rate",
        "dwell_time",
        "det1_efficiency",
        "det2_efficiency",
        "dark_rate_1",
        "dark_rate_2",
        "accidental_floor",
        "bs2_transmissivity",
    },
    "scan": {"start_um", "step_um", "count", "wavelength_um"},
    "sweep": {"points", "theta_p_deg"},
}


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentDescriptor:
    preset: str = "large"
    rates: RateSet = detection.LARGE_REGIME_RATES
    source: dict[str, float] = field(default_factory=dict)
    scan: ScanSpec = ScanSpec()
    theta_p_deg: float = 95.0
    theta_grid_deg: tuple[float, ...] = tuple(np.arange(DEFAULT_SWEEP_POINTS) * 360.0 / DEFAULT_SWEEP_POINTS)
    seed: int = 0
    output_dir: Path = Path("out")
    fmt: str = "csv"

    @classmethod
    def from_preset(cls, preset: str, **kwargs) -> "ExperimentDescriptor":
        if preset not in PRESET_RATES:
            raise DescriptorError(f"unknown preset {preset!r}")
        source = {"dwell_time": PRESET_DWELL[preset], **kwargs.pop("source", {})}
        return cls(preset=preset, rates=PRESET_RATES[preset], source=source, **kwargs)

    @property
    def r(self) -> float:
        return math.sqrt(self.rates.dc_coinc / self.rates.acc_coinc)

    def switch(self, theta_p: float) -> SwitchParams:
        """Calibrated amplitudes at pump phase ``theta_p`` (radians)."""
        return detection.calibrate(
            self.rates,
            rep_rate=self.source.get("rep_rate", detection.REP_RATE),
            efficiencies=(self.source.get("det1_efficiency", 1.0), self.source.get("det2_efficiency", 1.0)),
            bs2_transmissivity=self.source.get("bs2_transmissivity", 0.9),
            theta_p=theta_p,
        )

    def source_config(self, theta_p: float, seed: int | None = None) -> SourceConfig:
        extra = {k: v for k, v in self.source.items() if k != "bs2_transmissivity"}
        return SourceConfig(self.switch(theta_p), rng_seed=self.seed if seed is None else seed, **extra)


def deg2rad(deg):
    return np.deg2rad(deg) if np.ndim(deg) else math.radians(deg)


def present_mod360(deg):
    """Fold angles in degrees into [0, 360) for sweep plots."""
    out = np.mod(np.asarray(deg, dtype=float), 360.0)
    return float(out) if np.ndim(out) == 0 else out


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, ""), no)
        elif section and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            lines.setdefault((section, key), no)
    return lines


def parse_descriptor(text: str, source_name: str = "<descriptor>") -> ExperimentDescriptor:
    if not text.strip():
        raise DescriptorError(f"{source_name}: parse error: descriptor is empty")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source_name)
    except configparser.Error as exc:
        raise DescriptorError(f"{source_name}: parse error: {exc}") from exc
    where = _key_lines(text)

    def loc(section, key=""):
        return f"{source_name}:{where.get((section, key), '?')}"

    for section in parser.sections():
        if section not in _SECTIONS:
            raise DescriptorError(f"{loc(section)}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise DescriptorError(f"{loc(section, key)}: unknown key {section}.{key}")

    def get(section, key, conv, default=None):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise DescriptorError(f"{loc(section, key)}: {section}.{key}: cannot parse {raw!r}") from exc

    def fail(section, key, msg):
        raise DescriptorError(f"{loc(section, key)}: {section}.{key}: {msg}")

    preset = get("experiment", "preset", str.strip, "large")
    if preset not in ("small", "large", "custom"):
        fail("experiment", "preset", f"must be small, large or custom, got {preset!r}")

    if preset == "custom":
        missing = [k for k in sorted(_SECTIONS["rates"]) if not parser.has_option("rates", k)]
        if missing:
            raise DescriptorError(f"{loc('rates')}: custom preset requires rates: {', '.join(missing)}")
        vals = {k: get("rates", k, float) for k in _SECTIONS["rates"]}
        for k, v in vals.items():
            if not math.isfinite(v) or v < 0:
                fail("rates", k, "must be a finite nonnegative rate")
        if vals["acc_coinc"] <= 0:
            fail("rates", "acc_coinc", "must be positive")
        rates = RateSet(**vals)
    else:
        if parser.has_section("rates"):
            raise DescriptorError(f"{loc('rates')}: [rates] is only allowed with preset = custom")
        rates = PRESET_RATES[preset]

    source: dict[str, float] = {}
    if preset in PRESET_DWELL:
        source["dwell_time"] = PRESET_DWELL[preset]
    for key in sorted(_SECTIONS["source"]):
        v = get("source", key, float)
        if v is None:
            continue
        if not math.isfinite(v):
            fail("source", key, "must be finite")
        if key in ("det1_efficiency", "det2_efficiency", "bs2_transmissivity") and not 0 <= v <= 1:
            fail("source", key, f"must lie in [0, 1], got {v}")
        if key in ("rep_rate", "dwell_time") and v <= 0:
            fail("source", key, f"must be positive, got {v}")
        if key in ("dark_rate_1", "dark_rate_2", "accidental_floor") and v < 0:
            fail("source", key, f"must be nonnegative, got {v}")
        source[key] = v

    scan_kwargs: dict[str, Any] = {}
    for key, conv in (("start_um", float), ("step_um", float), ("count", int), ("wavelength_um", float)):
        v = get("scan", key, conv)
        if v is not None:
            scan_kwargs[key] = v
    try:
        scan = ScanSpec(**scan_kwargs)
    except ValueError as exc:
        raise DescriptorError(f"{loc('scan')}: [scan]: {exc}") from exc
    if scan.periods_covered < 3:
        raise DescriptorError(f"{loc('scan')}: [scan]: scan covers {scan.periods_covered:.2f} fringes, need 3")

    points = get("sweep", "points", int)
    explicit = get(
        "sweep", "theta_p_deg", lambda s: tuple(float(t) for t in s.replace(",", " ").split())
    )
    if points is not None and explicit is not None:
        raise DescriptorError(f"{loc('sweep')}: give either sweep.points or sweep.theta_p_deg")
    if explicit is not None:
        if not explicit:
            fail("sweep", "theta_p_deg", "grid is empty")
        grid = explicit
    else:
        n = DEFAULT_SWEEP_POINTS if points is None else points
        if n < 1:
            fail("sweep", "points", "must be at least 1")
        grid = tuple(float(v) for v in np.arange(n) * 360.0 / n)

    fmt = get("experiment", "format", str.strip, "csv")
    if fmt not in ("csv", "json"):
        fail("experiment", "format", f"must be csv or json, got {fmt!r}")

    desc = ExperimentDescriptor(
        preset=preset,
        rates=rates,
        source=source,
        scan=scan,
        theta_p_deg=get("experiment", "theta_p_deg", float, 95.0),
        theta_grid_deg=grid,
        seed=get("experiment", "seed", int, 0),
        output_dir=Path(get("experiment", "output_dir", str.strip, "out")),
        fmt=fmt,
    )
    try:
        desc.source_config(0.0)
    except ValueError as exc:
        raise DescriptorError(f"{source_name}: inconsistent rates: {exc}") from exc
    return desc


def load_descriptor(path) -> ExperimentDescriptor:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"{path}: cannot read descriptor: {exc}") from exc
    return parse_descriptor(text, str(path))


# --- output writers ----------------------------------------------------------


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _clean(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _write_json(path: Path, kind: str, payload: dict) -> Path:
    doc = {"format": f"cphase-switch/{kind}", "version": FORMAT_VERSION, **_clean(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return repr(v) if math.isfinite(v) else "nan"


def _write_table(out_dir: Path, stem: str, kind: str, columns: list[str], rows, fmt: str) -> Path:
    rows = [list(r) for r in rows]
    if fmt == "json":
        return _write_json(out_dir / f"{stem}.json", kind, {"columns": columns, "rows": rows})
    path = out_dir / f"{stem}.csv"
    lines = [f"# cphase-switch {kind} v{FORMAT_VERSION}", ",".join(columns)]
    lines += [",".join(_fmt_cell(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def _fit_record(fit: fitting.FitResult | None) -> dict | None:
    if fit is None:
        return None
    m = fit.model
    return {
        "offset": m.offset,
        "amplitude": m.amplitude,
        "phase_deg": math.degrees(m.phase),
        "period_um": m.period,
        "phase_sigma_deg": math.degrees(fit.phase_sigma),
        "covariance": fit.covariance.tolist(),
        "chi2": fit.chi2,
        "dof": fit.dof,
        "period_fixed": fit.period_fixed,
        "flags": list(fit.flags),
    }


@dataclass
class RunResult:
    files: list[Path]
    flagged: bool
    summary: dict

    @property
    def exit_code(self) -> int:
        return 1 if self.flagged else 0


def run_fig3(desc: ExperimentDescriptor, out_dir: Path | None = None) -> RunResult:
    """One reference-delay scan at the descriptor's pump phase, plus fits."""
    out = Path(out_dir or desc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    theta = deg2rad(desc.theta_p_deg)
    config = desc.source_config(theta)
    record = detection.simulate_scan(config, desc.scan)
    analysis = fitting.analyze_scan(record)

    files = []
    scan_path = out / ("fig3_scan.csv" if desc.fmt == "csv" else "fig3_scan.json")
    if desc.fmt == "csv":
        scan_path.write_text(record.to_csv())
    else:
        cols = list(detection.SCAN_COLUMNS)
        rows = zip(record.delay_um, record.phi_ref, record.n_pulses, record.singles1, record.singles2, record.coinc)
        _write_json(scan_path, "scan", {"wavelength_um": record.wavelength_um, "columns": cols, "rows": [list(r) for r in rows]})
    files.append(scan_path)

    r = desc.r
    try:
        theory = math.degrees(model.conditional_phase_shift(r, theta))
    except model.UndefinedPhaseError:
        theory = math.nan
    diff = analysis.difference
    summary = {
        "preset": desc.preset,
        "seed": desc.seed,
        "theta_p_deg": desc.theta_p_deg,
        "r": r,
        "regime": model.classify_regime(r).regime.value,
        "delta_phi_deg": diff.delta_deg if diff else math.nan,
        "sigma_deg": diff.sigma_deg if diff else math.nan,
        "theory_delta_phi_deg": theory,
        "sign_convention": "positive delta_phi: coincidence fringe lags the singles fringe",
        "flags": list(analysis.flags),
    }
    files.append(
        _write_json(
            out / "fig3_fits.json",
            "fig3-fits",
            {**summary, "singles_fit": _fit_record(analysis.singles), "coinc_fit": _fit_record(analysis.coinc)},
        )
    )

    dense = np.linspace(record.delay_um[0], record.delay_um[-1], 400)
    if analysis.singles is not None:
        rows = zip(dense, analysis.singles.model(dense), analysis.coinc.model(dense))
    else:
        rows = ((x, math.nan, math.nan) for x in dense)
    files.append(_write_table(out, "fig3_overlay", "fig3-overlay", ["delay_um", "singles_fit", "coinc_fit"], rows, desc.fmt))
    return RunResult(files, bool(analysis.flags), summary)


def theory_for_rates(rates: RateSet, theta_p_deg) -> model.TheoryCurve:
    """Theory curve from the measured rate ratio alone."""
    r = math.sqrt(rates.dc_coinc / rates.acc_coinc)
    return model.theory_curve(r, deg2rad(np.asarray(theta_p_deg, dtype=float)))


def simulate_sweep(desc: ExperimentDescriptor, workers: int = 1) -> list[fitting.SweepPoint]:
    """Simulate and fit one scan per grid pump phase; order follows the grid."""
    thetas = [deg2rad(t) for t in desc.theta_grid_deg]

    def one(item):
        idx, theta = item
        record = detection.simulate_scan(desc.source_config(theta), desc.scan, stream=idx)
        return fitting.sweep_point(theta, record)

    items = list(enumerate(thetas))
    if workers <= 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))


def run_fig4(desc: ExperimentDescriptor, out_dir: Path | None = None, workers: int = 1) -> RunResult:
    """Phase lag versus pump phase, with the zero-free-parameter theory overlay."""
    if not desc.theta_grid_deg:
        raise DescriptorError("theta_p grid is empty")
    out = Path(out_dir or desc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = simulate_sweep(desc, workers)
    files = [
        _write_json(
            out / "fig4_sweep.json",
            "fig4-sweep",
            {
                "preset": desc.preset,
                "seed": desc.seed,
                "r": desc.r,
                "sign_convention": "positive delta_phi: coincidence fringe lags the singles fringe",
                "records": [p.to_record() for p in points],
            },
        )
    ]
    dense = np.linspace(0.0, 360.0, 361)
    curve = theory_for_rates(desc.rates, dense)
    files.append(
        _write_table(
            out,
            "fig4_theory",
            "fig4-theory",
            ["theta_p_deg", "phase_shift_deg", "defined"],
            zip(dense, np.degrees(curve.phase_shift), curve.defined),
            desc.fmt,
        )
    )
    at_grid = theory_for_rates(desc.rates, desc.theta_grid_deg)
    rows = []
    for p, th, ok in zip(points, at_grid.phase_shift, at_grid.defined):
        rows.append(
            (
                math.degrees(p.theta_p),
                present_mod360(math.degrees(p.delta_phi)),
                math.degrees(p.sigma),
                present_mod360(math.degrees(th)) if ok else math.nan,
                ";".join(p.flags),
            )
        )
    files.append(
        _write_table(
            out,
            "fig4_combined",
            "fig4-combined",
            ["theta_p_deg", "delta_phi_mod360_deg", "sigma_deg", "theory_mod360_deg", "flags"],
            rows,
            desc.fmt,
        )
    )
    flagged = any(p.flags for p in points)
    summary = {"points": len(points), "flagged_points": sum(bool(p.flags) for p in points), "r": desc.r}
    return RunResult(files, flagged, summary)


def calibration_report(desc: ExperimentDescriptor) -> dict:
    sw = desc.switch(deg2rad(desc.theta_p_deg))
    cfg = desc.source_config(deg2rad(desc.theta_p_deg))
    no_switch = replace(cfg, switch=replace(sw, a_dc=0j, ref_amp=0j))
    return _clean(
        {
            "preset": desc.preset,
            "alpha": abs(sw.alpha),
            "beta": abs(sw.beta),
            "ref_amp": abs(sw.ref_amp),
            "a_dc_abs": abs(sw.a_dc),
            "theta_p_deg": desc.theta_p_deg,
            "r": sw.r,
            "regime": model.classify_regime(sw.r).regime.value,
            "accidental_coinc_rate": detection.expected_rates(no_switch)["coinc"],
            "control_singles_excess": detection.control_singles_excess(
                desc.rates, sw, cfg.rep_rate, cfg.det2_efficiency
            ),
            "mean_rates": detection.expected_rates(cfg),
        }
    )


# --- validation ----------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def oracle_phase_errors(cutoff: int = fock.DEFAULT_CUTOFF, seed: int = 0, magnitudes=(0.02, 0.05, 0.1)):
    """Exact-engine conditional phase minus arg(alpha + kappa/beta) on a 27-point grid.

    Yields ``(alpha, beta, kappa, error, bound)`` per grid point, with random
    phases drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    basis = fock.FockBasis(2, cutoff)
    out = []
    for ma, mb, mk in itertools.product(magnitudes, repeat=3):
        pa, pb, pk = rng.uniform(0, 2 * np.pi, 3)
        a, b, k = ma * np.exp(1j * pa), mb * np.exp(1j * pb), mk * np.exp(1j * pk)
        state = fock.spdc_evolve(fock.coherent_product_state([a, b], basis), 0, 1, k)
        cond, _ = fock.project_on_click(state, [1], clicked=True)
        ratio = fock.conditional_mode_ratio(cond, 0, {1: 1})
        sw = SwitchParams(a, b, k)
        err = abs(model.wrap_phase(np.angle(ratio) - np.angle(model.conditional_amplitude(sw))))
        out.append((a, b, k, err, 10 * max(ma, mb, mk) ** 2))
    return out


def fit_coverage(n_seeds: int = 100, mean_counts: float = 208.0, visibility: float = 0.5,
                 phase: float = math.radians(65.0), seed0: int = 0) -> float:
    """Fraction of Poisson-noise replicates whose true phase lies within the fitted 1 sigma."""
    spec = ScanSpec()
    x = spec.delays
    truth = fitting.FringeModel(mean_counts, visibility * mean_counts, phase, spec.wavelength_um)
    mu = truth(x)
    hits = 0
    for s in range(seed0, seed0 + n_seeds):
        y = np.random.default_rng(s).poisson(mu)
        fit = fitting.fit_fringe(x, y, period=spec.wavelength_um)
        if abs(model.wrap_phase(fit.model.phase - phase)) <= fit.phase_sigma:
            hits += 1
    return hits / n_seeds


def run_validate(cutoff: int = fock.DEFAULT_CUTOFF, seed: int = 0) -> dict:
    checks: list[Check] = []

    try:
        errs = oracle_phase_errors(cutoff, seed)
        worst = max(e / bnd for *_, e, bnd in errs)
        checks.append(Check("oracle_equivalence", worst <= 1.0, f"worst error/bound = {worst:.3g} at cutoff {cutoff}"))
    except fock.TruncationError as exc:
        checks.append(Check("oracle_equivalence", False, f"truncation: {exc}"))

    rng = np.random.default_rng(seed)
    theta = np.linspace(0, 2 * np.pi, 2001)
    ok, worst = True, 0.0
    for r in rng.uniform(0.01, 0.99, 20):
        phi = np.array([model.conditional_phase_shift(r, t) for t in theta])
        excess = np.abs(phi).max() - math.asin(r)
        worst = max(worst, excess)
        ok &= excess <= 1e-12
        at = math.acos(-r)
        ok &= abs(abs(model.conditional_phase_shift(r, at)) - math.asin(r)) <= 1e-6
    checks.append(Check("small_regime_bound", bool(ok), f"max excess over arcsin(r) = {worst:.2e}"))

    ok = True
    for r in rng.uniform(1.01, 20.0, 20):
        phi = np.unwrap([model.conditional_phase_shift(r, t) for t in theta])
        ok &= bool(np.all(np.diff(phi) > 0))
    checks.append(Check("large_regime_monotonic", bool(ok), "unwrapped phase strictly increasing for 20 r > 1"))

    grid = np.deg2rad(np.arange(360.0))
    dev = max(abs(model.wrap_phase(model.conditional_phase_shift(1000.0, t) - t)) for t in grid)
    checks.append(Check("extreme_limit", math.degrees(dev) <= 0.06, f"max |dphi - theta_p| = {math.degrees(dev):.4f} deg"))

    checks.append(fringe_shift_check())

    bell = model.polarization_switch(model.PolarizationPairState(0.1, 1, 0, 0, 0), 0.1)
    conc = model.concurrence(bell)
    checks.append(Check("bell_state", abs(conc - 1) <= 1e-12, f"concurrence = {conc:.15f}"))

    cov = fit_coverage(seed0=seed)
    checks.append(Check("fit_coverage", 0.60 <= cov <= 0.76, f"1-sigma coverage = {cov:.2f} over 100 seeds"))

    return {
        "format": "cphase-switch/validate",
        "version": FORMAT_VERSION,
        "passed": all(c.passed for c in checks),
        "checks": [{"name": c.name, "passed": bool(c.passed), "detail": c.detail} for c in checks],
    }


def fringe_shift_check(tol: float = 1e-12) -> Check:
    """Conditional fringe equals the bare fringe delayed by the predicted shift."""
    phi_ref = np.linspace(0, 2 * np.pi, 73)
    worst = 0.0
    for r, theta in ((0.1355, 1.7), (2.174, math.radians(95)), (5.0, -2.5), (0.7, 3.0)):
        sw = SwitchParams.from_ratio(0.05, 0.05, r, theta, ref_amp=0.08, bs2_transmissivity=0.5)
        cond = model.conditional_amplitude(sw)
        rescaled = cond * abs(sw.alpha) / abs(cond)
        shift = model.conditional_phase_shift(r, theta)
        lhs = model.det1_singles_probability(rescaled, sw, phi_ref)
        rhs = model.det1_singles_probability(sw.alpha, sw, phi_ref - shift)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return Check("fringe_shift_identity", worst <= tol, f"max pointwise mismatch = {worst:.2e}")
