"""Simulation and analysis tools for a two-photon conditional-phase switch."""
from . import detection, fitting, fock, model
from .detection import ScanRecord, ScanSpec, SourceConfig, calibrate_from_rates, simulate_scan
from .fitting import FitResult, fit_fringe, phase_difference, sweep_analysis
from .model import (
    PairAmplitudes,
    PolarizationPairState,
    SwitchParams,
    concurrence,
    conditional_amplitude,
    conditional_phase_shift,
    evolved_amplitudes,
    polarization_switch,
    theory_curve,
)

__version__ = "0.1.0"
