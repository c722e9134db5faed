"""Weak coherent inputs, a down-conversion crystal, and a conditional projection.

Run with ``python demos/01_exact_state_evolution.py``.
"""
import cmath

from cphase_switch import fock, model

# Two optical modes (signal, control) truncated at three photons each.
basis = fock.FockBasis(n_modes=2, cutoff=3)

alpha, beta, kappa = 0.1, 0.1j, 0.03 * cmath.exp(0.4j)
state = fock.coherent_product_state([alpha, beta], basis)
print("input mean photon numbers:", state.mean_photon_number(0), state.mean_photon_number(1))

# Pairs are added coherently to the existing |1,1> amplitude.
out = fock.spdc_evolve(state, 0, 1, kappa)
print(f"weight on the truncation boundary: {out.leakage():.2e}")

# Keep only pulses where the control mode held a photon and read off the
# signal mode's single-photon phase relative to vacuum.
cond, prob = fock.project_on_click(out, [1], clicked=True)
ratio = fock.conditional_mode_ratio(cond, 0, {1: 1})
print(f"control photon probability: {prob:.4f}")

exact = cmath.phase(ratio / alpha)
lowest_order = cmath.phase(model.conditional_amplitude(model.SwitchParams(alpha, beta, kappa)) / alpha)
print(f"conditional phase, exact engine : {exact:+.5f} rad")
print(f"conditional phase, lowest order : {lowest_order:+.5f} rad")
