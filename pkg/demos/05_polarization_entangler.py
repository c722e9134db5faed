"""Using the switch on polarization pairs to make a maximally entangled state.

Run with ``python demos/05_polarization_entangler.py``.
"""
from cphase_switch import model

# A horizontally polarized signal/control pair with weak pair amplitude eps.
state = model.PolarizationPairState(eps=0.1, a=1, b=0, c=0, d=0)
print("concurrence before:", model.concurrence(state))

# Down-conversion adds amplitude only to |V>|V>.  Matching it to the |H>|H>
# amplitude gives an equal superposition in the coincidence subspace.
for delta in (0.02, 0.05, 0.1, 0.2):
    out = model.polarization_switch(state, delta)
    print(f"pair amplitude {delta:.2f}: concurrence {model.concurrence(out):.6f}")
