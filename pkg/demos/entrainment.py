"""An adaptive Hopf oscillator finds the natural frequency of the body it drives.

Whatever frequency it starts from, the oscillator settles on the 10 rad/s of
the undamped plant. On a damped plant the feedback delay decides how quickly
that happens, or whether it happens at all.
"""

import math

from morphotune.controllers import HarmonicPlant, HopfParams, entrain

plant = HarmonicPlant(m=1.0, k=100.0, c=0.0)
for w0 in (6.0, 8.0, 12.0, 15.0):
    out = entrain(plant, HopfParams(epsilon=2.0, omega_init=w0), 150.0, 2e-3, z0=1.0, record_every=50)
    print(f"start {w0:5.1f} rad/s -> {out['omega_final']:.3f} rad/s, settled after {out['convergence_time']:.1f} s")

damped = HarmonicPlant(1.0, 100.0, 2.0)
for k in range(8):
    hp = HopfParams(epsilon=1.0, drive_gain=30.0, omega_init=6.0, phase_lag=k * math.pi / 4)
    out = entrain(damped, hp, 100.0, 2e-3, record_every=50)
    state = f"{out['convergence_time']:.1f} s" if out["converged"] else "no lock"
    print(f"lag {k}pi/4: omega {out['omega_final']:.3f}, {state}")
