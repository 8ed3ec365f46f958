"""Sweep the drive frequency up and down and watch the hopper jump.

A stiffer (higher pressure) leg moves the resonance up and widens the loop
between the two sweep directions.
"""

from morphotune.analysis import frequency_sweep, hysteresis_width
from morphotune.plant import HopperPlant
from morphotune.springs import PneumaticSpringParams

P0 = PneumaticSpringParams().P_v0

for scale in (1.0, 1.2):
    plant = HopperPlant().with_spring(PneumaticSpringParams().with_pressure(scale * P0))
    up = frequency_sweep(plant, (4.0, 7.0), 0.25, "up", dwell_cycles=24, measure_cycles=8)
    dn = frequency_sweep(plant, (4.0, 7.0), 0.25, "down", dwell_cycles=24, measure_cycles=8)
    print(f"pressure x{scale}: jump up at {up.jump_frequency} Hz, down at {dn.jump_frequency} Hz,"
          f" loop width {hysteresis_width(up, dn):.2f} Hz")
    for f, a, fl in zip(up.frequencies, up.amplitudes, up.flight):
        bar = "#" * int(a * 2000)
        print(f"  {f:5.2f} Hz {1e3 * a:6.2f} mm {'flight' if fl else '      '} {bar}")
