"""Keep a hopper at resonance while the ground under it stiffens.

The drive frequency stays at 4.8 Hz. At epoch 10 the ground jumps from 2000 to
3000 N/m; the tracker lowers the leg pressure until leg and ground together
are as stiff as before.
"""

from morphotune.controllers import TrackerParams, resonance_tracker
from morphotune.plant import GroundModel, HopperPlant

P0 = 2.5e5
plant = HopperPlant(drive_amplitude=0.002).with_ground(GroundModel().with_stiffness(2000.0))
plant = plant.with_spring(plant.spring.with_pressure(0.975 * P0))
run = resonance_tracker(plant, TrackerParams(probe=0.025 * P0, bounds=(0.5 * P0, 1.5 * P0)), {10: 3000.0}, epochs=25)

print("epoch  ground(N/m)  P/P0   amplitude(mm)  series k(N/m)")
for e in run.epochs:
    print(f"{e:5d} {run.ground_stiffness[e]:11.0f} {run.tuning[e] / P0:6.3f} {1e3 * run.amplitude[e]:10.3f} {run.series_stiffness[e]:12.1f}")
