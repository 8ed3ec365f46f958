"""Three ways a four-legged plate can bounce.

Heave (all legs together), pitch (front against rear) and roll (left against
right). Shaking the body in the shape of one mode never wakes the others.
"""

import math

import numpy as np

from morphotune.modes import PlateModel, assemble, modal_response, normal_modes

plate = PlateModel.rectangle(m=2.0, a=0.3, b=0.15, k=800.0, leg_y=0.1)
M, K = assemble(plate)
modes = normal_modes(M, K)
for m in modes:
    print(f"{m.label.value:6s} {m.omega / (2 * math.pi):6.3f} Hz  shape {np.round(m.shape, 3)}")
w = {m.label.value: m.omega for m in modes}
print(f"pitch/heave ratio {w['Bound'] / w['Stott']:.12f} (sqrt 3 = {math.sqrt(3):.12f})")

v, w0 = modes[0].shape, modes[0].omega
E = modal_response(M, K, 0.0, lambda t: (M @ v) * math.sin(w0 * t), 5.0, 1e-3)["energy"]
print("energy after 5 s of heave forcing:", np.array2string(E[-1], precision=3))
