"""How the dead volume reshapes a pneumatic spring.

Prints the force at a few compressions for growing dead volume and the range
of curvature over the first centimetre, then writes an SVG of the curves.
"""

import sys

import numpy as np

from morphotune import svg
from morphotune.springs import PneumaticSpringParams

x = np.linspace(0.0, 0.01, 41)
curves = {}
print("C_v (cm^3)   F(0)     F(5 mm)   F(10 mm)   curvature range (N/m^2)")
for cv in (0.0, 2e-6, 6.3e-6, 1.5e-5):
    p = PneumaticSpringParams(C_v=cv)
    F = np.array([p.force(v) for v in x])
    k2 = np.array([p.curvature(v) for v in x])
    curves[f"C_v={cv * 1e6:g} cm3"] = F
    print(f"{cv * 1e6:8.2f} {F[0]:9.3f} {F[20]:9.3f} {F[-1]:9.3f}   [{k2.min():.3g}, {k2.max():.3g}]")

out = sys.argv[1] if len(sys.argv) > 1 else "spring_shapes.svg"
with open(out, "w") as fh:
    fh.write(svg.line_plot(x * 1e3, curves, "Pneumatic spring", "compression (mm)", "force (N)"))
print("wrote", out)
