"""Independent reference computations and frozen reference values.

Nothing here imports morphotune: each oracle re-derives its quantity from
first principles (arbitrary precision, scipy integrators, closed forms).
"""

import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 40

# pneumatic parameter table (SI)
TABLE = dict(
    A_v=7.9e-5, A_r=6.6e-5, P_v0=2.5e5, P_r0=3.0e5, V_v0=6.3e-6, V_r0=0.0, V_T=6.3e-6, C_r=4.0e-6
)

# frozen from pneumatic_mp at 40 digits
PNEUMATIC_F0 = -0.05
PNEUMATIC_F_10MM_CV0 = 6.047222927378196
PNEUMATIC_K0_CV0 = 638.7087301587302


def _mpf(v):
    # decimal literals enter exactly as written, mpf values pass through
    return v if isinstance(v, mp.mpf) else mp.mpf(repr(float(v)))


def pneumatic_mp(x, C_v=0.0, **over):
    """Isothermal two-chamber piston force at ``x`` in the current mpmath precision."""
    p = {k: _mpf(v) for k, v in {**TABLE, **over}.items()}
    C_v = _mpf(C_v)
    x = _mpf(x)
    upper = p["A_v"] * p["P_v0"] * (p["V_v0"] + C_v) / (C_v + p["V_T"] - p["A_v"] * x)
    rear = p["A_r"] * p["P_r0"] * (p["V_r0"] + p["C_r"]) / (p["A_v"] * x + p["C_r"])
    return upper - rear


def pneumatic_mp_derivative(x, C_v=0.0, n=1):
    return float(mp.diff(lambda s: pneumatic_mp(s, C_v), _mpf(x), n))


def two_mass_amplitude(M, m, k_leg, c_leg, k_g, c_g, F0, w):
    """Body amplitude of the stance-only chain from a state-space model.

    States (z_b, z_f, v_b, v_f); force F0 sin(w t) on the body.
    """
    A = np.array(
        [
            [0, 0, 1, 0],
            [0, 0, 0, 1],
            [-k_leg / M, k_leg / M, -c_leg / M, c_leg / M],
            [k_leg / m, -(k_leg + k_g) / m, c_leg / m, -(c_leg + c_g) / m],
        ]
    )
    B = np.array([[0], [0], [1 / M], [0]])
    C = np.array([[1, 0, 0, 0]])
    H = C @ np.linalg.solve(1j * w * np.eye(4) - A, B)
    return float(abs(H[0, 0]) * F0)


def damped_decay(m, k, c, x0, duration, dt):
    """Free linear decay by an adaptive high-accuracy integrator."""
    t = np.arange(int(round(duration / dt)) + 1) * dt
    sol = solve_ivp(lambda _, y: [y[1], -(k * y[0] + c * y[1]) / m], (0, t[-1]), [x0, 0.0],
                    t_eval=t, rtol=1e-11, atol=1e-13, method="DOP853")
    return sol.y[0]


def circle_imu(radius, speed, rate, duration):
    """Exact body-frame IMU of uniform circular motion, starting at the origin heading +x."""
    n = int(round(duration * rate)) + 1
    t = np.arange(n) / rate
    accel = np.column_stack([np.zeros(n), np.full(n, speed**2 / radius)])
    gyro = np.full(n, speed / radius)
    return t, accel, gyro


def circle_position(radius, speed, t):
    th = speed * t / radius
    return np.array([radius * math.sin(th), radius * (1 - math.cos(th))])


def kuramoto_critical_coupling(width):
    """Mean-field threshold 2 / (pi g(0)) for a Lorentzian of half-width ``width``."""
    g0 = 1.0 / (math.pi * width)
    return 2.0 / (math.pi * g0)


def plate_hessian(m, springs, q0=(0.0, 0.0, 0.0), h=1e-4):
    """Finite-difference Hessian of the exact small-rotation spring energy."""

    def energy(q):
        z, pitch, roll = q
        return sum(0.5 * k * (z - x * pitch + y * roll) ** 2 for x, y, k in springs)

    q0 = np.asarray(q0, dtype=float)
    Hm = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            ei = np.eye(3)[i] * h
            ej = np.eye(3)[j] * h
            Hm[i, j] = (energy(q0 + ei + ej) - energy(q0 + ei - ej) - energy(q0 - ei + ej) + energy(q0 - ei - ej)) / (4 * h * h)
    return Hm
