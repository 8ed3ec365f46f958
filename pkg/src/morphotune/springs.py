"""Tunable spring models.

Every model exposes ``force(x)``, ``stiffness(x)`` and ``energy(x)`` in its own
deflection coordinate plus a ``working_range``. Positive force pushes the two
ends of the spring apart. For the pneumatic, jack and linear springs ``x`` is
the compression; for the magnetic spring ``x`` is the gap between the magnets,
and ``stiffness`` returns the restoring stiffness ``-dF/dd``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol

from scipy.optimize import brentq


class SpringDomainError(ValueError):
    """Deflection or tuning parameter outside a spring's admissible range."""


class SpringModel(Protocol):
    def force(self, x: float) -> float: ...

    def stiffness(self, x: float) -> float: ...

    def energy(self, x: float) -> float: ...

    @property
    def working_range(self) -> tuple[float, float]: ...


# ---------------------------------------------------------------------------
# pneumatic (two-chamber cylinder with dead volumes)


@dataclass(frozen=True)
class PneumaticSpringParams:
    """Double-acting cylinder, isothermal gas in both chambers.

    Areas in m^2, pressures in Pa, volumes in m^3, ``x_max`` in m. The upper
    chamber is compressed by the piston, the rear chamber expands.
    """

    A_v: float = 7.9e-5
    A_r: float = 6.6e-5
    P_v0: float = 2.5e5
    P_r0: float = 3.0e5
    V_v0: float = 6.3e-6
    V_r0: float = 0.0
    V_T: float = 6.3e-6
    C_v: float = 0.0
    C_r: float = 4.0e-6
    x_max: float = 0.06

    def __post_init__(self):
        for name in ("A_v", "A_r", "P_v0", "P_r0", "V_T", "x_max"):
            if not getattr(self, name) > 0:
                raise SpringDomainError(f"{name} must be positive")
        if self.C_v < 0 or self.C_r < 0 or self.V_v0 < 0 or self.V_r0 < 0:
            raise SpringDomainError("volumes must be non-negative")
        if self.V_v0 > self.V_T:
            raise SpringDomainError("V_v0 cannot exceed V_T")
        if not self.A_v * self.x_max < self.beta:
            raise SpringDomainError("A_v * x_max must stay below C_v + V_T")
        if self.C_r <= 0 and self.gamma != 0:
            raise SpringDomainError("rear term is singular at x=0 with C_r=0")

    @property
    def alpha(self) -> float:
        return self.A_v * self.P_v0 * (self.V_v0 + self.C_v)

    @property
    def beta(self) -> float:
        return self.C_v + self.V_T

    @property
    def gamma(self) -> float:
        return self.A_r * self.P_r0 * (self.V_r0 + self.C_r)

    @property
    def working_range(self) -> tuple[float, float]:
        return (0.0, self.x_max)

    def _check(self, x: float) -> None:
        if not 0.0 <= x <= self.x_max:
            raise SpringDomainError(
                f"compression {x!r} m outside [0, {self.x_max}] m"
            )

    def force(self, x: float) -> float:
        self._check(x)
        return self.force_unchecked(x)

    def force_unchecked(self, x: float) -> float:
        """Closed form without the range check (callers guarantee the range)."""
        a = self.A_v
        upper = self.beta - a * x
        rear = a * x + self.C_r
        if upper <= 0 or (rear <= 0 and self.gamma != 0):
            raise SpringDomainError(f"chamber volume vanished at x={x!r}")
        rear_term = self.gamma / rear if self.gamma != 0 else 0.0
        return self.alpha / upper - rear_term

    def stiffness(self, x: float) -> float:
        self._check(x)
        return self.stiffness_unchecked(x)

    def stiffness_unchecked(self, x: float) -> float:
        a = self.A_v
        upper = self.beta - a * x
        rear = a * x + self.C_r
        rear_term = self.gamma * a / rear**2 if self.gamma != 0 else 0.0
        return self.alpha * a / upper**2 + rear_term

    def curvature(self, x: float) -> float:
        """Analytic d2F/dx2."""
        self._check(x)
        a = self.A_v
        upper = self.beta - a * x
        rear = a * x + self.C_r
        rear_term = 2 * self.gamma * a**2 / rear**3 if self.gamma != 0 else 0.0
        return 2 * self.alpha * a**2 / upper**3 - rear_term

    def energy(self, x: float) -> float:
        """Work done compressing the spring from 0 to ``x`` (J)."""
        self._check(x)
        return self.energy_unchecked(x)

    def energy_unchecked(self, x: float) -> float:
        a = self.A_v
        e = -(self.alpha / a) * math.log((self.beta - a * x) / self.beta)
        if self.gamma != 0:
            e -= (self.gamma / a) * math.log((a * x + self.C_r) / self.C_r)
        return e

    def with_pressure(self, P_v0: float) -> "PneumaticSpringParams":
        return replace(self, P_v0=P_v0)

    def with_dead_volume(self, C_v: float) -> "PneumaticSpringParams":
        return replace(self, C_v=C_v)


def pneumatic_force(p: PneumaticSpringParams, x: float) -> float:
    """Piston force (N) at compression ``x`` (m)."""
    return p.force(x)


# ---------------------------------------------------------------------------
# magnetic (repelling magnets with a modulating coil)


@dataclass(frozen=True)
class MagneticSpringParams:
    """Inverse-quartic repulsion with a current-proportional coil term.

    ``k_m`` in N*m^4, ``c_I`` in N*m^4/A, currents in A, gaps in m.
    """

    k_m: float = 10.0 * 5e-3**4
    c_I: float = 0.0
    I: float = 0.0
    I_max: float = 0.4
    d_min: float = 1e-3
    d_max: float = 0.05

    def __post_init__(self):
        if not self.k_m > 0:
            raise SpringDomainError("k_m must be positive")
        if not self.d_min > 0:
            raise SpringDomainError("d_min must be positive")
        if not self.I_max >= 0:
            raise SpringDomainError("I_max must be non-negative")
        if abs(self.I) > self.I_max * (1 + 1e-12):
            raise SpringDomainError(f"|I|={abs(self.I)} A exceeds I_max")
        if self.k_m - abs(self.c_I) * self.I_max <= 0:
            raise SpringDomainError("coil term would reverse the repulsion")

    @property
    def working_range(self) -> tuple[float, float]:
        return (self.d_min, self.d_max)

    def coefficient(self, I: float | None = None) -> float:
        I = self.I if I is None else I
        if abs(I) > self.I_max * (1 + 1e-12):
            raise SpringDomainError(f"|I|={abs(I)} A exceeds I_max={self.I_max}")
        return self.k_m + self.c_I * I

    def _check(self, d: float) -> None:
        if d < self.d_min:
            raise SpringDomainError(f"gap {d!r} m below d_min={self.d_min} m")

    def force(self, d: float, I: float | None = None) -> float:
        self._check(d)
        return self.coefficient(I) / d**4

    def stiffness(self, d: float, I: float | None = None) -> float:
        self._check(d)
        return 4.0 * self.coefficient(I) / d**5

    def energy(self, d: float, I: float | None = None) -> float:
        """Potential relative to infinite separation."""
        self._check(d)
        return self.coefficient(I) / (3.0 * d**3)

    def equilibrium_gap(self, load: float, I: float | None = None) -> float:
        if not load > 0:
            raise SpringDomainError("load must be positive")
        d = (self.coefficient(I) / load) ** 0.25
        self._check(d)
        return d

    def with_current(self, I: float) -> "MagneticSpringParams":
        return replace(self, I=I)


def magnetic_force(p: MagneticSpringParams, d: float, I: float) -> float:
    """Repulsive force (N) at gap ``d`` with coil current ``I``."""
    return p.force(d, I)


def _displacement_change(p: MagneticSpringParams, load: float, c_I: float) -> float:
    q = replace(p, c_I=c_I, I=0.0)
    d_hi = q.equilibrium_gap(load, q.I_max)
    d_lo = q.equilibrium_gap(load, -q.I_max)
    return (d_hi - d_lo) / q.equilibrium_gap(load, 0.0)


def calibrate_magnetic(
    p: MagneticSpringParams, load: float, target_change: float, tol: float = 1e-10
) -> float:
    """Coil coefficient giving a peak-to-peak relative change ``target_change``
    of the equilibrium gap under ``load`` between ``I = +-I_max``.

    Solved by bisection over ``[0, k_m / I_max)``.
    """
    if target_change < 0:
        raise SpringDomainError("target_change must be non-negative")
    if target_change == 0 or p.I_max == 0:
        if target_change != 0:
            raise SpringDomainError("no coil authority with I_max = 0")
        return 0.0
    lo, hi = 0.0, p.k_m / p.I_max
    # the lower gap must stay admissible: bound c_I from the d_min side too
    c_dmin = (p.k_m - load * p.d_min**4) / p.I_max
    hi = min(hi, c_dmin)
    if hi <= 0:
        raise SpringDomainError("load compresses the gap below d_min")
    hi *= 1 - 1e-12
    if _displacement_change(p, load, hi) < target_change:
        raise SpringDomainError(
            f"target change {target_change} unreachable within the repulsion limit"
        )
    while hi - lo > tol * p.k_m / p.I_max:
        mid = 0.5 * (lo + hi)
        if _displacement_change(p, load, mid) < target_change:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# jack spring


@dataclass(frozen=True)
class JackSpringParams:
    k_full: float = 1000.0
    L_total: float = 0.05
    tap: float = 1.0
    fixed_length: bool = True
    x_max: float = 0.02

    def __post_init__(self):
        if not 0.0 < self.tap <= 1.0:
            raise SpringDomainError(f"tap {self.tap!r} outside (0, 1]")
        if not self.k_full > 0:
            raise SpringDomainError("k_full must be positive")

    @property
    def k_eff(self) -> float:
        return self.k_full / self.tap

    @property
    def working_range(self) -> tuple[float, float]:
        return (0.0, self.x_max)

    def external_length(self) -> float:
        if self.fixed_length:
            return self.L_total
        # standard variant: the jack end moves with the tap, g(tap) = (1 + tap) / 2
        return self.L_total * (1.0 + self.tap) / 2.0

    def force(self, x: float) -> float:
        return self.k_eff * x

    def stiffness(self, x: float) -> float:
        return self.k_eff

    def energy(self, x: float) -> float:
        return 0.5 * self.k_eff * x * x

    def with_tap(self, tap: float) -> "JackSpringParams":
        return replace(self, tap=tap)


def jack_effective(p: JackSpringParams) -> dict:
    return {"k_eff": p.k_eff, "external_length": p.external_length()}


# ---------------------------------------------------------------------------
# linear


@dataclass(frozen=True)
class LinearSpringParams:
    k: float = 500.0
    rest_length: float = 0.1
    x_max: float = float("inf")

    def __post_init__(self):
        if not self.k > 0:
            raise SpringDomainError("k must be positive")

    @property
    def working_range(self) -> tuple[float, float]:
        return (-float("inf"), self.x_max)

    def force(self, x: float) -> float:
        return self.k * x

    def stiffness(self, x: float) -> float:
        return self.k

    def energy(self, x: float) -> float:
        return 0.5 * self.k * x * x


def tangent_stiffness(model: SpringModel, x: float) -> float:
    """dF/dx of ``model`` at ``x`` (restoring stiffness for the magnetic gap)."""
    return model.stiffness(x)


def equilibrium_compression(model: SpringModel, load: float) -> float:
    """Compression at which ``model`` carries ``load``.

    Only for compression-coordinate models.
    """
    lo, hi = model.working_range
    lo = max(lo, -1.0)
    hi = min(hi, 1.0)
    f = lambda x: model.force(x) - load
    if f(lo) > 0 or f(hi) < 0:
        raise SpringDomainError(f"load {load} N not carried within {lo}..{hi} m")
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)
