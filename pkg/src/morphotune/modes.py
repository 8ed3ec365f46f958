"""Normal modes of a rigid plate standing on vertical springs (heave, pitch, roll)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DOMINANCE = 0.8


class ModeLabel(str, Enum):
    STOTT = "Stott"
    BOUND = "Bound"
    ROLL = "Roll"
    MIXED = "Mixed"


@dataclass(frozen=True)
class PlateModel:
    """Plate with attachment points ``(x, y, k)``; x forward, y left.

    Pitch is positive nose-up, so a point ahead of the centre moves by ``-x * pitch``.
    """

    m: float
    I_pitch: float
    I_roll: float
    springs: tuple = ()

    def __post_init__(self):
        if min(self.m, self.I_pitch, self.I_roll) <= 0:
            raise ValueError("mass and inertias must be positive")
        springs = tuple(tuple(float(v) for v in s) for s in self.springs)
        if not springs:
            raise ValueError("need at least one spring")
        if any(len(s) != 3 or s[2] <= 0 for s in springs):
            raise ValueError("springs are (x, y, k) with k > 0")
        object.__setattr__(self, "springs", springs)

    @classmethod
    def rectangle(
        cls, m: float, a: float, b: float, k: float | tuple = 1000.0, leg_x: float | None = None, leg_y: float | None = None
    ) -> "PlateModel":
        """Uniform 2a x 2b plate, springs at ``(+-leg_x, +-leg_y)`` (corners by default).

        Order: front-left, front-right, rear-left, rear-right.
        """
        ks = (k,) * 4 if np.isscalar(k) else tuple(k)
        lx = a if leg_x is None else leg_x
        ly = b if leg_y is None else leg_y
        corners = ((lx, ly), (lx, -ly), (-lx, ly), (-lx, -ly))
        return cls(m, m * a * a / 3.0, m * b * b / 3.0, tuple((x, y, kk) for (x, y), kk in zip(corners, ks)))

    def lever(self, i: int) -> np.ndarray:
        x, y, _ = self.springs[i]
        return np.array([1.0, -x, y])

    def scaled(self, c: float) -> "PlateModel":
        return PlateModel(self.m, self.I_pitch, self.I_roll, tuple((x, y, k * c) for x, y, k in self.springs))


def assemble(plate: PlateModel) -> tuple[np.ndarray, np.ndarray]:
    M = np.diag([plate.m, plate.I_pitch, plate.I_roll])
    K = np.zeros((3, 3))
    for i, (_, _, k) in enumerate(plate.springs):
        c = plate.lever(i)
        K += k * np.outer(c, c)
    return M, K


def potential_energy(plate: PlateModel, q) -> float:
    q = np.asarray(q, dtype=float)
    return sum(0.5 * k * (plate.lever(i) @ q) ** 2 for i, (_, _, k) in enumerate(plate.springs))


# ---------------------------------------------------------------------------
# eigen solution


def cholesky(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    L = np.zeros_like(A, dtype=float)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0:
            raise np.linalg.LinAlgError("mass matrix is not positive definite")
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def jacobi_eigh(S: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations for a symmetric matrix; returns ``(values, vectors)`` unsorted."""
    A = np.array(S, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                gap = A[q, q] - A[p, p]
                if abs(A[p, q]) < 1e-18 * abs(gap):
                    # rotation angle below roundoff
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = gap / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
                A[p, q] = A[q, p] = 0.0
                V = V @ R
    else:
        raise np.linalg.LinAlgError("Jacobi iteration did not converge")
    return np.diag(A).copy(), V


@dataclass
class Mode:
    omega: float
    shape: np.ndarray
    label: ModeLabel


@dataclass
class ModeSet:
    modes: list[Mode] = field(default_factory=list)
    M: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.modes)

    def __getitem__(self, i: int) -> Mode:
        return self.modes[i]

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def shapes(self) -> np.ndarray:
        """Columns are the M-orthonormal shapes."""
        return np.column_stack([m.shape for m in self.modes])

    @property
    def labels(self) -> list[str]:
        return [m.label.value for m in self.modes]

    def to_dict(self) -> dict:
        return {
            "modes": [
                {"omega": m.omega, "frequency_hz": m.omega / (2 * math.pi), "shape": m.shape.tolist(), "label": m.label.value}
                for m in self.modes
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def normal_modes(M: np.ndarray, K: np.ndarray) -> ModeSet:
    """Solve ``K v = w^2 M v``; shapes are M-orthonormal, frequencies ascending."""
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    L = cholesky(M)
    Linv = np.linalg.inv(L)
    S = Linv @ K @ Linv.T
    S = 0.5 * (S + S.T)
    lam, W = jacobi_eigh(S)
    V = Linv.T @ W
    # rigid-body modes come out as roundoff; pin them to zero
    lam = np.where(np.abs(lam) <= 8 * np.finfo(float).eps * np.abs(lam).max(initial=0.0), 0.0, lam)
    order = np.argsort(lam, kind="stable")
    modes = []
    for j in order:
        v = V[:, j]
        v = v / math.sqrt(v @ M @ v)
        # sign convention: largest component positive
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        w = math.sqrt(max(lam[j], 0.0))
        modes.append(Mode(w, v, classify_mode(v, M)))
    return ModeSet(modes, M)


def classify_mode(v, M) -> ModeLabel:
    """Label by the dominant share of ``v^T M v`` among heave, pitch and roll."""
    v = np.asarray(v, dtype=float)
    M = np.asarray(M, dtype=float)
    e = v * (M @ v)
    total = e.sum()
    if not total > 0:
        raise ValueError("zero mode shape")
    share = e / total
    k = int(np.argmax(share))
    if share[k] <= DOMINANCE:
        return ModeLabel.MIXED
    return (ModeLabel.STOTT, ModeLabel.BOUND, ModeLabel.ROLL)[k]


# ---------------------------------------------------------------------------
# modal integration


def _sample(forcing, n: int, dt: float, dim: int) -> np.ndarray:
    if callable(forcing):
        F = np.array([forcing(i * dt) for i in range(n + 1)], dtype=float)
    else:
        F = np.asarray(forcing, dtype=float)
        if F.shape != (n + 1, dim):
            raise ValueError(f"forcing must have shape {(n + 1, dim)}")
    return F.reshape(n + 1, dim)


def modal_response(
    M,
    K,
    zeta,
    forcing,
    duration: float,
    dt: float,
    q0=None,
    qd0=None,
) -> dict:
    """Integrate each mode as an independent damped oscillator.

    ``forcing`` is a callable ``t -> F`` (3-vector) or an array sampled at
    ``dt`` with one row per sample including both ends. Returns modal
    coordinates ``eta``, velocities ``eta_dot``, per-mode ``energy`` and the
    physical coordinates ``q``; RK4 with linear interpolation of the forcing.
    """
    ms = normal_modes(M, K)
    V = ms.shapes
    w = ms.omegas
    nm = len(w)
    zeta = np.broadcast_to(np.asarray(zeta, dtype=float), (nm,))
    n = int(round(duration / dt))
    F = _sample(forcing, n, dt, V.shape[0])
    f = F @ V
    M = np.asarray(M, dtype=float)
    q0 = np.zeros(V.shape[0]) if q0 is None else np.asarray(q0, dtype=float)
    qd0 = np.zeros(V.shape[0]) if qd0 is None else np.asarray(qd0, dtype=float)
    eta = np.empty((n + 1, nm))
    etad = np.empty((n + 1, nm))
    eta[0] = V.T @ M @ q0
    etad[0] = V.T @ M @ qd0
    c = 2.0 * zeta * w
    k = w * w

    def acc(e, ed, fi):
        return fi - c * ed - k * e

    for i in range(n):
        e, ed = eta[i], etad[i]
        f0, f1 = f[i], f[i + 1]
        fm = 0.5 * (f0 + f1)
        a1 = acc(e, ed, f0)
        a2 = acc(e + 0.5 * dt * ed, ed + 0.5 * dt * a1, fm)
        a3 = acc(e + 0.5 * dt * (ed + 0.5 * dt * a1), ed + 0.5 * dt * a2, fm)
        a4 = acc(e + dt * (ed + 0.5 * dt * a2), ed + dt * a3, f1)
        eta[i + 1] = e + dt * ed + dt * dt / 6.0 * (a1 + a2 + a3)
        etad[i + 1] = ed + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    energy = 0.5 * etad**2 + 0.5 * k * eta**2
    return {
        "t": dt * np.arange(n + 1),
        "eta": eta,
        "eta_dot": etad,
        "energy": energy,
        "q": eta @ V.T,
        "modes": ms,
    }


def direct_response(M, K, C, forcing, duration: float, dt: float, q0=None, qd0=None) -> dict:
    """Full coupled integration ``M q'' + C q' + K q = F`` (reference for the modal route)."""
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    C = np.asarray(C, dtype=float)
    dim = M.shape[0]
    n = int(round(duration / dt))
    F = _sample(forcing, n, dt, dim)
    Minv = np.linalg.inv(M)
    q = np.empty((n + 1, dim))
    qd = np.empty((n + 1, dim))
    q[0] = np.zeros(dim) if q0 is None else q0
    qd[0] = np.zeros(dim) if qd0 is None else qd0

    def acc(x, v, fi):
        return Minv @ (fi - C @ v - K @ x)

    for i in range(n):
        x, v = q[i], qd[i]
        f0, f1 = F[i], F[i + 1]
        fm = 0.5 * (f0 + f1)
        a1 = acc(x, v, f0)
        a2 = acc(x + 0.5 * dt * v, v + 0.5 * dt * a1, fm)
        a3 = acc(x + 0.5 * dt * (v + 0.5 * dt * a1), v + 0.5 * dt * a2, fm)
        a4 = acc(x + dt * (v + 0.5 * dt * a2), v + dt * a3, f1)
        q[i + 1] = x + dt * v + dt * dt / 6.0 * (a1 + a2 + a3)
        qd[i + 1] = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    energy = 0.5 * np.einsum("ti,ij,tj->t", qd, M, qd) + 0.5 * np.einsum("ti,ij,tj->t", q, K, q)
    return {"t": dt * np.arange(n + 1), "q": q, "q_dot": qd, "energy": energy}
