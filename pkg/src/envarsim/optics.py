"""Jones calculus for wave plates and the QWP-HWP-QWP rotation gadget.

Conventions: qwp(t) = R(t) diag(1, i) R(-t) and hwp(t) = R(t) diag(1, -1)
R(-t) with R the real 2D rotation by the plate angle t (fast axis measured
from horizontal). Global phases are ignored throughout; wave-plate angles
are period pi and stored canonicalized to [0, pi).

A stack of three plates realizes an arbitrary polarization rotation. For
rotations about the x, y and z Bloch axes the plate angles have closed
forms (``rotation_setting``); for any other target the angles are found
numerically (``decompose_rotation``). The closed-form settings realize
``su2_rotation(axis, STACK_ROTATION_SIGN * theta)`` up to global phase,
with one uniform sign for all axes and angles (asserted by the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError
from .linalg import axis_vector, validate_unitary

__all__ = [
    "STACK_ROTATION_SIGN",
    "NAMED_AXES",
    "WavePlateSetting",
    "named_axis_vector",
    "qwp",
    "hwp",
    "stack",
    "rotation_setting",
    "decompose_rotation",
    "phase_distance",
    "ConvergenceError",
]

# Bloch rotation sense realized by stack(rotation_setting(axis, theta))
# relative to su2_rotation's exp(-i*theta/2 n.sigma) convention.
STACK_ROTATION_SIGN = -1.0

NAMED_AXES = ("x", "y", "z", "m")

_AXIS_VECTORS = {
    "x": axis_vector(1, 0, 0),
    "y": axis_vector(0, 1, 0),
    "z": axis_vector(0, 0, 1),
    "m": axis_vector(1, 1, 1),
}


def named_axis_vector(tag: str) -> np.ndarray:
    """Unit vector for an axis tag in {x, y, z, m}; m = (x+y+z)/sqrt(3)."""
    try:
        return _AXIS_VECTORS[tag]
    except KeyError:
        raise ValueError(f"unknown axis tag {tag!r}; expected one of {NAMED_AXES}") from None


@dataclass(frozen=True)
class WavePlateSetting:
    """Plate angles (radians) for the QWP-HWP-QWP stack, in traversal order.

    ``alpha`` is the first quarter-wave plate the photon meets, ``beta`` the
    half-wave plate, ``gamma`` the final quarter-wave plate. Angles are
    canonicalized to [0, pi), which leaves every Jones matrix unchanged.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, float(value) % np.pi)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


def _rot2(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]], dtype=complex)


def qwp(angle: float) -> np.ndarray:
    """Jones matrix of a quarter-wave plate with fast axis at ``angle``."""
    r = _rot2(angle)
    return r @ np.diag([1.0, 1.0j]) @ r.conj().T


def hwp(angle: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at ``angle``."""
    c2, s2 = np.cos(2 * angle), np.sin(2 * angle)
    return np.array([[c2, s2], [s2, -c2]], dtype=complex)


def stack(setting: WavePlateSetting) -> np.ndarray:
    """Composite unitary of the three-plate stack, alpha-plate first."""
    return qwp(setting.gamma) @ hwp(setting.beta) @ qwp(setting.alpha)


def rotation_setting(axis: str, theta: float) -> WavePlateSetting:
    """Closed-form plate angles realizing a rotation by ``theta`` about x, y or z.

    The m axis has no closed form; use ``decompose_rotation`` for it.
    """
    if axis == "x":
        return WavePlateSetting(np.pi / 2, -theta / 4, np.pi / 2)
    if axis == "y":
        return WavePlateSetting(np.pi / 2 + theta / 2, theta / 4, np.pi / 2)
    if axis == "z":
        return WavePlateSetting(np.pi / 4, -np.pi / 4 - theta / 4, np.pi / 4)
    raise ValueError(f"no closed-form setting for axis {axis!r}; use decompose_rotation")


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Global-phase-invariant distance sqrt(1 - |Tr(u^dag v)|/2) for 2x2 unitaries.

    Computed through the traceless part of w = u^dag v, which avoids the
    sqrt(eps) floor of the naive subtraction: for unitary w with trace 2t,
    1 - |t|^2 = ||w - t I||_F^2 / 2.
    """
    w = np.asarray(u, dtype=complex).conj().T @ np.asarray(v, dtype=complex)
    t = np.trace(w) / 2
    resid = np.linalg.norm(w - t * np.eye(2))
    return float(resid / np.sqrt(2 * (1 + min(abs(t), 1.0))))


def decompose_rotation(
    target: np.ndarray,
    tol: float = 1e-8,
    restarts: int = 20,
    max_iter: int = 5000,
    seed: int = 7,
) -> WavePlateSetting:
    """Find plate angles whose stack equals ``target`` up to global phase.

    Runs Nelder-Mead on the squared phase-invariant distance from a
    deterministic sequence of random starts, stopping at the first setting
    with distance <= ``tol``. Raises ConvergenceError if no restart reaches
    the tolerance (any 2x2 unitary is reachable, so this indicates a
    numerically pathological target).
    """
    target = validate_unitary(np.asarray(target, dtype=complex), tol=1e-10)
    if target.shape != (2, 2):
        raise ValueError("target must be a 2x2 unitary")

    def objective(angles: np.ndarray) -> float:
        u = qwp(angles[2]) @ hwp(angles[1]) @ qwp(angles[0])
        return phase_distance(u, target) ** 2

    rng = np.random.default_rng(seed)
    best: np.ndarray | None = None
    best_val = np.inf
    for trial in range(restarts):
        x0 = np.zeros(3) if trial == 0 else rng.uniform(0.0, np.pi, size=3)
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": max_iter,
                "xatol": 1e-12,
                "fatol": 1e-20,
            },
        )
        if res.fun < best_val:
            best_val = res.fun
            best = res.x
        if best_val <= tol**2:
            break
    if best is None or best_val > tol**2:
        raise ConvergenceError(
            f"wave-plate decomposition stalled at distance {np.sqrt(best_val):.3e} "
            f"after {restarts} restarts"
        )
    return WavePlateSetting(*best)
