"""Small dense complex linear algebra and two-qubit polarization states.

Everything operates on plain numpy arrays: pure states are complex vectors
of length 2 or 4 (basis order HH, HV, VH, VV for two qubits) and density
matrices are 4x4 complex Hermitian arrays. Validation helpers raise
``ValueError`` when a contract is violated; numerical tolerances follow the
conventions used throughout the package.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "KET_H",
    "KET_V",
    "KET_D",
    "KET_A",
    "KET_R",
    "KET_L",
    "singlet",
    "triplet_psi_plus",
    "projector",
    "axis_vector",
    "su2_rotation",
    "apply_local",
    "werner",
    "eig_hermitian",
    "psd_sqrt",
    "trace_distance",
    "validate_unitary",
    "validate_density_matrix",
    "validate_pure_state",
    "random_unitary",
    "random_density_matrix",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Single-qubit polarization kets: |H>=(1,0), |V>=(0,1).
KET_H = np.array([1, 0], dtype=complex)
KET_V = np.array([0, 1], dtype=complex)
KET_D = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_A = np.array([1, -1], dtype=complex) / np.sqrt(2)
KET_R = np.array([1, 1j], dtype=complex) / np.sqrt(2)
KET_L = np.array([1, -1j], dtype=complex) / np.sqrt(2)


def singlet() -> np.ndarray:
    """Two-photon singlet (|HV> - |VH>)/sqrt(2) as a length-4 vector."""
    return np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def triplet_psi_plus() -> np.ndarray:
    """The orthogonal Bell state (|HV> + |VH>)/sqrt(2)."""
    return np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


def projector(psi: np.ndarray) -> np.ndarray:
    """Rank-1 projector |psi><psi| of a normalized state vector."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def axis_vector(x: float, y: float, z: float) -> np.ndarray:
    """Unit Bloch-sphere axis from raw components.

    Raises ValueError for the zero vector; otherwise normalizes exactly.
    """
    v = np.array([x, y, z], dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("axis vector must be nonzero")
    return v / n


def _check_axis(axis: np.ndarray) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError("axis must be a 3-vector")
    if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ValueError("axis must be a unit vector (norm within 1e-12)")
    return axis


def su2_rotation(axis: np.ndarray, theta: float) -> np.ndarray:
    """Bloch rotation exp(-i*theta/2 * axis.sigma) as a 2x2 unitary.

    ``axis`` must be a unit 3-vector. The result has determinant 1.
    """
    axis = _check_axis(axis)
    ns = axis[0] * SIGMA_X + axis[1] * SIGMA_Y + axis[2] * SIGMA_Z
    return np.cos(theta / 2) * np.eye(2, dtype=complex) - 1j * np.sin(theta / 2) * ns


def validate_unitary(u: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Return ``u`` as a complex array, or raise if it is not unitary."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("unitary must be a square matrix")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev > tol:
        raise ValueError(f"matrix is not unitary (deviation {dev:.3e} > {tol:.0e})")
    return u


def validate_pure_state(psi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Check squared norm 1 within ``tol`` and dim 2 or 4."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape not in ((2,), (4,)):
        raise ValueError("pure state must have dimension 2 or 4")
    if not np.all(np.isfinite(psi.view(float))):
        raise ValueError("pure state has non-finite entries")
    if abs(np.vdot(psi, psi).real - 1.0) > tol:
        raise ValueError("pure state is not normalized")
    return psi


def validate_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Check the two-qubit density matrix invariants.

    Hermitian within 1e-10 entrywise, unit trace within 1e-10, and minimum
    eigenvalue >= -1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("density matrix must be 4x4")
    if not np.all(np.isfinite(rho.view(float))):
        raise ValueError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix is not Hermitian within 1e-10")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ValueError("density matrix trace differs from 1 by more than 1e-10")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -1e-10:
        raise ValueError("density matrix has eigenvalue below -1e-10")
    return rho


def apply_local(u_s: np.ndarray, u_e: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Conjugate a two-qubit state by local unitaries: (u_s (x) u_e) rho (.)^dag."""
    u_s = validate_unitary(u_s)
    u_e = validate_unitary(u_e)
    if u_s.shape != (2, 2) or u_e.shape != (2, 2):
        raise ValueError("local unitaries must be 2x2")
    rho = np.asarray(rho, dtype=complex)
    u = np.kron(u_s, u_e)
    out = u @ rho @ u.conj().T
    return (out + out.conj().T) / 2


def werner(v: float) -> np.ndarray:
    """Werner state v*|psi-><psi-| + (1-v)*I/4.

    Its fidelity with the singlet is (1+3v)/4 exactly.
    """
    if not 0.0 <= v <= 1.0:
        raise ValueError("Werner parameter must lie in [0, 1]")
    return v * projector(singlet()) + (1 - v) * np.eye(4, dtype=complex) / 4


def eig_hermitian(m: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvectors as columns). Raises if the
    input deviates from Hermiticity by more than ``tol`` entrywise.
    """
    m = np.asarray(m, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w, v


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Hermitian square root of a positive semidefinite matrix.

    Eigenvalues in [-1e-8, 0] are clamped to 0 (MLE outputs are PSD only
    numerically); anything below -1e-8 raises.
    """
    w, v = eig_hermitian(m)
    if w.min() < -1e-8:
        raise ValueError(f"matrix has negative eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.conj().T
    return (root + root.conj().T) / 2


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance (1/2)*||a - b||_1 between Hermitian matrices."""
    d = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2))))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix A A^dag / Tr(A A^dag)."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return m / np.trace(m).real
