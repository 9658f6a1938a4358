"""Tomographic measurement set and coincidence-count synthesis.

The analyzers project each photon onto one of H, V, D, A, R, L. Grouping
the six states into the three bases {H/V, D/A, R/L} per arm gives 9
analyzer settings of 4 outcomes each: 36 two-qubit projectors, an
overcomplete tomographic set. Counts are drawn per setting as independent
Poisson variables with mean flux*duration*p; optional imperfections are
Werner admixture of the source (handled upstream), slow source drift
(``drift_state``) and wave-plate setting errors on the analyzers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    KET_A,
    KET_D,
    KET_H,
    KET_L,
    KET_R,
    KET_V,
    axis_vector,
    su2_rotation,
    validate_density_matrix,
)
from .optics import hwp, qwp

__all__ = [
    "BASES",
    "ANALYZER_PLATES",
    "DEFAULT_DRIFT_SIGMA",
    "MeasurementSetting",
    "ProjectorSet",
    "CountRecord",
    "NoiseModel",
    "tomography_projectors",
    "born_probability",
    "simulate_counts",
    "drift_state",
]

_KETS = {"H": KET_H, "V": KET_V, "D": KET_D, "A": KET_A, "R": KET_R, "L": KET_L}

# Basis pairs per arm, in the canonical setting order.
BASES = (("H", "V"), ("D", "A"), ("R", "L"))

# Nominal (qwp, hwp) analyzer plate angles mapping the first basis state to
# |H> ahead of the polarizing beam splitter.
ANALYZER_PLATES = {
    ("H", "V"): (0.0, 0.0),
    ("D", "A"): (np.pi / 4, np.pi / 8),
    ("R", "L"): (0.0, -np.pi / 8),
}

# Per-qubit drift rotation std (radians), Monte Carlo calibrated so that
# consecutive drifted copies of werner(0.98267) show a fidelity std in the
# few-1e-4 range (measured 5.8e-4 at 0.025, 8.3e-4 at 0.030).
DEFAULT_DRIFT_SIGMA = 0.025


@dataclass(frozen=True)
class MeasurementSetting:
    """One analyzer configuration: a basis pair and its four projectors."""

    label: str
    basis_s: tuple[str, str]
    basis_e: tuple[str, str]
    outcome_labels: tuple[str, str, str, str]
    projectors: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ProjectorSet:
    """The 36 tomographic projectors grouped as 9 settings of 4 outcomes."""

    settings: tuple[MeasurementSetting, ...]

    @property
    def flat_projectors(self) -> np.ndarray:
        """All 36 projectors stacked as a (36, 4, 4) array in index order."""
        return np.stack([p for s in self.settings for p in s.projectors])

    @property
    def flat_labels(self) -> tuple[tuple[str, str], ...]:
        """(setting_label, outcome_label) pairs in index order."""
        return tuple(
            (s.label, out) for s in self.settings for out in s.outcome_labels
        )


def _single_projector(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


_PROJECTOR_SET: ProjectorSet | None = None


def tomography_projectors() -> ProjectorSet:
    """The canonical 36-projector set |a><a| (x) |b><b|, a,b in {H,V,D,A,R,L}."""
    global _PROJECTOR_SET
    if _PROJECTOR_SET is not None:
        return _PROJECTOR_SET
    settings = []
    for basis_s in BASES:
        for basis_e in BASES:
            outs = []
            projs = []
            for a in basis_s:
                for b in basis_e:
                    outs.append(f"{a}{b}")
                    proj = np.kron(_single_projector(_KETS[a]), _single_projector(_KETS[b]))
                    proj.setflags(write=False)
                    projs.append(proj)
            settings.append(
                MeasurementSetting(
                    label=f"{basis_s[0]}{basis_s[1]}-{basis_e[0]}{basis_e[1]}",
                    basis_s=basis_s,
                    basis_e=basis_e,
                    outcome_labels=tuple(outs),
                    projectors=tuple(projs),
                )
            )
    _PROJECTOR_SET = ProjectorSet(settings=tuple(settings))
    return _PROJECTOR_SET


def born_probability(rho: np.ndarray, proj: np.ndarray) -> float:
    """Tr(proj rho) for a rank-1 projector, clamped to [0, 1]."""
    proj = np.asarray(proj, dtype=complex)
    if proj.shape != (4, 4):
        raise ValueError("projector must be 4x4")
    if (
        np.max(np.abs(proj - proj.conj().T)) > 1e-10
        or np.max(np.abs(proj @ proj - proj)) > 1e-10
        or abs(np.trace(proj).real - 1.0) > 1e-10
    ):
        raise ValueError("operator is not a rank-1 projector within 1e-10")
    rho = validate_density_matrix(rho)
    p = float(np.real(np.trace(proj @ rho)))
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class CountRecord:
    """Coincidence counts over the 36 projectors, index-aligned with ProjectorSet."""

    counts: np.ndarray
    duration_s: float
    flux_hz: float

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (36,):
            raise ValueError("counts must have exactly 36 entries")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def setting_totals(self) -> np.ndarray:
        return self.counts.reshape(9, 4).sum(axis=1)

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class NoiseModel:
    """Imperfection knobs for the synthetic source and analyzers.

    werner_v mixes the singlet with white noise; drift_sigma is the std of
    the per-qubit random rotation angle applied by ``drift_state``;
    waveplate_error_sigma is the std of each plate-angle setting error
    (applied both to analyzer plates and, by the experiment harness, to the
    rotation stacks); poisson toggles shot noise.
    """

    werner_v: float = 1.0
    drift_sigma: float = 0.0
    waveplate_error_sigma: float = 0.0
    poisson: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.werner_v <= 1.0:
            raise ValueError("werner_v must lie in [0, 1]")
        if self.drift_sigma < 0 or self.waveplate_error_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")

    @classmethod
    def noiseless(cls, werner_v: float = 1.0) -> "NoiseModel":
        return cls(werner_v=werner_v, drift_sigma=0.0, waveplate_error_sigma=0.0, poisson=False)


def _perturbed_setting_projectors(
    setting: MeasurementSetting, sigma: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """Outcome projectors with plate-angle errors folded into each analyzer."""
    kets = {}
    for arm, basis in (("s", setting.basis_s), ("e", setting.basis_e)):
        q_nom, h_nom = ANALYZER_PLATES[basis]
        dq, dh = rng.normal(0.0, sigma, size=2)
        analyzer = hwp(h_nom + dh) @ qwp(q_nom + dq)
        # PBS ports H and V, pulled back through the analyzer.
        kets[arm] = (analyzer.conj().T @ KET_H, analyzer.conj().T @ KET_V)
    projs = []
    for ket_s in kets["s"]:
        for ket_e in kets["e"]:
            joint = np.kron(ket_s, ket_e)
            projs.append(np.outer(joint, joint.conj()))
    return projs


def simulate_counts(
    rho: np.ndarray,
    flux_hz: float,
    duration_s: float,
    noise: NoiseModel,
    rng: np.random.Generator | None = None,
) -> CountRecord:
    """Synthesize one 36-projector acquisition from a density matrix.

    Each of the 9 settings is an independent acquisition of
    flux_hz*duration_s expected pairs split over its 4 outcomes. With
    ``noise.poisson`` off, counts are rounded expectations.
    """
    if flux_hz <= 0 or duration_s <= 0:
        raise ValueError("flux and duration must be positive")
    rho = validate_density_matrix(rho)
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    pairs = flux_hz * duration_s
    counts = np.empty(36, dtype=np.int64)
    for k, setting in enumerate(tomography_projectors().settings):
        if noise.waveplate_error_sigma > 0:
            projs = _perturbed_setting_projectors(setting, noise.waveplate_error_sigma, rng)
        else:
            projs = list(setting.projectors)
        probs = np.array([np.real(np.trace(p @ rho)) for p in projs])
        if probs.min() < -1e-12:
            raise ValueError("negative outcome probability beyond tolerance")
        probs = np.clip(probs, 0.0, None)
        expected = pairs * probs
        if noise.poisson:
            counts[4 * k : 4 * k + 4] = rng.poisson(expected)
        else:
            counts[4 * k : 4 * k + 4] = np.rint(expected).astype(np.int64)
    return CountRecord(counts=counts, duration_s=float(duration_s), flux_hz=float(flux_hz))


def drift_state(
    rho: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Apply independent small random local rotations to both qubits.

    Each qubit gets a rotation about a Haar-random axis by an angle drawn
    from Normal(0, drift_sigma), modeling slow source drift between
    acquisitions.
    """
    rho = validate_density_matrix(rho)
    if noise.drift_sigma == 0.0:
        return rho
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    unitaries = []
    for _ in range(2):
        raw = rng.normal(size=3)
        axis = axis_vector(*raw)
        angle = rng.normal(0.0, noise.drift_sigma)
        unitaries.append(su2_rotation(axis, angle))
    u = np.kron(unitaries[0], unitaries[1])
    out = u @ rho @ u.conj().T
    return (out + out.conj().T) / 2
