"""Desk-scale simulator and analysis toolkit for envariance tests.

The package synthesizes two-photon polarization count data through the
three-stage protocol (source, rotation on one photon, identical rotation
on both), reconstructs states by maximum-likelihood tomography, scores
envariance with fidelity and the Bhattacharyya coefficient, and fits the
power-law generalization of the Born rule to correlation data.
"""

from .errors import ConvergenceError, MissingDataError
from .harness import (
    AxisSummary,
    CellMetrics,
    EnvarianceReport,
    ExperimentPlan,
    StageResult,
    calibrated_noise,
    run_experiment,
    run_three_stages,
    source_stability,
    theoretical_stage3,
)
from .linalg import (
    apply_local,
    axis_vector,
    eig_hermitian,
    psd_sqrt,
    singlet,
    su2_rotation,
    werner,
)
from .measurement import (
    CountRecord,
    NoiseModel,
    ProjectorSet,
    born_probability,
    drift_state,
    simulate_counts,
    tomography_projectors,
)
from .metrics import bhattacharyya, fidelity, normalize_counts
from .optics import (
    WavePlateSetting,
    decompose_rotation,
    hwp,
    phase_distance,
    qwp,
    rotation_setting,
    stack,
)
from .son import (
    CorrelationCurve,
    CorrelationSample,
    SonFitResult,
    e_qm,
    extract_correlation,
    phi_to_theta,
    solve_son,
    son_fit,
)
from .tomography import TomographyResult, linear_inversion, mle_reconstruct

__version__ = "0.1.0"
