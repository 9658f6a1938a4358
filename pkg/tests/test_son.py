"""Tests for the generalized-correlation solver and the exponent fit."""

import math

import numpy as np
import pytest

from envarsim import linalg
from envarsim.measurement import CountRecord, NoiseModel, simulate_counts
from envarsim.optics import STACK_ROTATION_SIGN, named_axis_vector
from envarsim.son import (
    COMBOS,
    CorrelationSample,
    e_qm,
    extract_correlation,
    phi_to_theta,
    solve_son,
    son_fit,
)

PHI_GRID = np.deg2rad(np.arange(0, 181, 15))


def _stage2_counts(combo, phi, base, noise, rng):
    axis_tag = combo.split("-")[0].lower()
    u = linalg.su2_rotation(named_axis_vector(axis_tag), STACK_ROTATION_SIGN * 2 * phi)
    rho = linalg.apply_local(u, np.eye(2), base)
    return simulate_counts(rho, 5400.0, 5.0, noise, rng)


class TestEQm:
    def test_boundary_values(self):
        assert e_qm(0.0) == pytest.approx(-1.0, abs=1e-15)
        assert e_qm(np.pi / 4) == pytest.approx(0.0, abs=1e-15)
        assert e_qm(np.pi / 2) == pytest.approx(1.0, abs=1e-15)


class TestSolveSon:
    def test_n2_reproduces_quantum_mechanics(self):
        curve = solve_son(2.0, 256)
        assert np.max(np.abs(curve.values - (-np.cos(2 * curve.theta_grid)))) < 1e-6

    def test_n1_closed_form(self):
        # p' and q' are constant for n=1, so E is linear: E = 4*theta/pi - 1
        curve = solve_son(1.0, 257)
        expected = 4 * curve.theta_grid / np.pi - 1
        assert np.max(np.abs(curve.values - expected)) < 1e-6
        assert curve.c == pytest.approx(2 * (2 / np.pi) ** 2, abs=1e-10)

    @pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 5.0, 10.0])
    def test_boundary_conditions(self, n):
        curve = solve_son(n, 257)
        assert abs(curve.values[0] + 1.0) <= 1e-8
        assert abs(curve.values[-1] - 1.0) <= 1e-8

    @pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 5.0, 10.0])
    def test_normalization_constraint(self, n):
        curve = solve_son(n, 257)
        assert np.max(np.abs(curve.p**n + curve.q**n - 1.0)) <= 1e-8

    @pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 5.0, 10.0])
    def test_derivative_constraint_constant(self, n):
        # 4th-order finite differences on solver output, away from the
        # endpoints where higher derivatives blow up for fractional n
        curve = solve_son(n, 1025)
        h = curve.theta_grid[1] - curve.theta_grid[0]

        def deriv(arr):
            return (-arr[4:] + 8 * arr[3:-1] - 8 * arr[1:-3] + arr[:-4]) / (12 * h)

        dp = deriv(curve.p)
        dq = deriv(curve.q)
        s = dp**2 + dq**2
        weight = np.minimum(curve.p**n, curve.q**n)[2:-2]
        interior = s[weight >= 0.02]
        assert interior.size > 50
        assert (interior.max() - interior.min()) / interior.mean() <= 1e-6

    @pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 5.0, 10.0])
    def test_monotone_and_bounded(self, n):
        curve = solve_son(n, 257)
        assert np.all(np.abs(curve.values) <= 1.0)
        assert np.all(np.diff(curve.values) >= -1e-12)

    def test_qualitative_ordering_across_n(self):
        # every curve crosses zero at pi/4 (theta -> pi/2 - theta symmetry);
        # n=1 is shallower than quantum mechanics before the crossing, n=10
        # hugs -1 longer and then rises much more steeply toward +1
        curve1 = solve_son(1.0, 257)
        curve10 = solve_son(10.0, 257)
        for theta in np.linspace(0.05, np.pi / 4 - 0.05, 9):
            assert abs(curve1.value_at(theta)) <= abs(e_qm(theta)) + 1e-9
        assert abs(curve10.value_at(np.pi / 4)) < 1e-6
        assert curve10.value_at(np.pi / 8) < e_qm(np.pi / 8)
        assert curve10.value_at(1.0) > e_qm(1.0)
        delta = 0.02
        slope10 = (curve10.value_at(np.pi / 4 + delta) - curve10.value_at(np.pi / 4 - delta)) / (2 * delta)
        assert slope10 > 2.0  # quantum-mechanics slope at the crossing is 2

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            solve_son(0.0)
        with pytest.raises(ValueError):
            solve_son(2.0, grid_size=8)


class TestPhiToTheta:
    def test_reference_points(self):
        assert phi_to_theta(0.0) == pytest.approx(0.0, abs=1e-15)
        assert phi_to_theta(np.pi / 2) == pytest.approx(np.pi / 2, abs=1e-15)
        assert phi_to_theta(np.pi) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_about_pi(self):
        for x in np.linspace(0, np.pi, 25):
            assert phi_to_theta(np.pi + x) == pytest.approx(phi_to_theta(np.pi - x), abs=1e-12)

    def test_two_pi_periodic(self):
        for phi in np.linspace(0, 2 * np.pi, 41):
            assert phi_to_theta(phi + 2 * np.pi) == pytest.approx(phi_to_theta(phi), abs=1e-12)


class TestExtractCorrelation:
    def test_singlet_aligned_bases_anticorrelated(self):
        base = linalg.projector(linalg.singlet())
        counts = _stage2_counts("Z-DA", 0.0, base, NoiseModel.noiseless(), None)
        sample = extract_correlation(counts, "Z-DA", 0.0)
        assert sample.value == pytest.approx(-1.0, abs=1e-12)

    def test_singlet_quarter_turn_correlated(self):
        base = linalg.projector(linalg.singlet())
        counts = _stage2_counts("Z-DA", np.pi / 2, base, NoiseModel.noiseless(), None)
        sample = extract_correlation(counts, "Z-DA", np.pi / 2)
        assert sample.value == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_counts_give_zero(self):
        counts = CountRecord(counts=np.full(36, 250), duration_s=1.0, flux_hz=9000.0)
        sample = extract_correlation(counts, "Y-HV", 0.3)
        assert sample.value == pytest.approx(0.0, abs=1e-15)
        # uniform block (a,a,a,a): sigma = 1/(2*sqrt(a))
        assert sample.sigma == pytest.approx(1 / (2 * math.sqrt(250)), abs=1e-12)

    def test_poisson_sigma_formula(self):
        counts = np.full(36, 1, dtype=np.int64)
        counts[0:4] = (100, 50, 25, 25)  # HV-HV block
        rec = CountRecord(counts=counts, duration_s=1.0, flux_hz=1.0)
        sample = extract_correlation(rec, "Y-HV", 0.1)
        assert sample.value == pytest.approx(0.25, abs=1e-15)
        assert sample.sigma == pytest.approx(2 * math.sqrt(125 * 75 / 200**3), abs=1e-15)

    def test_zero_total_rejected(self):
        counts = np.full(36, 5, dtype=np.int64)
        counts[0:4] = 0
        rec = CountRecord(counts=counts, duration_s=1.0, flux_hz=1.0)
        with pytest.raises(ValueError):
            extract_correlation(rec, "Y-HV", 0.0)

    def test_unknown_combo_rejected(self):
        rec = CountRecord(counts=np.full(36, 5), duration_s=1.0, flux_hz=1.0)
        with pytest.raises(ValueError):
            extract_correlation(rec, "Z-HV", 0.0)


class TestSonFit:
    def test_exact_singlet_recovers_two(self):
        samples = [
            CorrelationSample(combo=combo, phi=float(phi), value=float(-np.cos(2 * phi)), sigma=0.01)
            for combo in COMBOS
            for phi in PHI_GRID
        ]
        result = son_fit(samples)
        assert result.n == pytest.approx(2.0, abs=1e-3)
        assert result.objective < 1e-2
        assert len(result.per_combo_n) == 6

    def test_werner_poisson_recovers_two(self):
        base = linalg.werner(0.98)
        noise = NoiseModel(werner_v=0.98, poisson=True)
        rng = np.random.default_rng(77)
        samples = [
            extract_correlation(_stage2_counts(combo, float(phi), base, noise, rng), combo, float(phi))
            for combo in ("Z-DA", "X-HV")
            for phi in PHI_GRID
        ]
        result = son_fit(samples)
        assert result.n == pytest.approx(2.0, abs=0.03)

    def test_estimator_bias_below_uncertainty(self):
        # n = 2 generative model, 20 Monte Carlo replicates
        base = linalg.werner(0.98267)
        noise = NoiseModel(werner_v=0.98267, poisson=True)
        combos = ("Z-DA", "Y-HV", "X-RL")
        rng = np.random.default_rng(2026)
        estimates, uncertainties = [], []
        for _ in range(20):
            samples = [
                extract_correlation(
                    _stage2_counts(combo, float(phi), base, noise, rng), combo, float(phi)
                )
                for combo in combos
                for phi in PHI_GRID
            ]
            result = son_fit(samples)
            estimates.append(result.n)
            uncertainties.append(result.n_uncertainty)
        bias = abs(np.mean(estimates) - 2.0)
        assert bias < np.mean(uncertainties)

    def test_too_few_samples_rejected(self):
        samples = [
            CorrelationSample(combo="Z-DA", phi=float(phi), value=0.0, sigma=0.1)
            for phi in PHI_GRID[:4]
        ]
        with pytest.raises(ValueError):
            son_fit(samples)
