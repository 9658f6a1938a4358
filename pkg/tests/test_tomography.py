"""Tests for linear inversion and iterative maximum-likelihood reconstruction."""

import numpy as np
import pytest

from envarsim import linalg
from envarsim.measurement import (
    CountRecord,
    NoiseModel,
    simulate_counts,
    tomography_projectors,
)
from envarsim.metrics import fidelity
from envarsim.tomography import linear_inversion, mle_reconstruct


def _noiseless_counts(rho, pairs_per_setting=1e6):
    return simulate_counts(rho, pairs_per_setting, 1.0, NoiseModel.noiseless())


class TestLinearInversion:
    def test_exact_singlet_frequencies(self):
        rho = linalg.projector(linalg.singlet())
        est = linear_inversion(_noiseless_counts(rho), tomography_projectors())
        np.testing.assert_allclose(est, rho, atol=1e-8)

    def test_uniform_counts_give_maximally_mixed(self):
        rec = CountRecord(counts=np.full(36, 1000), duration_s=1.0, flux_hz=36000.0)
        est = linear_inversion(rec, tomography_projectors())
        np.testing.assert_allclose(est, np.eye(4) / 4, atol=1e-8)

    def test_scale_invariance(self):
        rho = linalg.werner(0.7)
        rec = _noiseless_counts(rho)
        scaled = CountRecord(counts=rec.counts * 7, duration_s=rec.duration_s, flux_hz=rec.flux_hz)
        a = linear_inversion(rec, tomography_projectors())
        b = linear_inversion(scaled, tomography_projectors())
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_rejects_empty_setting(self):
        counts = np.full(36, 10)
        counts[:4] = 0
        rec = CountRecord(counts=counts, duration_s=1.0, flux_hz=100.0)
        with pytest.raises(ValueError):
            linear_inversion(rec, tomography_projectors())


class TestMleReconstruct:
    def test_noiseless_singlet(self):
        rho = linalg.projector(linalg.singlet())
        res = mle_reconstruct(_noiseless_counts(rho), tomography_projectors())
        assert fidelity(res.rho, rho) >= 0.9999

    def test_uniform_counts_fixed_point(self):
        rec = CountRecord(counts=np.full(36, 5000), duration_s=1.0, flux_hz=180000.0)
        res = mle_reconstruct(rec, tomography_projectors())
        np.testing.assert_allclose(res.rho, np.eye(4) / 4, atol=1e-6)
        assert res.converged

    def test_log_likelihood_monotone(self):
        rng = np.random.default_rng(2)
        noise = NoiseModel(werner_v=0.98267, poisson=True)
        for _ in range(5):
            counts = simulate_counts(linalg.werner(0.98267), 5400.0, 5.0, noise, rng)
            res = mle_reconstruct(counts, tomography_projectors())
            ll = np.array(res.log_likelihood_history)
            slack = 1e-12 * (1 + np.abs(ll[:-1]))
            assert np.all(np.diff(ll) >= -slack)

    def test_result_is_physical(self):
        rng = np.random.default_rng(3)
        counts = simulate_counts(linalg.werner(0.9), 5400.0, 5.0, NoiseModel(werner_v=0.9), rng)
        res = mle_reconstruct(counts, tomography_projectors())
        assert abs(np.trace(res.rho).real - 1.0) < 1e-10
        assert np.linalg.eigvalsh(res.rho).min() >= -1e-10
        assert np.isfinite(res.log_likelihood)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        counts = simulate_counts(linalg.werner(0.95), 5400.0, 5.0, NoiseModel(werner_v=0.95), rng)
        projs = tomography_projectors()
        base = mle_reconstruct(counts, projs).rho

        perm = np.random.default_rng(0).permutation(9)
        blocks = counts.counts.reshape(9, 4)[perm].reshape(36)
        rec_p = CountRecord(counts=blocks, duration_s=counts.duration_s, flux_hz=counts.flux_hz)
        from envarsim.measurement import ProjectorSet

        projs_p = ProjectorSet(settings=tuple(projs.settings[i] for i in perm))
        permuted = mle_reconstruct(rec_p, projs_p).rho
        np.testing.assert_allclose(permuted, base, atol=1e-10)

    def test_poisson_reconstruction_quality(self):
        # lighter companion of the acceptance-gate Monte Carlo
        base = linalg.werner(0.98267)
        noise = NoiseModel(werner_v=0.98267, poisson=True)
        fids = []
        for seed in range(8):
            rng = np.random.default_rng(seed)
            counts = simulate_counts(base, 5400.0, 5.0, noise, rng)
            fids.append(fidelity(mle_reconstruct(counts, tomography_projectors()).rho, base))
        assert np.median(fids) >= 0.995

    def test_error_decreases_with_flux(self):
        base = linalg.werner(0.98267)
        noise = NoiseModel(werner_v=0.98267, poisson=True)
        medians = []
        for pairs in (1e4, 1e5, 1e6):
            errs = []
            for seed in range(8):
                rng = np.random.default_rng(seed)
                counts = simulate_counts(base, pairs, 1.0, noise, rng)
                errs.append(1 - fidelity(mle_reconstruct(counts, tomography_projectors()).rho, base))
            medians.append(np.median(errs))
        assert medians[0] > medians[1] > medians[2]

    def test_rejects_bad_arguments(self):
        rec = CountRecord(counts=np.full(36, 10), duration_s=1.0, flux_hz=100.0)
        with pytest.raises(ValueError):
            mle_reconstruct(rec, tomography_projectors(), max_iter=0)
        with pytest.raises(ValueError):
            mle_reconstruct(rec, tomography_projectors(), tol=0.0)
