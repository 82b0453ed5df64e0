"""Spectral-learning tests: bulk edges, spike counting, the eigenvalue
inversion and projection estimates, and the full learning step against the
exact-covariance oracle."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from gridspike.numerics import GaussianStream, sym_eig
from gridspike.simulate import TraceConfig, generate_trace
from gridspike.spiked import (
    SpikedEstimate,
    SubspaceError,
    count_spikes,
    estimate_noise_variance,
    estimate_omega,
    estimate_spike_mu,
    learn_subspace,
    mp_edges,
    mp_median,
    sample_covariance,
    spike_lambda,
)

from conftest import SIGMA_N, SIGMA_THETA


class TestSampleCovariance:
    def test_constant_trace_is_zero(self):
        z = np.ones((6, 10))
        assert np.allclose(sample_covariance(z), 0.0)

    def test_two_point_antisymmetric(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(8)
        z = np.column_stack([v, -v])
        # mean 0, deviations +-v, 1/(T-1) * (vv^T + vv^T)
        assert np.allclose(sample_covariance(z), 2.0 * np.outer(v, v))

    def test_pure_noise_spectrum_in_bulk(self):
        # M=200, T=400: all normalized eigenvalues inside the widened band
        edges = mp_edges(0.5)
        stream = GaussianStream(1)
        noise = SIGMA_N * stream.standard_normal((200, 400))
        eigenvalues = np.linalg.eigvalsh(sample_covariance(noise) / SIGMA_N**2)
        assert eigenvalues.max() <= edges.b_plus + 0.1
        assert eigenvalues.min() >= edges.a_minus - 0.1

    def test_needs_two_snapshots(self):
        with pytest.raises(ValueError):
            sample_covariance(np.ones((4, 1)))


class TestMpEdges:
    def test_quarter(self):
        edges = mp_edges(0.25)
        assert edges.a_minus == pytest.approx(0.25)
        assert edges.b_plus == pytest.approx(2.25)

    def test_one(self):
        edges = mp_edges(1.0)
        assert edges.a_minus == 0.0
        assert edges.b_plus == pytest.approx(4.0)

    def test_half(self):
        edges = mp_edges(0.5)
        assert edges.a_minus == pytest.approx((1 - math.sqrt(0.5)) ** 2)
        assert edges.b_plus == pytest.approx((1 + math.sqrt(0.5)) ** 2, abs=1e-12)
        assert edges.a_minus == pytest.approx(0.0857864376, abs=1e-9)
        assert edges.b_plus == pytest.approx(2.9142135624, abs=1e-9)

    def test_invalid(self):
        with pytest.raises(ValueError):
            mp_edges(0.0)


class TestCountSpikes:
    def test_all_in_bulk(self):
        eigenvalues = np.linspace(2.8, 0.1, 20)
        assert count_spikes(eigenvalues, 0.5) == 0

    def test_counts_strictly_above_edge(self):
        edge = mp_edges(0.5).b_plus
        eigenvalues = np.array([10.0, edge + 0.01, edge, edge - 0.01, 1.0])
        assert count_spikes(eigenvalues, 0.5) == 2

    def test_margin_filters_near_edge(self):
        edge = mp_edges(0.5).b_plus
        eigenvalues = np.array([10.0, edge + 0.05, 1.0])
        assert count_spikes(eigenvalues, 0.5, margin=0.0) == 2
        assert count_spikes(eigenvalues, 0.5, margin=0.1) == 1

    def test_requires_descending(self):
        with pytest.raises(ValueError, match="descending"):
            count_spikes(np.array([1.0, 2.0]), 0.5)


class TestSpikeInversion:
    def test_boundary_gives_sqrt_p(self):
        for p in (0.1, 0.5, 1.0, 2.0):
            edge = mp_edges(p).b_plus
            assert estimate_spike_mu(edge, p) == pytest.approx(math.sqrt(p), abs=1e-12)

    def test_classical_limit_p_zero(self):
        # p -> 0: mu = lambda - 1
        assert estimate_spike_mu(3.0, 1e-14) == pytest.approx(2.0, abs=1e-6)

    def test_inverts_forward_map(self):
        # lambda(mu) = 1 + mu + p(1+mu)/mu must return the input eigenvalue
        rng = np.random.default_rng(2)
        for p in (0.05, 0.5, 1.0):
            for mu in np.sqrt(p) * (1.0 + rng.uniform(0.05, 50.0, 25)):
                lam = spike_lambda(mu, p)
                assert estimate_spike_mu(lam, p) == pytest.approx(mu, abs=1e-10)

    def test_monotone_in_lambda(self):
        edge = mp_edges(0.5).b_plus
        lams = np.linspace(edge + 1e-9, edge + 50, 500)
        mus = [estimate_spike_mu(lam, 0.5) for lam in lams]
        assert np.all(np.diff(mus) > 0.0)

    def test_below_edge_rejected(self):
        with pytest.raises(ValueError, match="edge"):
            estimate_spike_mu(2.0, 0.5)


class TestOmega:
    def test_phase_transition_boundary_is_zero(self):
        for p in (0.1, 0.5, 2.0):
            assert estimate_omega(math.sqrt(p) * (1 + 1e-12), p) == pytest.approx(0.0, abs=1e-9)

    def test_p_zero_limit_is_one(self):
        for mu in (0.5, 2.0, 10.0):
            assert estimate_omega(mu, 1e-300) == pytest.approx(1.0, abs=1e-12)

    def test_direct_evaluation(self):
        # (1 - 0.5/4) / (1 + 0.25) = 0.7
        assert estimate_omega(2.0, 0.5) == pytest.approx(0.7, abs=1e-12)

    def test_increasing_in_mu_on_grid(self):
        # omega grows with the spike strength, for several aspect ratios
        for p in (0.1, 0.5, 1.0, 2.0):
            grid = np.linspace(math.sqrt(p) * (1 + 1e-9), 100.0, 2000)
            omegas = [estimate_omega(mu, p) for mu in grid]
            assert np.all(np.diff(omegas) > 0.0)
            assert 0.0 < omegas[0] < omegas[-1] < 1.0

    def test_at_or_below_threshold_rejected(self):
        with pytest.raises(ValueError, match="threshold"):
            estimate_omega(math.sqrt(0.5), 0.5)


class TestLearnSubspace:
    def test_estimate_invariants(self, h14, theta_bar14):
        cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=21)
        est = learn_subspace(generate_trace(h14, theta_bar14, cfg), sigma_n=SIGMA_N)
        assert est.s > 0
        edge = mp_edges(est.p_ratio).b_plus
        assert np.all(est.lambda_hat > edge)
        assert np.all(est.mu_hat > math.sqrt(est.p_ratio))
        # projection estimates fall with the mode index (weaker spikes are
        # estimated less accurately)
        assert np.all(np.diff(est.omega_hat) <= 1e-12)
        assert 0.0 < est.omega_hat[-1] and est.omega_hat[0] < 1.0
        gram = est.u_hat.T @ est.u_hat
        assert np.max(np.abs(gram - np.eye(est.s))) <= 1e-8

    def test_projection_matches_omega_on_average(self, h14, theta_bar14, u_true14):
        # mean |u_hat_1 . u_1|^2 over trials tracks mean omega_hat_1
        master = GaussianStream(23)
        proj, omega = [], []
        for t in range(100):
            cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=0)
            trace = generate_trace(h14, theta_bar14, cfg, stream=master.derive(t))
            est = learn_subspace(trace, sigma_n=SIGMA_N)
            proj.append(float((est.u_hat[:, 0] @ u_true14[:, 0]) ** 2))
            omega.append(float(est.omega_hat[0]))
        assert abs(np.mean(proj) - np.mean(omega)) <= 0.1

    def test_long_window_recovers_all_strong_modes(self, h14, theta_bar14, u_true14):
        cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=100 * 54, seed=29)
        est = learn_subspace(generate_trace(h14, theta_bar14, cfg), sigma_n=SIGMA_N)
        assert est.s >= 12
        for i in range(12):
            assert (est.u_hat[:, i] @ u_true14[:, i]) ** 2 > 0.9

    def test_cross_mode_orthogonality(self, h14, theta_bar14, u_true14):
        master = GaussianStream(31)
        cross = []
        for t in range(30):
            cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=0)
            est = learn_subspace(
                generate_trace(h14, theta_bar14, cfg, stream=master.derive(t)), sigma_n=SIGMA_N
            )
            overlap = (u_true14[:, : est.s].T @ est.u_hat) ** 2
            cross.append(overlap[~np.eye(est.s, dtype=bool)].mean())
        assert np.mean(cross) <= 0.05

    def test_no_signal_gives_empty_subspace(self, h14, theta_bar14):
        # at M=54 a bulk eigenvalue occasionally pokes past the asymptotic
        # edge, so "no signal" means s=0 with high probability, and the
        # safety margin cleans up the stragglers
        master = GaussianStream(37)
        counts = []
        for t in range(20):
            cfg = TraceConfig(sigma_theta=0.0, sigma_n=SIGMA_N, horizon=108, seed=0)
            trace = generate_trace(h14, theta_bar14, cfg, stream=master.derive(t))
            est = learn_subspace(trace, sigma_n=SIGMA_N, keep_full_basis=False, margin=0.0)
            counts.append(est.s)
            with_margin = learn_subspace(trace, sigma_n=SIGMA_N, margin=0.3)
            assert with_margin.s == 0
        assert np.mean([c == 0 for c in counts]) >= 0.7
        assert max(counts) <= 2

        empty = learn_subspace(trace, sigma_n=SIGMA_N, keep_full_basis=False, margin=0.3)
        assert not empty.has_subspace
        assert empty.u_hat.shape == (54, 0)
        with pytest.raises(SubspaceError, match="relearn"):
            empty.basis(3)

    def test_uniform_fluctuations_learn_equally_well(self, h14, theta_bar14, u_true14):
        # bounded-fourth-moment robustness: uniform law, same second moments
        cfg = TraceConfig(
            sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=41, distribution="uniform"
        )
        est = learn_subspace(generate_trace(h14, theta_bar14, cfg), sigma_n=SIGMA_N)
        assert est.s >= 6
        assert (est.u_hat[:, 0] @ u_true14[:, 0]) ** 2 > 0.9

    def test_serialization_round_trip(self, h14, theta_bar14):
        cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=43)
        est = learn_subspace(generate_trace(h14, theta_bar14, cfg), sigma_n=SIGMA_N)
        again = SpikedEstimate.from_json(est.to_json())
        assert again.s == est.s
        assert np.allclose(again.u_hat, est.u_hat)
        assert np.allclose(again.omega_hat, est.omega_hat)
        assert np.allclose(again.u_full, est.u_full)
        doc = json.loads(est.to_json(include_full_basis=False))
        assert "u_full" not in doc


class TestNoiseFloorEstimation:
    def test_mp_median_sanity(self):
        # p -> 0 concentrates at 1
        assert mp_median(0.001) == pytest.approx(1.0, abs=0.01)
        med = mp_median(0.5)
        edges = mp_edges(0.5)
        assert edges.a_minus < med < edges.b_plus
        assert med < 1.0  # MP law is right-skewed

    def test_estimates_noise_from_bulk(self, h14, theta_bar14):
        cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=47)
        trace = generate_trace(h14, theta_bar14, cfg)
        eigenvalues = sym_eig(sample_covariance(trace)).eigenvalues
        estimated = estimate_noise_variance(eigenvalues, 0.5)
        # biased up by the spikes in the upper half, but in the right range
        assert SIGMA_N**2 * 0.8 <= estimated <= SIGMA_N**2 * 2.0

    def test_learn_without_noise_floor(self, h14, theta_bar14, u_true14):
        cfg = TraceConfig(sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N, horizon=108, seed=53)
        est = learn_subspace(generate_trace(h14, theta_bar14, cfg), sigma_n=None)
        assert est.s >= 5
        assert (est.u_hat[:, 0] @ u_true14[:, 0]) ** 2 > 0.9
