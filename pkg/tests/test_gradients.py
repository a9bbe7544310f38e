"""Finite-difference validation of every analytic phase gradient."""

import numpy as np
import pytest

from ris_urllc import channel as ch
from ris_urllc import estimation as est
from ris_urllc.channel import ChannelStatistics, PilotSetup
from ris_urllc.gradients import GradientWorkspace, finite_difference, u_g
from ris_urllc.sinr import build_breakdown, sinr_vector

from conftest import random_stats, random_unit_diag_hermitian

FD_STEP = 1e-6
FD_RTOL = 1e-5


def rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    scale = np.linalg.norm(fd)
    if scale == 0.0:
        return float(np.linalg.norm(analytic))
    return float(np.linalg.norm(analytic - fd) / scale)


def make_instance(seed: int, m: int = 6, n: int = 4, k: int = 3):
    rng = np.random.default_rng(seed)
    stats = random_stats(m, n, k, rng)
    pilot = PilotSetup(tau=k, power=0.5, noise_power=0.05)
    theta = rng.uniform(0, 2 * np.pi, n)
    return stats, pilot, theta, rng


def breakdown_at(stats, pilot, theta):
    return build_breakdown(stats, est.build_estimator_states(stats, theta, pilot), pilot)


def identity_instance(m=6, n=4, k=2):
    eye_m = ch.identity_correlation(m)
    eye_n = ch.identity_correlation(n)
    stats = ChannelStatistics(
        c_bs=eye_m,
        c_ris_rx=eye_n,
        c_ris_user=[eye_n] * k,
        beta_br=1.0,
        beta_ru=np.ones(k),
    )
    return stats, PilotSetup(tau=k, power=0.5, noise_power=0.05)


class TestTracePrimitive:
    def test_identity_pair_has_zero_gradient(self):
        b = ch.unit_phasor(np.array([0.3, 1.1, 2.0]))
        assert np.allclose(u_g(np.eye(3), np.eye(3), b), 0.0, atol=1e-14)

    def test_scalar_surface_has_zero_gradient(self):
        b = ch.unit_phasor(np.array([0.7]))
        a = np.array([[1.3]])
        m = np.array([[0.4]])
        assert u_g(a, m, b) == pytest.approx(0.0, abs=1e-15)

    def test_matches_finite_differences(self, rng):
        n = 4
        a = random_unit_diag_hermitian(n, rng)
        bmat = random_unit_diag_hermitian(n, rng)
        theta = rng.uniform(0, 2 * np.pi, n)

        def scalar(th):
            phi = np.diag(ch.unit_phasor(th))
            return float(np.trace(a @ phi @ bmat @ phi.conj().T).real)

        analytic = u_g(a, bmat, ch.unit_phasor(theta))
        assert rel_err(analytic, finite_difference(scalar, theta, FD_STEP)) <= FD_RTOL

    def test_rejects_mismatched_shapes(self):
        with pytest.raises(ValueError):
            u_g(np.eye(3), np.eye(4), ch.unit_phasor(np.zeros(3)))


class TestFilterTraceGradient:
    def test_identity_receive_correlation_freezes_filter(self, rng):
        # C^R = I makes Tr(Z) constant, so z_g vanishes identically.
        n, m, k = 4, 6, 2
        stats = ChannelStatistics(
            c_bs=ch.CorrelationMatrix(kind="generic", mat=random_unit_diag_hermitian(m, rng)),
            c_ris_rx=ch.identity_correlation(n),
            c_ris_user=[
                ch.CorrelationMatrix(kind="generic", mat=random_unit_diag_hermitian(n, rng))
                for _ in range(k)
            ],
            beta_br=1.0,
            beta_ru=np.ones(k),
        )
        ws = GradientWorkspace(stats, PilotSetup(2, 0.5, 0.05), rng.uniform(0, 2 * np.pi, n))
        x = random_unit_diag_hermitian(m, rng)
        assert np.allclose(ws.z_g(x, 0), 0.0, atol=1e-12)

    def test_matches_finite_differences(self):
        stats, pilot, theta, rng = make_instance(11)
        x = random_unit_diag_hermitian(6, rng)
        ws = GradientWorkspace(stats, pilot, theta)

        def scalar(th):
            st = est.build_estimator_states(stats, th, pilot)[1]
            return float(np.trace(x @ st.r_filter).real)

        assert rel_err(ws.z_g(x, 1), finite_difference(scalar, theta, FD_STEP)) <= FD_RTOL


class TestLemma4Gradients:
    def test_identity_correlations_freeze_everything(self, rng):
        stats, pilot = identity_instance()
        ws = GradientWorkspace(stats, pilot, rng.uniform(0, 2 * np.pi, 4))
        for vec in ws.lemma4_gradients(0):
            assert np.allclose(vec, 0.0, atol=1e-12)

    @pytest.mark.parametrize("seed", [21, 22])
    def test_matches_finite_differences(self, seed):
        stats, pilot, theta, _ = make_instance(seed, k=2)
        ws = GradientWorkspace(stats, pilot, theta)
        cb = stats.c_bs.mat

        def signal_sq(th):
            return float(breakdown_at(stats, pilot, th).signal[0])

        def trzz(th):
            z, _ = est.compute_z(th, stats.c_ris_user[0], stats.c_ris_rx)
            return float(np.trace(z @ z).real)

        def cbrhcbr(th):
            st = est.build_estimator_states(stats, th, pilot)[0]
            return float(np.trace(cb @ st.r_filter.conj().T @ cb @ st.r_filter).real)

        def cbrrh(th):
            st = est.build_estimator_states(stats, th, pilot)[1]
            return float(np.trace(cb @ st.r_filter @ st.r_filter.conj().T).real)

        g_sig, g_zz, g_quad, g_sq = ws.lemma4_gradients(0)
        g_sq = ws.grad_tr_cbrrh(1)
        assert rel_err(g_sig, finite_difference(signal_sq, theta, FD_STEP)) <= FD_RTOL
        assert rel_err(g_zz, finite_difference(trzz, theta, FD_STEP)) <= FD_RTOL
        assert rel_err(g_quad, finite_difference(cbrhcbr, theta, FD_STEP)) <= FD_RTOL
        assert rel_err(g_sq, finite_difference(cbrrh, theta, FD_STEP)) <= FD_RTOL

    def test_periodicity(self):
        stats, pilot, theta, _ = make_instance(30, k=2)
        a = GradientWorkspace(stats, pilot, theta)
        b = GradientWorkspace(stats, pilot, theta + 2 * np.pi)
        for va, vb in zip(a.lemma4_gradients(0), b.lemma4_gradients(0)):
            assert np.allclose(va, vb, rtol=1e-9, atol=1e-12)


class TestCompositeGradients:
    @pytest.mark.parametrize("seed", [40, 41])
    def test_leakage_matches_finite_differences(self, seed):
        stats, pilot, theta, _ = make_instance(seed)
        ws = GradientWorkspace(stats, pilot, theta)

        def scalar(th):
            return float(breakdown_at(stats, pilot, th).leakage_coeff[0])

        assert rel_err(ws.grad_leakage(0), finite_difference(scalar, theta, FD_STEP)) <= FD_RTOL

    @pytest.mark.parametrize("pair", [(0, 1), (1, 0), (2, 1), (1, 1)])
    def test_interference_matches_finite_differences(self, pair):
        stats, pilot, theta, _ = make_instance(43)
        ws = GradientWorkspace(stats, pilot, theta)
        k, kp = pair

        def scalar(th):
            return float(breakdown_at(stats, pilot, th).interference[k, kp])

        assert rel_err(
            ws.grad_interference(k, kp), finite_difference(scalar, theta, FD_STEP)
        ) <= FD_RTOL

    def test_symmetric_pair_sum(self):
        stats, pilot, theta, _ = make_instance(44)
        ws = GradientWorkspace(stats, pilot, theta)

        def pair_sum(th):
            bd = breakdown_at(stats, pilot, th)
            return float(bd.interference[0, 1] + bd.interference[1, 0])

        analytic = ws.grad_interference(0, 1) + ws.grad_interference(1, 0)
        assert rel_err(analytic, finite_difference(pair_sum, theta, FD_STEP)) <= FD_RTOL

    def test_vanishing_gain_kills_gradients(self, rng):
        stats0 = random_stats(6, 4, 2, rng)
        stats = ChannelStatistics(
            c_bs=stats0.c_bs,
            c_ris_rx=stats0.c_ris_rx,
            c_ris_user=stats0.c_ris_user,
            beta_br=stats0.beta_br,
            beta_ru=np.array([1e-30, 1.0]),
        )
        ws = GradientWorkspace(stats, PilotSetup(2, 0.5, 0.05), rng.uniform(0, 2 * np.pi, 4))
        assert np.max(np.abs(ws.grad_leakage(0))) <= 1e-40
        assert np.max(np.abs(ws.grad_interference(0, 1))) <= 1e-20


class TestWsrGradient:
    def test_alpha_zero_reduces_to_shannon_gradient(self):
        stats, pilot, theta, rng = make_instance(50)
        p = rng.uniform(0.2, 1.0, 3)
        weights = rng.uniform(0.2, 1.0, 3)
        ws = GradientWorkspace(stats, pilot, theta)
        eta = 0.025
        analytic = ws.grad_wsr(p, weights, np.zeros(3), eta)
        gamma = ws.sinr(p)
        shannon = (weights * (1 - eta) / np.log(2) / (1 + gamma)) @ ws.grad_sinr(p)
        assert np.allclose(analytic, shannon, rtol=1e-12)

    def test_identity_correlations_give_zero_gradient(self, rng):
        stats, pilot = identity_instance(k=3)
        ws = GradientWorkspace(stats, pilot, rng.uniform(0, 2 * np.pi, 4))
        grad = ws.grad_wsr(np.full(3, 0.3), np.full(3, 0.5), np.full(3, 0.37), 0.025)
        assert np.allclose(grad, 0.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(60, 80))
    def test_matches_finite_differences_on_twenty_instances(self, seed):
        stats, pilot, theta, rng = make_instance(seed)
        p = rng.uniform(0.2, 1.0, 3)
        weights = rng.uniform(0.2, 1.0, 3)
        alphas = np.full(3, 0.372)
        eta = 0.025
        ws = GradientWorkspace(stats, pilot, theta)

        def scalar(th):
            return GradientWorkspace(stats, pilot, th).weighted_sum_rate(p, weights, alphas, eta)

        analytic = ws.grad_wsr(p, weights, alphas, eta)
        assert rel_err(analytic, finite_difference(scalar, theta, FD_STEP)) <= FD_RTOL

    def test_small_ascent_step_never_decreases_objective(self):
        for seed in range(90, 95):
            stats, pilot, theta, rng = make_instance(seed)
            p = rng.uniform(0.2, 1.0, 3)
            weights = rng.uniform(0.2, 1.0, 3)
            alphas = np.full(3, 0.372)
            ws = GradientWorkspace(stats, pilot, theta)
            grad = ws.grad_wsr(p, weights, alphas, 0.025)
            before = ws.weighted_sum_rate(p, weights, alphas, 0.025)
            stepped = GradientWorkspace(stats, pilot, theta + 1e-6 * grad)
            after = stepped.weighted_sum_rate(p, weights, alphas, 0.025)
            assert after >= before - 1e-12
