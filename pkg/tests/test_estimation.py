"""Tests for the LMMSE estimator and its normalized MSE."""

import numpy as np
import pytest

from ris_urllc import channel as ch
from ris_urllc import estimation as est
from ris_urllc.channel import ChannelStatistics, CorrelationMatrix, PilotSetup
from ris_urllc.fbl import BlocklengthBudget

from conftest import REFERENCE_NOISE_W, reference_pilot, reference_stats


def identity_stats(m: int, n: int, k: int, beta: float = 1.0) -> ChannelStatistics:
    eye_m = ch.identity_correlation(m)
    eye_n = ch.identity_correlation(n)
    return ChannelStatistics(
        c_bs=eye_m,
        c_ris_rx=eye_n,
        c_ris_user=[eye_n] * k,
        beta_br=beta,
        beta_ru=np.full(k, beta),
    )


class TestComputeZ:
    def test_identity_receive_correlation_fixes_trace(self, rng):
        n = 6
        cu = CorrelationMatrix(kind="generic", mat=np.eye(n))
        theta = rng.uniform(0, 2 * np.pi, n)
        _, trace = est.compute_z(theta, cu, ch.identity_correlation(n))
        assert trace == pytest.approx(n, abs=1e-10)

    def test_zero_phases_give_plain_product(self):
        stats = reference_stats(4, 9, 1)
        z, _ = est.compute_z(np.zeros(9), stats.c_ris_user[0], stats.c_ris_rx)
        expected = stats.c_ris_user[0].mat @ stats.c_ris_rx.mat
        assert np.allclose(z, expected, atol=1e-14)

    def test_matches_naive_triple_loop(self, rng):
        n = 4
        from conftest import random_unit_diag_hermitian

        cu = random_unit_diag_hermitian(n, rng)
        cr = random_unit_diag_hermitian(n, rng)
        theta = rng.uniform(0, 2 * np.pi, n)
        z, trace = est.compute_z(theta, cu, cr)
        naive = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    naive[i, j] += np.exp(1j * theta[i]) * cu[i, l] * np.exp(-1j * theta[l]) * cr[l, j]
        assert np.allclose(z, naive, atol=1e-12)
        assert trace == pytest.approx(np.trace(naive).real, abs=1e-10)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            est.compute_z(np.zeros(3), np.eye(3), np.eye(4))


class TestLmmseFilter:
    def test_identity_correlations_reduce_to_scalar(self):
        m, n = 8, 16
        stats = identity_stats(m, n, 1, beta=0.5)
        pilot = PilotSetup(tau=4, power=0.2, noise_power=1e-3)
        z, tr = est.compute_z(np.zeros(n), stats.c_ris_user[0], stats.c_ris_rx)
        state = est.lmmse_filter(stats, z, tr, pilot, user=0)
        gain = 0.25 * n
        c = gain / (gain + pilot.effective_noise_variance)
        assert np.allclose(state.r_filter, c * np.eye(m), atol=1e-12)

    def test_noiseless_limit_recovers_identity_filter(self):
        stats = reference_stats(6, 9, 1)
        pilot = PilotSetup(tau=5, power=0.1, noise_power=1e-30)
        z, tr = est.compute_z(np.zeros(9), stats.c_ris_user[0], stats.c_ris_rx)
        state = est.lmmse_filter(stats, z, tr, pilot, user=0)
        assert est.nmse(state.r_filter, stats.c_bs) <= 1e-9

    def test_vanishing_user_gain_kills_filter(self):
        stats = ChannelStatistics(
            c_bs=ch.identity_correlation(4),
            c_ris_rx=ch.identity_correlation(4),
            c_ris_user=[ch.identity_correlation(4)],
            beta_br=1.0,
            beta_ru=np.array([1e-30]),
        )
        z, tr = est.compute_z(np.zeros(4), stats.c_ris_user[0], stats.c_ris_rx)
        state = est.lmmse_filter(stats, z, tr, PilotSetup(5, 0.1, 1e-3), user=0)
        assert np.max(np.abs(state.r_filter)) <= 1e-20

    def test_rejects_nonpositive_noise(self):
        stats = reference_stats(4, 4, 1)
        z, tr = est.compute_z(np.zeros(4), stats.c_ris_user[0], stats.c_ris_rx)
        with pytest.raises(ValueError):
            est.lmmse_filter(stats, z, tr, PilotSetup(5, 0.1, 0.0), user=0)

    def test_filter_resolvent_identity(self, rng):
        # R = beta_br beta_ru Tr(Z) W must hold to 1e-12 relative
        stats = reference_stats(8, 16, 2, seed=3)
        theta = rng.uniform(0, 2 * np.pi, 16)
        for state in est.build_estimator_states(stats, theta, reference_pilot()):
            gain = stats.beta_br * stats.beta_ru[state.user]
            lhs = state.r_filter
            rhs = gain * state.z_trace * state.w_matrix
            assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)

    def test_staleness_guard(self):
        stats = reference_stats(4, 4, 1)
        states = est.build_estimator_states(stats, np.zeros(4), reference_pilot())
        with pytest.raises(est.StaleStateError):
            states[0].require_fresh(ch.theta_digest(np.ones(4)))


class TestEstimate:
    def test_identity_filter_passthrough(self, rng):
        y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert np.array_equal(est.estimate(np.eye(5), y), y)

    def test_zero_filter(self, rng):
        y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert np.array_equal(est.estimate(np.zeros((5, 5)), y), np.zeros(5))

    def test_matches_naive_matvec(self, rng):
        r = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        naive = np.array([sum(r[i, j] * y[j] for j in range(4)) for i in range(4)])
        assert np.allclose(est.estimate(r, y), naive, atol=1e-14)


class TestNmse:
    def test_perfect_filter(self):
        assert est.nmse(np.eye(6), ch.identity_correlation(6)) == 0.0

    def test_zero_filter(self):
        assert est.nmse(np.zeros((6, 6)), ch.identity_correlation(6)) == 1.0

    def test_scalar_reduction_at_snr_nine(self):
        # Identity correlations with beta^2 N tau P_p / sigma^2 = 9 -> NMSE = 0.1
        m, n = 64, 64
        stats = identity_stats(m, n, 1, beta=1.0)
        pilot = PilotSetup(tau=1, power=1.0, noise_power=n / 9.0)
        z, tr = est.compute_z(np.zeros(n), stats.c_ris_user[0], stats.c_ris_rx)
        state = est.lmmse_filter(stats, z, tr, pilot, user=0)
        assert est.nmse(state.r_filter, stats.c_bs) == pytest.approx(0.1, rel=1e-12)

    def test_monotone_in_pilot_power_and_length(self):
        stats = reference_stats(16, 16, 1)
        z, tr = est.compute_z(np.zeros(16), stats.c_ris_user[0], stats.c_ris_rx)
        values_p = []
        for power in np.logspace(-4, 0, 9):
            state = est.lmmse_filter(
                stats, z, tr, PilotSetup(5, power, REFERENCE_NOISE_W), user=0
            )
            values_p.append(est.nmse(state.r_filter, stats.c_bs))
        assert all(a > b for a, b in zip(values_p, values_p[1:]))
        values_tau = []
        for tau in [1, 2, 4, 8, 16, 32]:
            state = est.lmmse_filter(
                stats, z, tr, PilotSetup(tau, 1e-3, REFERENCE_NOISE_W), user=0
            )
            values_tau.append(est.nmse(state.r_filter, stats.c_bs))
        assert all(a > b for a, b in zip(values_tau, values_tau[1:]))

    def test_correlation_improves_estimation(self):
        # At equal element count and pilot budget the correlated statistics
        # estimate strictly better than independent ones.
        for n in [16, 36]:
            corr = reference_stats(32, n, 2, seed=1, correlated=True)
            indep = reference_stats(32, n, 2, seed=1, correlated=False)
            pilot = reference_pilot()
            nm = []
            for stats in (corr, indep):
                z, tr = est.compute_z(np.zeros(n), stats.c_ris_user[0], stats.c_ris_rx)
                state = est.lmmse_filter(stats, z, tr, pilot, user=0)
                nm.append(est.nmse(state.r_filter, stats.c_bs))
            assert nm[0] < nm[1]


class TestEmpiricalNmse:
    @pytest.mark.parametrize("correlated", [True, False])
    def test_matches_closed_form(self, correlated):
        stats = reference_stats(8, 16, 1, seed=4, correlated=correlated)
        pilot = PilotSetup(tau=5, power=1e-4, noise_power=REFERENCE_NOISE_W)
        theta = np.random.default_rng(5).uniform(0, 2 * np.pi, 16)
        states = est.build_estimator_states(stats, theta, pilot)
        rng = np.random.default_rng(17)
        num = den = 0.0
        trials = 10_000
        for _ in range(10):
            _, _, h, noise = ch.sample_batch(stats, theta, pilot, rng, trials // 10)
            y = h[0] + noise[0]
            h_hat = y @ states[0].r_filter.T
            num += float(np.sum(np.abs(h[0] - h_hat) ** 2))
            den += float(np.sum(np.abs(h[0]) ** 2))
        closed = est.nmse(states[0].r_filter, stats.c_bs)
        assert num / den == pytest.approx(closed, rel=0.02)
