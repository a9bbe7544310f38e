"""Tests for correlation models, path loss, and channel sampling."""

import numpy as np
import pytest

from ris_urllc import channel as ch
from ris_urllc.estimation import compute_z

from conftest import reference_pilot, reference_stats


class TestExponentialCorrelation:
    def test_zero_coefficient_gives_identity(self):
        c = ch.build_exponential_correlation(4, 0.0)
        assert np.array_equal(c.mat, np.eye(4))

    def test_powers_of_r(self):
        c = ch.build_exponential_correlation(3, 0.5)
        assert c.mat[0, 2] == 0.25
        assert c.mat[1, 2] == 0.5
        assert c.mat[2, 0] == 0.25

    def test_complex_coefficient_is_psd(self):
        c = ch.build_exponential_correlation(8, 0.6 * np.exp(1j * 0.3))
        assert np.linalg.eigvalsh(c.mat)[0] >= -1e-10
        assert np.array_equal(c.mat, c.mat.conj().T)
        assert np.allclose(np.diagonal(c.mat), 1.0)

    def test_real_coefficient_gives_real_matrix(self):
        c = ch.build_exponential_correlation(5, 0.7)
        assert not np.iscomplexobj(c.mat)

    def test_rejects_overunit_coefficient(self):
        with pytest.raises(ValueError):
            ch.build_exponential_correlation(4, 1.2)


class TestSincCorrelation:
    def test_half_wavelength_spacing_decorrelates_neighbors(self):
        c = ch.build_sinc_correlation(4, spacing=0.5, wavelength=1.0)
        assert abs(c.mat[0, 1]) <= 1e-15

    def test_quarter_wavelength_neighbor_value(self):
        c = ch.build_sinc_correlation(4, spacing=0.25, wavelength=1.0)
        assert c.mat[0, 1] == pytest.approx(2.0 / np.pi, abs=1e-12)

    def test_structure_at_sixteen_elements(self):
        c = ch.build_sinc_correlation(16, spacing=0.25, wavelength=1.0)
        assert not np.iscomplexobj(c.mat)
        assert np.array_equal(c.mat, c.mat.T)
        assert np.all(np.diagonal(c.mat) == 1.0)
        assert np.linalg.eigvalsh(c.mat)[0] >= -1e-10

    def test_rejects_non_square_count(self):
        with pytest.raises(ValueError):
            ch.build_sinc_correlation(12, spacing=0.25, wavelength=1.0)

    def test_grid_positions_are_row_major(self):
        pos = ch.element_grid(9, spacing=2.0)
        assert np.array_equal(pos[4], [0.0, 2.0, 2.0])
        assert np.array_equal(pos[5], [0.0, 4.0, 2.0])


class TestPathLoss:
    def test_unit_distance(self):
        assert ch.path_loss(1.0, 2.2, 1e-2) == 1e-2

    def test_direct_evaluation(self):
        assert ch.path_loss(50.0, 2.2, 1e-2) == pytest.approx(1e-2 * 50.0**-2.2, rel=1e-15)
        assert ch.path_loss(10.0, 2.1, 1e-2) == pytest.approx(7.943282347e-5, rel=1e-9)

    def test_strictly_decreasing(self):
        dists = np.linspace(1.0, 100.0, 50)
        gains = [ch.path_loss(d, 2.2, 1e-2) for d in dists]
        assert all(a > b for a, b in zip(gains, gains[1:]))

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            ch.path_loss(0.0, 2.2, 1e-2)


class TestPsdFactor:
    def test_identity(self):
        f = ch.psd_factor(ch.identity_correlation(5))
        assert np.allclose(f @ f.conj().T, np.eye(5), atol=1e-14)

    def test_rank_one_all_ones(self):
        c = ch.CorrelationMatrix(kind="generic", mat=np.ones((2, 2)))
        f = ch.psd_factor(c)
        assert np.allclose(f @ f.conj().T, np.ones((2, 2)), atol=1e-10)

    def test_near_singular_sinc_reconstruction(self):
        c = ch.build_sinc_correlation(36, spacing=0.25, wavelength=1.0)
        f = ch.psd_factor(c)
        err = np.linalg.norm(f @ f.conj().T - c.mat)
        assert err <= 1e-8 * 36

    def test_rejects_indefinite_matrix(self):
        bad = np.eye(3)
        bad[0, 0] = -1.0
        with pytest.raises(ch.NotPositiveSemidefiniteError):
            ch.psd_factor(bad)


class TestCorrelationMatrixValidation:
    def test_rejects_non_hermitian(self):
        m = np.eye(3)
        m[0, 1] = 0.5
        with pytest.raises(ValueError):
            ch.CorrelationMatrix(kind="generic", mat=m)

    def test_rejects_non_unit_diagonal(self):
        with pytest.raises(ValueError):
            ch.CorrelationMatrix(kind="generic", mat=2.0 * np.eye(3))

    def test_rejects_indefinite(self):
        m = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ch.NotPositiveSemidefiniteError):
            ch.CorrelationMatrix(kind="generic", mat=m)


class TestSampling:
    def test_same_seed_is_bitwise_identical(self):
        stats = reference_stats(8, 9, 2)
        pilot = reference_pilot()
        theta = np.linspace(0.0, 3.0, 9)
        r1 = ch.sample_realization(stats, theta, pilot, seed=42)
        r2 = ch.sample_realization(stats, theta, pilot, seed=42)
        assert np.array_equal(r1.g, r2.g)
        assert np.array_equal(r1.h, r2.h)
        assert np.array_equal(r1.pilot_noise, r2.pilot_noise)

    def test_noiseless_pilot_equals_channel(self):
        stats = reference_stats(8, 9, 2)
        pilot = ch.PilotSetup(tau=5, power=0.1, noise_power=0.0)
        theta = np.zeros(9)
        r = ch.sample_realization(stats, theta, pilot, seed=3)
        assert np.array_equal(r.y_pilot, r.h)

    def test_cascade_recomputes_from_parts(self):
        stats = reference_stats(8, 9, 2)
        theta = np.linspace(0.0, 2.0, 9)
        r = ch.sample_realization(stats, theta, reference_pilot(), seed=11)
        b = ch.unit_phasor(theta)
        for k in range(2):
            assert np.allclose(r.h[k], r.g @ (b * r.v[k]), rtol=1e-12, atol=0)

    def test_channel_covariance_matches_closed_form(self):
        # E{h h^H} = beta_br beta_ru Tr(Z) C^B, estimated over 1e4 draws
        stats = reference_stats(8, 9, 1, seed=5)
        pilot = reference_pilot()
        theta = np.random.default_rng(0).uniform(0, 2 * np.pi, 9)
        rng = np.random.default_rng(99)
        acc = np.zeros((8, 8), dtype=complex)
        draws = 10_000
        for _ in range(10):
            _, _, h, _ = ch.sample_batch(stats, theta, pilot, rng, draws // 10)
            acc += np.einsum("bm,bj->mj", h[0], h[0].conj())
        empirical = acc / draws
        _, z_trace = compute_z(theta, stats.c_ris_user[0], stats.c_ris_rx)
        closed = stats.beta_br * stats.beta_ru[0] * z_trace * stats.c_bs.mat
        rel_err = np.linalg.norm(empirical - closed) / np.linalg.norm(closed)
        assert rel_err <= 0.03

    def test_bs_ris_channel_quadratic_form_invariant(self):
        # E{G X G^H} = beta_br Tr(X C^R) C^B for a random Hermitian X
        stats = reference_stats(4, 4, 1, seed=2)
        pilot = reference_pilot()
        gen = np.random.default_rng(7)
        a = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
        x = a @ a.conj().T / 4.0
        rng = np.random.default_rng(123)
        acc = np.zeros((4, 4), dtype=complex)
        draws = 100_000
        for _ in range(20):
            g, *_ = ch.sample_batch(stats, np.zeros(4), pilot, rng, draws // 20)
            acc += np.einsum("bmn,nj,bkj->mk", g, x, g.conj())
        empirical = acc / draws
        closed = stats.beta_br * np.trace(x @ stats.c_ris_rx.mat) * stats.c_bs.mat
        rel_err = np.linalg.norm(empirical - closed) / np.linalg.norm(closed)
        assert rel_err <= 0.02

    def test_batch_seed_sequences_are_stable(self):
        seqs_a = ch.batch_seed_sequences(17, 4)
        seqs_b = ch.batch_seed_sequences(17, 4)
        for sa, sb in zip(seqs_a, seqs_b):
            ra = np.random.default_rng(sa).standard_normal(3)
            rb = np.random.default_rng(sb).standard_normal(3)
            assert np.array_equal(ra, rb)


class TestGeometry:
    def test_semicircle_placement(self):
        rng = np.random.default_rng(0)
        ris = np.array([0.0, 50.0])
        users = ch.place_users_on_semicircle(64, ris, center_offset=10.0, radius=5.0, rng=rng)
        radii = np.linalg.norm(users - np.array([0.0, 60.0]), axis=1)
        assert np.allclose(radii, 5.0)
        assert np.all(users[:, 1] <= 60.0 + 1e-12)

    def test_distances_positive(self):
        rng = np.random.default_rng(0)
        from ris_urllc.scenario import standard_geometry

        geom = standard_geometry(4, rng)
        assert geom.bs_ris_distance() == 50.0
        assert np.all(geom.ris_user_distances() >= 5.0)
        assert np.all(geom.ris_user_distances() <= np.sqrt(125.0) + 1e-12)

    def test_rejects_degenerate_layout(self):
        with pytest.raises(ValueError):
            ch.Geometry(
                bs_position=np.zeros(2),
                ris_position=np.zeros(2),
                user_positions=np.array([[1.0, 1.0]]),
                element_spacing=0.025,
                wavelength=0.1,
            )
