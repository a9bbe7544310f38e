"""Tests for the geometric-program solver."""

import numpy as np
import pytest

from ris_urllc import estimation as est
from ris_urllc.gp import (
    GpInfeasibleError,
    GpInstance,
    Posynomial,
    monomial,
    solve_gp,
)
from ris_urllc.optimize import build_gp
from ris_urllc.sinr import SinrBreakdown, build_breakdown, sinr_vector

from conftest import reference_pilot, reference_stats


def random_breakdown(rng, k):
    return SinrBreakdown(
        signal=np.exp(rng.normal(0, 1, k)),
        leakage_coeff=0.05 * np.exp(rng.normal(0, 0.5, k)),
        interference=0.2 * np.exp(rng.normal(0, 0.5, (k, k))),
        noise=float(np.exp(rng.normal(-1, 0.5))),
        theta_hash="",
    )


def feasible_instance(rng, k):
    bd = random_breakdown(rng, k)
    p_total = float(rng.uniform(0.5, 4.0))
    chi_min = 0.5 * sinr_vector(bd, np.full(k, p_total / k))
    w_hat = rng.uniform(0.1, 1.0, k)
    return bd, w_hat, chi_min, p_total


class TestPosynomial:
    def test_rejects_nonpositive_coefficients(self):
        with pytest.raises(ValueError):
            Posynomial(coeffs=np.array([1.0, -0.5]), exponents=np.zeros((2, 3)))

    def test_value_and_log_value_agree(self, rng):
        pos = Posynomial(coeffs=np.array([2.0, 0.5]), exponents=np.array([[1.0, -1.0], [0.5, 2.0]]))
        x = rng.uniform(0.5, 2.0, 2)
        direct = 2.0 * x[0] / x[1] + 0.5 * np.sqrt(x[0]) * x[1] ** 2
        assert pos.value(x) == pytest.approx(direct, rel=1e-12)
        assert pos.log_value(np.log(x)) == pytest.approx(np.log(direct), rel=1e-12)

    def test_gradient_is_softmax_combination(self, rng):
        pos = Posynomial(coeffs=np.array([1.0, 3.0]), exponents=np.array([[2.0, 0.0], [-1.0, 1.0]]))
        y = rng.normal(0, 1, 2)
        _, grad, _ = pos.log_grad_hess(y)
        eps = 1e-7
        for i in range(2):
            up, dn = y.copy(), y.copy()
            up[i] += eps
            dn[i] -= eps
            fd = (pos.log_value(up) - pos.log_value(dn)) / (2 * eps)
            assert grad[i] == pytest.approx(fd, rel=1e-6)

    def test_instance_rejects_mismatched_vars(self):
        with pytest.raises(ValueError):
            GpInstance(
                objective=monomial(1.0, np.array([1.0, 0.0])),
                constraints=[monomial(1.0, np.array([1.0, 0.0, 0.0]))],
            )


class TestPowerStepGp:
    def test_single_user_takes_full_power(self):
        # Monotone single-variable problem: the SINR constraint is loosest at
        # the power budget, so the optimum sits exactly there.
        stats = reference_stats(32, 16, 1, seed=0)
        pilot = reference_pilot()
        theta = np.random.default_rng(1).uniform(0, 2 * np.pi, 16)
        bd = build_breakdown(stats, est.build_estimator_states(stats, theta, pilot), pilot)
        gp = build_gp(bd, np.array([0.5]), np.array([1e-3]), power_total=1.0)
        solution = solve_gp(gp)
        assert solution.x[0] == pytest.approx(1.0, abs=1e-6)
        assert solution.kkt_residual <= 1e-8

    def test_two_user_instance_matches_grid_oracle(self):
        rng = np.random.default_rng(7)
        bd, w_hat, chi_min, p_total = feasible_instance(rng, 2)
        solution = solve_gp(build_gp(bd, w_hat, chi_min, p_total))
        gp_objective = 1.0 / solution.objective_value  # prod chi^w maximized

        n = 400
        grid = np.linspace(p_total / n, p_total, n)
        p1, p2 = np.meshgrid(grid, grid, indexing="ij")
        mask = p1 + p2 <= p_total
        g1 = p1 * bd.signal[0] / (
            p1 * (bd.leakage_coeff[0] + bd.interference[0, 0])
            + p2 * bd.interference[0, 1]
            + bd.noise
        )
        g2 = p2 * bd.signal[1] / (
            p2 * (bd.leakage_coeff[1] + bd.interference[1, 1])
            + p1 * bd.interference[1, 0]
            + bd.noise
        )
        feasible = mask & (g1 >= chi_min[0]) & (g2 >= chi_min[1])
        objective = np.where(feasible, g1 ** w_hat[0] * g2 ** w_hat[1], -np.inf)
        assert abs(gp_objective - objective.max()) / objective.max() <= 1e-3

    def test_scale_invariance_of_power_solution(self):
        # SINR is 0-homogeneous in (signal, leakage, UI, noise) jointly.
        rng = np.random.default_rng(11)
        bd, w_hat, chi_min, p_total = feasible_instance(rng, 3)
        scaled = SinrBreakdown(
            signal=10.0 * bd.signal,
            leakage_coeff=10.0 * bd.leakage_coeff,
            interference=10.0 * bd.interference,
            noise=10.0 * bd.noise,
            theta_hash="",
        )
        sol_a = solve_gp(build_gp(bd, w_hat, chi_min, p_total))
        sol_b = solve_gp(build_gp(scaled, w_hat, chi_min, p_total))
        assert np.allclose(sol_a.x[:3], sol_b.x[:3], atol=1e-6)

    @pytest.mark.parametrize("trial", range(50))
    def test_kkt_residual_on_random_feasible_instances(self, trial):
        rng = np.random.default_rng(1_000 + trial)
        k = int(rng.integers(1, 5))
        bd, w_hat, chi_min, p_total = feasible_instance(rng, k)
        gp = build_gp(bd, w_hat, chi_min, p_total)
        solution = solve_gp(gp)
        assert solution.kkt_residual <= 1e-8
        assert np.all(gp.constraint_values(solution.x) <= 1.0 + 1e-9)

    def test_complementary_slackness(self):
        rng = np.random.default_rng(21)
        bd, w_hat, chi_min, p_total = feasible_instance(rng, 3)
        gp = build_gp(bd, w_hat, chi_min, p_total)
        solution = solve_gp(gp)
        values = gp.constraint_values(solution.x)
        for g_val, dual in zip(values, solution.duals):
            assert (1.0 - g_val <= 1e-6) or (dual <= 1e-8)

    def test_infeasible_targets_certified(self):
        rng = np.random.default_rng(31)
        bd, w_hat, _, p_total = feasible_instance(rng, 2)
        with pytest.raises(GpInfeasibleError):
            solve_gp(build_gp(bd, w_hat, np.array([1e4, 1e4]), p_total))

    def test_feasible_start_is_honored(self):
        rng = np.random.default_rng(41)
        bd, w_hat, chi_min, p_total = feasible_instance(rng, 2)
        gp = build_gp(bd, w_hat, chi_min, p_total)
        p0 = np.full(2, 0.4 * p_total / 2)
        chi0 = sinr_vector(bd, p0) * 0.9
        cold = solve_gp(gp)
        warm = solve_gp(gp, x0=np.concatenate([p0, chi0]))
        assert warm.objective_value == pytest.approx(cold.objective_value, rel=1e-7)
