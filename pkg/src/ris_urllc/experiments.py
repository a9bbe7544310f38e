"""Experiment runners behind the command-line subcommands.

Each runner instantiates scenarios from an :class:`ExperimentConfig`,
produces plain row dictionaries, and leaves serialization to the caller.
Everything is deterministic for a fixed (config, seed): sweep drops and
Monte-Carlo batches derive their streams from spawned seed sequences.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import montecarlo as mc
from .channel import PilotSetup, sample_realization
from .config import ExperimentConfig, build_scenario
from .estimation import build_estimator_states, compute_z, lmmse_filter, nmse
from .gradients import GradientWorkspace, finite_difference
from .montecarlo import check_gaussian_fourth_moment, check_gaussian_isotropy
from .optimize import (
    OptimizerOptions,
    alternating_optimize,
    ascend_min_margin,
    chi_requirements,
    optimize_power_only,
)
from .sinr import build_breakdown, sinr_vector


def _derived_seed(*path: int) -> int:
    return int(np.random.SeedSequence(list(path)).generate_state(1)[0])


def _optimizer_options(cfg: ExperimentConfig) -> OptimizerOptions:
    return OptimizerOptions(smoothing_temperature=cfg.smoothing_temperature)


def run_nmse(cfg: ExperimentConfig, seed: int, trials: int) -> list[dict]:
    """Estimation error of the first device across the pilot-power grid."""
    rows = []
    for n in cfg.sweep_ris_elements:
        for correlated, label in ((True, "correlated"), (False, "independent")):
            scenario = build_scenario(cfg, seed, n_elements=n, correlated=correlated)
            stats = scenario.stats
            theta = np.zeros(n)
            z, z_trace = compute_z(theta, stats.c_ris_user[0], stats.c_ris_rx)
            for p_pilot in cfg.sweep_pilot_powers_w:
                pilot = PilotSetup(
                    tau=scenario.system.pilot.tau,
                    power=p_pilot,
                    noise_power=scenario.system.noise_power,
                )
                state = lmmse_filter(stats, z, z_trace, pilot, user=0)
                closed = nmse(state.r_filter, stats.c_bs)
                empirical, stderr = mc.mc_nmse(
                    stats, theta, pilot, trials, _derived_seed(seed, n, int(correlated))
                )
                rows.append(
                    {
                        "ris_elements": n,
                        "correlation": label,
                        "pilot_power_w": p_pilot,
                        "nmse_closed": closed,
                        "nmse_mc": float(empirical[0]),
                        "nmse_mc_se": float(stderr[0]),
                        "rel_gap": abs(float(empirical[0]) - closed) / closed,
                    }
                )
    return rows


def operating_phases(scenario, seed: int, options: OptimizerOptions) -> np.ndarray:
    """Phases from min-margin ascent at the uniform power split."""
    system, stats = scenario.system, scenario.stats
    powers = np.full(system.n_users, system.power_total / system.n_users)
    chi_ref = chi_requirements(system)
    theta0 = np.random.default_rng(np.random.SeedSequence([seed, 3])).uniform(
        0.0, 2.0 * np.pi, system.n_elements
    )
    return ascend_min_margin(stats, system.pilot, powers, chi_ref, theta0, options).theta


def run_bound(cfg: ExperimentConfig, seed: int, trials: int) -> list[dict]:
    """Closed-form rate bound against the Monte-Carlo estimate per (M, N)."""
    rows = []
    options = _optimizer_options(cfg)
    for m in cfg.sweep_bs_antennas:
        for n in cfg.sweep_ris_elements:
            scenario = build_scenario(cfg, seed, n_antennas=m, n_elements=n)
            system, stats = scenario.system, scenario.stats
            powers = np.full(system.n_users, system.power_total / system.n_users)
            theta = operating_phases(scenario, _derived_seed(seed, m, n), options)
            states = build_estimator_states(stats, theta, system.pilot)
            breakdown = build_breakdown(stats, states, system.pilot)
            gamma = sinr_vector(breakdown, powers)
            alphas = system.dispersion_coefficients()
            eta = system.budget.pilot_ratio
            closed = mc._short_packet_rate(gamma, float(alphas[0]), eta)
            report = mc.mc_ergodic_rate(
                stats, theta, powers, system.pilot, alphas, eta,
                trials, _derived_seed(seed, m, n, 5),
            )
            for k in range(system.n_users):
                mc_rate = float(report.rate_uatf[k])
                mc_se = float(report.rate_uatf_se[k])
                rows.append(
                    {
                        "bs_antennas": m,
                        "ris_elements": n,
                        "user": k,
                        "weight": float(scenario.weights[k]),
                        "sinr_closed": float(gamma[k]),
                        "rate_closed": float(closed[k]),
                        "rate_mc": mc_rate,
                        "rate_mc_se": mc_se,
                        "rel_gap": abs(float(closed[k]) - mc_rate) / max(abs(mc_rate), 1e-12),
                        "within_two_se": float(closed[k]) <= mc_rate + 2.0 * mc_se,
                        "rate_fluctuation": float(report.rate_fluctuation[k]),
                        "rate_instantaneous": float(report.rate_instantaneous[k]),
                    }
                )
    return rows


def trace_header(n_users: int) -> list[str]:
    """Column order of the optimization-trace CSV."""
    return (
        ["iter", "wsr"]
        + [f"gamma_{k + 1}" for k in range(n_users)]
        + [f"p_{k + 1}" for k in range(n_users)]
        + ["min_slack", "grad_norm", "gp_kkt", "inner_iterations", "wall_ms"]
    )


def trace_rows(result, n_users: int) -> list[dict]:
    """Flatten an optimization trace into CSV-ready dictionaries."""
    rows = []
    for row in result.trace.rows:
        entry = {"iter": row.iteration, "wsr": row.wsr}
        for k in range(n_users):
            entry[f"gamma_{k + 1}"] = float(row.gamma[k])
        for k in range(n_users):
            entry[f"p_{k + 1}"] = float(row.powers[k])
        entry.update(
            {
                "min_slack": row.min_slack,
                "grad_norm": row.grad_norm,
                "gp_kkt": row.gp_kkt,
                "inner_iterations": row.inner_iterations,
                "wall_ms": row.wall_ms,
            }
        )
        rows.append(entry)
    return rows


def run_optimize(cfg: ExperimentConfig, seed: int) -> tuple[object, list[dict], list[dict]]:
    """Full alternating optimization on the configured scenario."""
    scenario = build_scenario(cfg, seed)
    result = alternating_optimize(
        scenario.system, scenario.stats, seed=seed, options=_optimizer_options(cfg)
    )
    solution_rows = []
    for k in range(scenario.system.n_users):
        solution_rows.append(
            {
                "feasible": result.feasible,
                "wsr": result.wsr,
                "gamma_scale": result.feasibility.gamma_scale,
                "user": k,
                "weight": float(scenario.weights[k]),
                "power_w": float(result.powers[k]),
                "sinr": float(result.gamma[k]),
                "rate": float(result.rates[k]),
                "rate_req": cfg.rate_req_bps_hz,
            }
        )
    return result, solution_rows, trace_rows(result, scenario.system.n_users)


def _sweep_one(args: tuple) -> list[dict]:
    cfg, seed, drop = args
    drop_seed = _derived_seed(seed, drop)
    scenario = build_scenario(cfg, drop_seed)
    options = _optimizer_options(cfg)
    system, stats = scenario.system, scenario.stats
    rate_req = system.rate_requirements()

    rows = []

    def record(method: str, result) -> None:
        qos_ok = result.feasible and bool(np.all(result.rates >= rate_req - 1e-9))
        rows.append(
            {
                "drop": drop,
                "seed": drop_seed,
                "method": method,
                "feasible": result.feasible,
                "qos_met": qos_ok,
                "wsr": result.wsr if result.feasible else 0.0,
            }
        )

    record("proposed", alternating_optimize(system, stats, seed=drop_seed, options=options))
    theta_rng = np.random.default_rng(np.random.SeedSequence([drop_seed, 2]))
    record(
        "gp_random_phase",
        optimize_power_only(
            system, stats, theta_rng.uniform(0, 2 * np.pi, system.n_elements), options
        ),
    )
    record(
        "gp_shannon_phase",
        alternating_optimize(
            system, stats, seed=drop_seed, options=options, phase_objective="shannon"
        ),
    )
    return rows


def run_sweep(
    cfg: ExperimentConfig, seed: int, drops: int | None = None, jobs: int | None = None
) -> list[dict]:
    """Weighted-sum-rate distribution over random drops for three methods.

    Infeasible drops report zero rate. Drops are independent and derive their
    seeds from (seed, drop), so any worker count gives identical output.
    """
    import os

    n_drops = drops if drops is not None else cfg.drops
    if jobs is None:
        jobs = min(8, os.cpu_count() or 1)
    tasks = [(cfg, seed, drop) for drop in range(n_drops)]
    if jobs > 1 and n_drops > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_one, tasks))
    else:
        chunks = [_sweep_one(task) for task in tasks]
    return [row for chunk in chunks for row in chunk]


GRADCHECK_DIMENSIONS = (6, 4, 3)  # antennas, elements, users


def run_gradcheck(seed: int) -> list[dict]:
    """Analytic-gradient audit against central finite differences."""
    from .channel import ChannelStatistics, CorrelationMatrix, PilotSetup

    m, n, k = GRADCHECK_DIMENSIONS
    rng = np.random.default_rng(seed)

    def unit_diag(dim):
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        c = a @ a.conj().T + dim * np.eye(dim)
        d = np.sqrt(np.real(np.diagonal(c)))
        c = c / np.outer(d, d)
        c = 0.5 * (c + c.conj().T)
        np.fill_diagonal(c, 1.0)
        return CorrelationMatrix(kind="generic", mat=c)

    stats = ChannelStatistics(
        c_bs=unit_diag(m),
        c_ris_rx=unit_diag(n),
        c_ris_user=[unit_diag(n) for _ in range(k)],
        beta_br=float(rng.uniform(0.5, 2.0)),
        beta_ru=rng.uniform(0.5, 2.0, size=k),
    )
    pilot = PilotSetup(tau=k, power=0.5, noise_power=0.05)
    theta = rng.uniform(0, 2 * np.pi, n)
    powers = rng.uniform(0.2, 1.0, k)
    weights = rng.uniform(0.2, 1.0, k)
    alphas = np.full(k, 0.3723)
    eta = 0.025
    ws = GradientWorkspace(stats, pilot, theta)

    def bd_at(th):
        return build_breakdown(stats, build_estimator_states(stats, th, pilot), pilot)

    checks: list[tuple[str, np.ndarray, object]] = [
        ("z_trace_0", ws.grad_z_trace(0), lambda th: compute_z(th, stats.c_ris_user[0], stats.c_ris_rx)[1]),
        ("signal_0", ws.grad_signal(0), lambda th: float(bd_at(th).signal[0])),
        ("leakage_1", ws.grad_leakage(1), lambda th: float(bd_at(th).leakage_coeff[1])),
        ("trzz_self_0", ws.grad_trzz_self(0), lambda th: float(np.trace(
            compute_z(th, stats.c_ris_user[0], stats.c_ris_rx)[0]
            @ compute_z(th, stats.c_ris_user[0], stats.c_ris_rx)[0]).real)),
        ("quad_filter_0", ws.grad_tr_cbrhcbr(0), lambda th: float(np.trace(
            stats.c_bs.mat
            @ build_estimator_states(stats, th, pilot)[0].r_filter.conj().T
            @ stats.c_bs.mat
            @ build_estimator_states(stats, th, pilot)[0].r_filter).real)),
        ("gram_filter_1", ws.grad_tr_cbrrh(1), lambda th: float(np.trace(
            stats.c_bs.mat
            @ build_estimator_states(stats, th, pilot)[1].r_filter
            @ build_estimator_states(stats, th, pilot)[1].r_filter.conj().T).real)),
        ("interference_0_1", ws.grad_interference(0, 1), lambda th: float(bd_at(th).interference[0, 1])),
        ("interference_1_1", ws.grad_interference(1, 1), lambda th: float(bd_at(th).interference[1, 1])),
        ("sinr_0", ws.grad_sinr(powers)[0], lambda th: float(sinr_vector(bd_at(th), powers)[0])),
        ("weighted_sum_rate", ws.grad_wsr(powers, weights, alphas, eta),
         lambda th: GradientWorkspace(stats, pilot, th).weighted_sum_rate(powers, weights, alphas, eta)),
    ]
    rows = []
    for name, analytic, scalar in checks:
        fd = finite_difference(scalar, theta)
        scale = max(float(np.linalg.norm(fd)), 1e-300)
        rows.append(
            {
                "term": name,
                "analytic": float(np.linalg.norm(analytic)),
                "fd": float(np.linalg.norm(fd)),
                "rel_err": float(np.linalg.norm(analytic - fd)) / scale,
            }
        )
    return rows


def run_lemmacheck(seed: int, trials: int) -> list[dict]:
    """Monte-Carlo audit of the Gaussian matrix-moment identities."""
    rows = []
    cases = [
        ("isotropy_4x3", check_gaussian_isotropy(4, 3, trials, _derived_seed(seed, 11))),
        ("isotropy_8x8", check_gaussian_isotropy(8, 8, trials, _derived_seed(seed, 12))),
        ("fourth_moment_4x3", check_gaussian_fourth_moment(4, 3, trials, _derived_seed(seed, 13))),
        ("fourth_moment_6x5", check_gaussian_fourth_moment(6, 5, trials, _derived_seed(seed, 14))),
    ]
    for name, report in cases:
        rows.append(
            {
                "quantity": name,
                "closed_form": float(np.linalg.norm(report.closed_form)),
                "mc_mean": float(np.linalg.norm(report.empirical)),
                "mc_stderr": report.rel_error_stderr,
                "rel_gap": report.rel_frobenius_error,
                "pass": report.passed,
            }
        )
    return rows


def dump_scenario(cfg: ExperimentConfig, seed: int, outdir) -> list:
    """Binary dumps of the correlation matrices and one realization."""
    from .reporting import dump_complex_matrix, write_csv

    scenario = build_scenario(cfg, seed)
    stats = scenario.stats
    paths = []
    outdir = str(outdir)
    paths.append(dump_complex_matrix(f"{outdir}/c_bs.bin", stats.c_bs.mat))
    paths.append(dump_complex_matrix(f"{outdir}/c_ris_rx.bin", stats.c_ris_rx.mat))
    for k, c in enumerate(stats.c_ris_user):
        paths.append(dump_complex_matrix(f"{outdir}/c_ris_user_{k}.bin", c.mat))
    theta = np.random.default_rng(np.random.SeedSequence([seed, 3])).uniform(
        0, 2 * np.pi, scenario.system.n_elements
    )
    realization = sample_realization(stats, theta, scenario.system.pilot, seed)
    paths.append(dump_complex_matrix(f"{outdir}/realization_g.bin", realization.g))
    paths.append(dump_complex_matrix(f"{outdir}/realization_v.bin", realization.v))
    paths.append(dump_complex_matrix(f"{outdir}/realization_h.bin", realization.h))
    paths.append(dump_complex_matrix(f"{outdir}/realization_y_pilot.bin", realization.y_pilot))
    paths.append(
        write_csv(
            f"{outdir}/realization_theta.csv",
            ["element", "theta_rad"],
            [[i, float(t)] for i, t in enumerate(theta)],
            {"seed": seed},
        )
    )
    return paths
