"""Shared scenario builders for the test suite."""

import numpy as np
import pytest

from ris_urllc.channel import ChannelStatistics, CorrelationMatrix, PilotSetup
from ris_urllc.fbl import BlocklengthBudget, QosTarget
from ris_urllc.scenario import (
    SystemConfig,
    noise_power,
    standard_geometry,
    statistics_from_geometry,
)

REFERENCE_NOISE_W = noise_power(2e6)


def reference_stats(
    n_antennas: int,
    n_elements: int,
    n_users: int,
    seed: int = 0,
    correlated: bool = True,
) -> ChannelStatistics:
    """Statistics on the reference layout with seeded user placement."""
    rng = np.random.default_rng(seed)
    geom = standard_geometry(n_users, rng)
    return statistics_from_geometry(geom, n_antennas, n_elements, correlated=correlated)


def reference_pilot(tau: int = 5, power: float = 0.1) -> PilotSetup:
    return PilotSetup(tau=tau, power=power, noise_power=REFERENCE_NOISE_W)


def reference_system(
    n_antennas: int,
    n_elements: int,
    n_users: int,
    seed: int = 0,
    power_total: float = 1.0,
    power_pilot: float = 0.1,
    rate_req: float = 0.2,
    dep: float = 1e-7,
    blocklength: int = 200,
) -> SystemConfig:
    """System scalars with seeded per-user weights drawn from (0, 1]."""
    rng = np.random.default_rng(seed)
    weights = 1.0 - rng.uniform(0.0, 1.0, size=n_users)
    targets = [QosTarget(rate_req=rate_req, dep=dep, weight=float(w)) for w in weights]
    return SystemConfig(
        n_antennas=n_antennas,
        n_elements=n_elements,
        n_users=n_users,
        budget=BlocklengthBudget(blocklength=blocklength, pilot_symbols=max(5, n_users)),
        power_total=power_total,
        power_pilot=power_pilot,
        noise_power=REFERENCE_NOISE_W,
        targets=targets,
    )


def random_unit_diag_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian PSD matrix normalized to a unit diagonal."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    c = a @ a.conj().T + dim * np.eye(dim)
    d = np.sqrt(np.real(np.diagonal(c)))
    c = c / np.outer(d, d)
    c = 0.5 * (c + c.conj().T)
    np.fill_diagonal(c, 1.0)
    return c


def random_stats(
    n_antennas: int,
    n_elements: int,
    n_users: int,
    rng: np.random.Generator,
) -> ChannelStatistics:
    """Unstructured correlated statistics for gradient and MC stress tests."""
    c_bs = CorrelationMatrix(kind="generic", mat=random_unit_diag_hermitian(n_antennas, rng))
    c_ris = CorrelationMatrix(kind="generic", mat=random_unit_diag_hermitian(n_elements, rng))
    c_users = [
        CorrelationMatrix(kind="generic", mat=random_unit_diag_hermitian(n_elements, rng))
        for _ in range(n_users)
    ]
    return ChannelStatistics(
        c_bs=c_bs,
        c_ris_rx=c_ris,
        c_ris_user=c_users,
        beta_br=float(rng.uniform(0.5, 2.0)),
        beta_ru=rng.uniform(0.5, 2.0, size=n_users),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid and report.when == "call":
                name = nodeid.split("::")[-1].replace("test_criterion_", "criterion ")
                lines.append((name, outcome.upper()))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{name.replace('_', ' ')}: {verdict}")
