"""LMMSE estimation of the cascaded channel and its normalized MSE.

The cascade h_k = G diag(e^{j theta}) v_k is double-Gaussian, so the linear
MMSE filter built from first and second moments is used instead of the exact
conditional mean. Everything here depends on the phase configuration only
through the reflected-correlation product Z_k and its trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import (
    ChannelStatistics,
    CorrelationMatrix,
    PilotSetup,
    theta_digest,
    unit_phasor,
)

# Traces of Hermitian-congruent products are real in exact arithmetic; larger
# imaginary residues indicate a construction bug rather than roundoff.
IMAG_RESIDUE_TOL = 1e-8


class StaleStateError(RuntimeError):
    """Estimator state was built for a different phase configuration."""


def real_trace(value: complex, *, atol: float = IMAG_RESIDUE_TOL) -> float:
    """Reduce a theoretically-real trace to its real part, checking the residue."""
    scale = max(1.0, abs(value))
    if abs(value.imag) > atol * scale:
        raise ValueError(f"imaginary residue {value.imag:.3e} too large for trace {value:.6e}")
    return float(value.real)


def compute_z(
    theta: np.ndarray,
    c_ris_user: CorrelationMatrix | np.ndarray,
    c_ris_rx: CorrelationMatrix | np.ndarray,
) -> tuple[np.ndarray, float]:
    """Reflected-correlation product Z = Phi C^RU Phi^H C^R and its trace.

    The trace is real whenever both correlations are Hermitian PSD; the
    imaginary residue is checked and dropped.
    """
    cu = c_ris_user.mat if isinstance(c_ris_user, CorrelationMatrix) else np.asarray(c_ris_user)
    cr = c_ris_rx.mat if isinstance(c_ris_rx, CorrelationMatrix) else np.asarray(c_ris_rx)
    if cu.shape != cr.shape:
        raise ValueError(f"correlation shapes differ: {cu.shape} vs {cr.shape}")
    if cu.shape[0] != len(theta):
        raise ValueError(f"phase vector length {len(theta)} does not match dim {cu.shape[0]}")
    b = unit_phasor(theta)
    reflected = cu * np.outer(b, b.conj())  # Phi C^RU Phi^H
    z = reflected @ cr
    trace = real_trace(complex(np.trace(z)), atol=1e-10)
    if trace < -1e-10:
        raise ValueError(f"trace of Z must be nonnegative, got {trace}")
    return z, trace


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Per-user LMMSE quantities for one phase configuration.

    r_filter is the estimation filter (h_hat = R y), w_matrix the resolvent
    W = C^B (bb Tr(Z) C^B + sigma^2/(tau P_p) I)^-1 it factors through, so
    R = bb Tr(Z) W with bb the product of the two path-loss gains.
    """

    user: int
    z_matrix: np.ndarray
    z_trace: float
    r_filter: np.ndarray
    w_matrix: np.ndarray
    theta_hash: str

    def require_fresh(self, theta_hash: str) -> None:
        if self.theta_hash != theta_hash:
            raise StaleStateError(
                f"estimator state for user {self.user} was built for phases "
                f"{self.theta_hash}, not {theta_hash}"
            )


def lmmse_filter(
    stats: ChannelStatistics,
    z_matrix: np.ndarray,
    z_trace: float,
    pilot: PilotSetup,
    user: int,
    theta_hash: str = "",
) -> EstimatorState:
    """LMMSE filter for one user from large-scale statistics.

    The regularized Gram matrix is Hermitian positive definite for any
    positive noise power, so the filter is obtained from a linear solve
    rather than an explicit inverse.
    """
    if pilot.noise_power <= 0.0:
        raise ValueError(f"noise power must be positive, got {pilot.noise_power}")
    gain = stats.beta_br * float(stats.beta_ru[user])
    c_b = stats.c_bs.mat
    m = c_b.shape[0]
    gram = gain * z_trace * c_b + pilot.effective_noise_variance * np.eye(m)
    w = scipy.linalg.solve(gram, c_b, assume_a="pos")
    r = gain * z_trace * w
    return EstimatorState(
        user=user,
        z_matrix=z_matrix,
        z_trace=z_trace,
        r_filter=r,
        w_matrix=w,
        theta_hash=theta_hash,
    )


def build_estimator_states(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilot: PilotSetup,
) -> list[EstimatorState]:
    """LMMSE states for all users at the given phase configuration."""
    digest = theta_digest(theta)
    states = []
    for k in range(stats.n_users):
        z, tr = compute_z(theta, stats.c_ris_user[k], stats.c_ris_rx)
        states.append(lmmse_filter(stats, z, tr, pilot, k, theta_hash=digest))
    return states


def estimate(r_filter: np.ndarray, y_pilot: np.ndarray) -> np.ndarray:
    """Apply the LMMSE filter to a despread pilot observation."""
    return r_filter @ y_pilot


def nmse(r_filter: np.ndarray, c_bs: CorrelationMatrix | np.ndarray) -> float:
    """Normalized MSE of the cascaded-channel estimate.

    NMSE = Tr((I - R) C^B) / Tr(C^B), real with a bounded imaginary residue.
    """
    c_b = c_bs.mat if isinstance(c_bs, CorrelationMatrix) else np.asarray(c_bs)
    m = c_b.shape[0]
    num = complex(np.trace((np.eye(m) - r_filter) @ c_b))
    den = real_trace(complex(np.trace(c_b)))
    return real_trace(num, atol=1e-10) / den
