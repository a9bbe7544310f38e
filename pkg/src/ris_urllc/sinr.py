"""Closed-form deterministic-equivalent SINR under maximum-ratio transmission.

Channel hardening at large antenna counts lets every expectation in the
per-user SINR be written in terms of large-scale statistics only: a desired
signal power, a self-leakage coefficient, a K x K interference table, and the
noise floor. The Monte-Carlo module re-estimates each term independently; the
two must agree within sampling error.

Traces of matrix products are evaluated as elementwise sums (Tr(AB) equals
sum(A * B^T)) to avoid forming products whose only use is their trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelStatistics, PilotSetup
from .estimation import EstimatorState, real_trace


def trace_product(a: np.ndarray, b: np.ndarray) -> complex:
    """Tr(A B) without materializing the product."""
    return complex(np.sum(a * b.T))


@dataclass(frozen=True, eq=False)
class SinrBreakdown:
    """Per-user deterministic-equivalent terms for a fixed phase configuration.

    signal[k] is the desired power coefficient |Tr(A_k)|^2, leakage_coeff[k]
    multiplies the user's own transmit power, interference[k, k'] multiplies
    power p_k' in user k's denominator (the diagonal is the printed
    interference expression evaluated at k' = k; together with the leakage
    term it reproduces the variance of the effective channel gain), and noise
    is the receiver noise power.
    """

    signal: np.ndarray
    leakage_coeff: np.ndarray
    interference: np.ndarray
    noise: float
    theta_hash: str

    def __post_init__(self) -> None:
        if np.any(self.signal < 0) or np.any(self.leakage_coeff < 0) or np.any(
            self.interference < 0
        ):
            raise ValueError("every deterministic-equivalent term must be a nonnegative power")

    @property
    def n_users(self) -> int:
        return len(self.signal)


def signal_term(state: EstimatorState, stats: ChannelStatistics, user: int) -> float:
    """Desired-signal power coefficient |Tr(A_k)|^2.

    A_k = beta_ru beta_br Tr(Z_k) R_k C^B; the trace is real for Hermitian
    statistics, so the squared magnitude is a plain square.
    """
    gain = stats.beta_br * float(stats.beta_ru[user])
    tr = real_trace(trace_product(state.r_filter, stats.c_bs.mat))
    return (gain * state.z_trace * tr) ** 2


def leakage_term(state: EstimatorState, stats: ChannelStatistics, user: int) -> float:
    """Self-leakage coefficient multiplying the user's own power.

    (beta_br beta_ru)^2 Tr(Z_k Z_k) Tr(C^B R_k^H C^B R_k); the caller supplies
    the power factor.
    """
    gain = stats.beta_br * float(stats.beta_ru[user])
    tr_zz = real_trace(trace_product(state.z_matrix, state.z_matrix))
    cbr = stats.c_bs.mat @ state.r_filter
    tr_cbr2 = real_trace(trace_product(stats.c_bs.mat @ state.r_filter.conj().T, cbr))
    return gain**2 * tr_zz * tr_cbr2


def interference_term(
    state_k: EstimatorState,
    state_other: EstimatorState,
    stats: ChannelStatistics,
    pilot: PilotSetup,
) -> float:
    """Interference coefficient UI_{k,k'} from user k''s beam onto user k.

    Valid for any pair including k' = k: the diagonal entry is what the
    denominator assembly adds on top of the leakage coefficient so that the
    self terms reproduce the variance of the effective gain (confirmed by the
    Monte-Carlo oracle).
    """
    k, kp = state_k.user, state_other.user
    bsq = stats.beta_br**2 * float(stats.beta_ru[k]) * float(stats.beta_ru[kp])
    cbr_p = stats.c_bs.mat @ state_other.r_filter
    tr_cbr_p = real_trace(trace_product(stats.c_bs.mat, state_other.r_filter))
    tr_zz = real_trace(trace_product(state_k.z_matrix, state_other.z_matrix))
    tr_cbr2_p = real_trace(
        trace_product(stats.c_bs.mat @ state_other.r_filter.conj().T, cbr_p)
    )
    tr_cbrrh_p = real_trace(trace_product(cbr_p, state_other.r_filter.conj().T))
    beamformed = bsq * (tr_cbr_p**2 * tr_zz + state_other.z_trace * tr_cbr2_p * state_k.z_trace)
    pilot_noise = (
        pilot.effective_noise_variance
        * stats.beta_br
        * float(stats.beta_ru[k])
        * tr_cbrrh_p
        * state_k.z_trace
    )
    return beamformed + pilot_noise


def build_breakdown(
    stats: ChannelStatistics,
    states: list[EstimatorState],
    pilot: PilotSetup,
) -> SinrBreakdown:
    """Assemble all deterministic-equivalent terms for one phase configuration.

    Every state must have been built for the same phase vector; a mismatch
    raises :class:`~ris_urllc.estimation.StaleStateError`.
    """
    digest = states[0].theta_hash
    for state in states:
        state.require_fresh(digest)
    k = len(states)
    signal = np.array([signal_term(states[i], stats, i) for i in range(k)])
    leakage = np.array([leakage_term(states[i], stats, i) for i in range(k)])
    interference = np.array(
        [[interference_term(states[i], states[j], stats, pilot) for j in range(k)] for i in range(k)]
    )
    return SinrBreakdown(
        signal=signal,
        leakage_coeff=leakage,
        interference=interference,
        noise=pilot.noise_power,
        theta_hash=digest,
    )


def sinr_hat(breakdown: SinrBreakdown, powers: np.ndarray, user: int) -> float:
    """Deterministic-equivalent SINR of one user at a power allocation."""
    return float(sinr_vector(breakdown, powers)[user])


def sinr_vector(breakdown: SinrBreakdown, powers: np.ndarray) -> np.ndarray:
    """Deterministic-equivalent SINRs of all users.

    gamma_k = p_k s_k / (p_k l_k + sum_k' p_k' UI_{k,k'} + noise); the sum
    over k' includes k' = k.
    """
    p = np.asarray(powers, dtype=float)
    if p.shape != breakdown.signal.shape:
        raise ValueError(f"power vector shape {p.shape} does not match {breakdown.signal.shape}")
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    denom = p * breakdown.leakage_coeff + breakdown.interference @ p + breakdown.noise
    return p * breakdown.signal / denom
