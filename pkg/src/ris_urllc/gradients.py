"""Analytic gradients of the weighted sum rate with respect to the phases.

Everything is differentiated in the real phase vector theta (the reflection
coefficients e^{j theta} stay unimodular by construction, so no projection or
complex-calculus machinery is needed). Two primitives carry the whole module:

- ``u_g(A, B, b)``: gradient of Tr(A Phi B Phi^H) with Phi = diag(b),
- ``z_g(X, k)``: gradient of Tr(X R_k), which reaches theta only through the
  real scalar Tr(Z_k).

All composite gradients (signal, leakage, interference, SINR, weighted sum
rate) are assembled from these by the chain rule and are validated against
central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelStatistics, PilotSetup, theta_digest, unit_phasor
from .estimation import build_estimator_states, real_trace
from .fbl import LN2
from .sinr import SinrBreakdown, build_breakdown, trace_product

# Divergence guard for the dispersion derivative at vanishing SINR; feasible
# iterates sit far above this, so the guard is dormant on the optimizer path.
SINR_FLOOR = 1e-9

_IMAG_TOL = 1e-9


def _real_vector(vec: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.linalg.norm(vec.real)))
    resid = float(np.linalg.norm(vec.imag))
    if resid > _IMAG_TOL * scale:
        raise ValueError(f"{what}: imaginary residue {resid:.3e} exceeds tolerance")
    return np.ascontiguousarray(vec.real)


def u_g(a: np.ndarray, b: np.ndarray, phasor: np.ndarray) -> np.ndarray:
    """Gradient of Tr(A Phi B Phi^H) in theta, with Phi = diag(phasor).

    Returns -j Phi^H (A o B^T) b + j Phi^T (A^T o B) b* reduced to its real
    part; the imaginary residue must vanish for the Hermitian arguments this
    is used with.
    """
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrices of equal size required, got {a.shape} and {b.shape}")
    if a.shape[0] != len(phasor):
        raise ValueError(f"phase dimension {len(phasor)} does not match {a.shape}")
    m1 = a * b.T
    grad = -1j * phasor.conj() * (m1 @ phasor) + 1j * phasor * (m1.T @ phasor.conj())
    return _real_vector(grad, "u_g")


class GradientWorkspace:
    """Per-phase cache shared by the SINR breakdown and all gradients.

    Built once per theta; every getter below reuses the cached per-user
    filters, traces, and correlation products. Cross-user gradient pieces are
    memoized on first use, so repeated SINR/objective evaluations during a
    line search pay only for the breakdown.
    """

    def __init__(self, stats: ChannelStatistics, pilot: PilotSetup, theta: np.ndarray):
        self.stats = stats
        self.pilot = pilot
        self.theta = np.array(theta, dtype=float)
        self.theta_hash = theta_digest(self.theta)
        self.b = unit_phasor(self.theta)
        if len(self.b) != stats.n_elements:
            raise ValueError(
                f"phase vector length {len(self.b)} does not match {stats.n_elements} elements"
            )
        if np.max(np.abs(np.abs(self.b) - 1.0)) > 1e-14:
            raise AssertionError("reflection coefficients must stay unimodular")

        self.states = build_estimator_states(stats, self.theta, pilot)
        self.breakdown: SinrBreakdown = build_breakdown(stats, self.states, pilot)

        cb = stats.c_bs.mat
        self._cb = cb
        self._cr = stats.c_ris_rx.mat
        self._gain = np.array([stats.beta_br * float(b_ru) for b_ru in stats.beta_ru])
        self._w = [st.w_matrix for st in self.states]
        self._ww = [st.w_matrix @ st.w_matrix for st in self.states]
        self._r = [st.r_filter for st in self.states]
        self._cbr = [cb @ st.r_filter for st in self.states]
        self._trz = np.array([st.z_trace for st in self.states])
        self._tr_cb_r = np.array(
            [real_trace(trace_product(cb, st.r_filter)) for st in self.states]
        )
        # Lazy gradient-side caches.
        self._grad_ready = False
        self._grad_ui_cache: dict[tuple[int, int], np.ndarray] = {}
        self._grad_signal_cache: dict[int, np.ndarray] = {}
        self._grad_leak_cache: dict[int, np.ndarray] = {}

    # -- lazy gradient-side setup ------------------------------------------

    def _ensure_grad_side(self) -> None:
        if self._grad_ready:
            return
        b = self.b
        cr = self._cr
        outer = np.outer(b, b.conj())
        self._phi_c_phiH = [c.mat * outer for c in self.stats.c_ris_user]  # Phi C_k Phi^H
        self._q = cr * outer.conj()  # Phi^H C^R Phi
        self._cu = [c.mat for c in self.stats.c_ris_user]
        self._crpcr = [cr @ p @ cr for p in self._phi_c_phiH]
        self._dtrz = [u_g(cr, cu, b) for cu in self._cu]
        self._grad_ready = True

    # -- primitives ---------------------------------------------------------

    def grad_z_trace(self, user: int) -> np.ndarray:
        """d Tr(Z_k) / d theta = u_g(C^R, C^RU_k)."""
        self._ensure_grad_side()
        return self._dtrz[user]

    def z_g(self, x: np.ndarray, user: int) -> np.ndarray:
        """Gradient of Tr(X R_k): the filter reaches theta only through Tr(Z_k)."""
        self._ensure_grad_side()
        gain = self._gain[user]
        tr_xw = complex(trace_product(x, self._w[user]))
        tr_xww = complex(trace_product(x, self._ww[user]))
        coef = real_trace(gain * (tr_xw - gain * self._trz[user] * tr_xww))
        return coef * self._dtrz[user]

    # -- scalar-term gradients ----------------------------------------------

    def grad_signal(self, user: int) -> np.ndarray:
        """Gradient of the desired-signal coefficient |Tr(A_k)|^2."""
        if user not in self._grad_signal_cache:
            self._ensure_grad_side()
            gain = self._gain[user]
            tr_a = gain * self._trz[user] * self._tr_cb_r[user]
            grad = (
                2.0
                * gain
                * tr_a
                * (
                    self._trz[user] * self.z_g(self._cb, user)
                    + self._tr_cb_r[user] * self._dtrz[user]
                )
            )
            self._grad_signal_cache[user] = grad
        return self._grad_signal_cache[user]

    def grad_trzz_self(self, user: int) -> np.ndarray:
        """Gradient of Tr(Z_k Z_k): two-term chain rule over the phase pairs."""
        self._ensure_grad_side()
        cu = self._cu[user]
        return u_g(self._cr, cu @ self._q @ cu, self.b) + u_g(
            self._crpcr[user], cu, self.b
        )

    def grad_trzz_cross(self, user: int, other: int) -> np.ndarray:
        """Gradient of Tr(Z_k Z_k'), symmetric in the pair.

        Each reflection pair is differentiated exactly once:
        u_g(C^R Phi C_k Phi^H C^R, C_k') + u_g(C^R Phi C_k' Phi^H C^R, C_k).
        """
        self._ensure_grad_side()
        return u_g(self._crpcr[user], self._cu[other], self.b) + u_g(
            self._crpcr[other], self._cu[user], self.b
        )

    def grad_tr_cbrhcbr(self, user: int) -> np.ndarray:
        """Gradient of Tr(C^B R_k^H C^B R_k)."""
        return 2.0 * self.z_g(self._cbr[user] @ self._cb, user)

    def grad_tr_cbrrh(self, user: int) -> np.ndarray:
        """Gradient of Tr(C^B R_k R_k^H)."""
        return 2.0 * self.z_g(self._cbr[user], user)

    def lemma4_gradients(
        self, user: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Gradients of the four composite traces behind the SINR terms."""
        return (
            self.grad_signal(user),
            self.grad_trzz_self(user),
            self.grad_tr_cbrhcbr(user),
            self.grad_tr_cbrrh(user),
        )

    def grad_leakage(self, user: int) -> np.ndarray:
        """Gradient of the self-leakage coefficient (power factor excluded)."""
        if user not in self._grad_leak_cache:
            st = self.states[user]
            tr_zz = real_trace(trace_product(st.z_matrix, st.z_matrix))
            tr_cbr2 = real_trace(
                trace_product(self._cb @ st.r_filter.conj().T, self._cbr[user])
            )
            grad = self._gain[user] ** 2 * (
                tr_cbr2 * self.grad_trzz_self(user) + tr_zz * self.grad_tr_cbrhcbr(user)
            )
            self._grad_leak_cache[user] = grad
        return self._grad_leak_cache[user]

    def grad_interference(self, user: int, other: int) -> np.ndarray:
        """Gradient of the interference coefficient UI_{k,k'} (any pair)."""
        key = (user, other)
        if key not in self._grad_ui_cache:
            self._ensure_grad_side()
            k, kp = user, other
            st_p = self.states[kp]
            c1 = self.stats.beta_br**2 * float(self.stats.beta_ru[k]) * float(
                self.stats.beta_ru[kp]
            )
            c2 = (
                self.pilot.effective_noise_variance
                * self.stats.beta_br
                * float(self.stats.beta_ru[k])
            )
            tr_zz = real_trace(trace_product(self.states[k].z_matrix, st_p.z_matrix))
            tr_cbr2_p = real_trace(
                trace_product(self._cb @ st_p.r_filter.conj().T, self._cbr[kp])
            )
            tr_cbrrh_p = real_trace(trace_product(self._cbr[kp], st_p.r_filter.conj().T))
            grad = (
                2.0 * c1 * tr_zz * self._tr_cb_r[kp] * self.z_g(self._cb, kp)
                + c1 * self._tr_cb_r[kp] ** 2 * self.grad_trzz_cross(k, kp)
                + c1 * tr_cbr2_p * self._trz[k] * self._dtrz[kp]
                + c1 * tr_cbr2_p * self._trz[kp] * self._dtrz[k]
                + 2.0 * c1 * self._trz[k] * self._trz[kp] * self.z_g(
                    self._cbr[kp] @ self._cb, kp
                )
                + c2 * tr_cbrrh_p * self._dtrz[k]
                + 2.0 * c2 * self._trz[k] * self.z_g(self._cbr[kp], kp)
            )
            self._grad_ui_cache[key] = grad
        return self._grad_ui_cache[key]

    # -- SINR and objective gradients ----------------------------------------

    def sinr(self, powers: np.ndarray) -> np.ndarray:
        from .sinr import sinr_vector

        return sinr_vector(self.breakdown, powers)

    def grad_sinr(self, powers: np.ndarray) -> np.ndarray:
        """(K, N) array of d gamma_k / d theta at a fixed power allocation."""
        p = np.asarray(powers, dtype=float)
        bd = self.breakdown
        k_users = bd.n_users
        denom = p * bd.leakage_coeff + bd.interference @ p + bd.noise
        grads = np.empty((k_users, len(self.theta)))
        for k in range(k_users):
            dnum = p[k] * self.grad_signal(k)
            dden = p[k] * self.grad_leakage(k)
            for kp in range(k_users):
                dden = dden + p[kp] * self.grad_interference(k, kp)
            num = p[k] * bd.signal[k]
            grads[k] = dnum / denom[k] - num * dden / denom[k] ** 2
        return grads

    def weighted_sum_rate(
        self, powers: np.ndarray, weights: np.ndarray, alphas: np.ndarray, pilot_ratio: float
    ) -> float:
        gamma = self.sinr(powers)
        dispersion = 1.0 - (1.0 + gamma) ** -2
        nats = np.log1p(gamma) - alphas * np.sqrt(dispersion)
        return float(np.sum(weights * (1.0 - pilot_ratio) / LN2 * nats))

    def grad_wsr(
        self, powers: np.ndarray, weights: np.ndarray, alphas: np.ndarray, pilot_ratio: float
    ) -> np.ndarray:
        """Gradient of the weighted sum of short-packet rate lower bounds."""
        gamma = self.sinr(powers)
        w_bar = weights * (1.0 - pilot_ratio) / LN2
        w_tilde = w_bar * alphas
        gamma_safe = np.maximum(gamma, SINR_FLOOR)
        dispersion_root = np.sqrt(1.0 - (1.0 + gamma_safe) ** -2)
        coef = w_bar / (1.0 + gamma) - w_tilde / ((1.0 + gamma_safe) ** 3 * dispersion_root)
        return coef @ self.grad_sinr(powers)


def finite_difference(
    fn, theta: np.ndarray, step: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function of theta.

    The independent oracle used by the tests; kept in the library so the
    command-line gradient check reports against the identical reference.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (fn(up) - fn(dn)) / (2.0 * step)
    return grad
