"""Finite-blocklength rate math for short-packet transmission.

Scalar building blocks shared by the SINR analysis and the optimizer:
Gaussian Q-function and its inverse, the channel-dispersion penalty, the
rate kernel expressed in inverse SINR, and the inversion that turns a
(rate, reliability) requirement into a minimum SINR.

All functions are pure and operate on floats; vectorized callers go through
numpy's broadcasting where noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfc

# SINR above which the log-domain surrogate of the dispersion term is concave,
# so the successive convex approximation used by the power step is valid.
MIN_SCA_SINR = (math.sqrt(17.0) - 3.0) / 4.0

LN2 = math.log(2.0)


class InfeasibleTargetError(ValueError):
    """A (rate, reliability) requirement exceeds what any finite SINR delivers."""


def gaussian_q(x: float) -> float:
    """Standard Gaussian tail probability Q(x) = P[N(0,1) > x]."""
    return 0.5 * erfc(x / math.sqrt(2.0))


def gaussian_q_inv(eps: float) -> float:
    """Inverse Gaussian tail, solved by bisection on Q to 1e-12 absolute.

    Parameters
    ----------
    eps : float
        Tail probability, must lie strictly inside (0, 1).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"tail probability must be in (0, 1), got {eps}")
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        q = gaussian_q(mid)
        if q == eps:
            return mid
        if q > eps:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def channel_dispersion(gamma: float) -> float:
    """Dispersion V = 1 - (1 + gamma)^-2 of the Gaussian channel at SINR gamma."""
    return 1.0 - (1.0 + gamma) ** -2


def fbl_rate(gamma: float, eps: float, blocklength: float, pilot_ratio: float) -> float:
    """Normal-approximation achievable rate at finite blocklength, bits/s/Hz.

    R = (1 - eta) log2(1 + gamma) - (Q^-1(eps)/ln 2) sqrt((1 - eta) V / L).

    The value may be negative for SINRs below the zero-rate boundary; callers
    that report rates are responsible for clamping.

    Parameters
    ----------
    gamma : float
        Linear SINR, >= 0.
    eps : float
        Decoding error probability target.
    blocklength : float
        Total number of channel uses L.
    pilot_ratio : float
        Fraction eta = tau / L of the block spent on pilots.
    """
    if gamma < 0.0:
        raise ValueError(f"SINR must be nonnegative, got {gamma}")
    penalty = (gaussian_q_inv(eps) / LN2) * math.sqrt(
        (1.0 - pilot_ratio) * channel_dispersion(gamma) / blocklength
    )
    return (1.0 - pilot_ratio) * math.log2(1.0 + gamma) - penalty


def rate_kernel(x: float, alpha: float) -> float:
    """Rate kernel in nats as a function of inverse SINR x = 1/gamma.

    f(x) = ln(1 + 1/x) - alpha sqrt((2x + 1) / (1 + x)^2). Decreasing and
    convex for x in (0, g^-1(alpha)], where it crosses zero at the right end.
    """
    if x <= 0.0:
        raise ValueError(f"inverse SINR must be positive, got {x}")
    return math.log1p(1.0 / x) - alpha * math.sqrt(2.0 * x + 1.0) / (1.0 + x)


def zero_rate_alpha(x: float) -> float:
    """Dispersion coefficient alpha at which the rate kernel vanishes at x.

    g(x) = (1 + x) ln(1 + 1/x) / sqrt(2x + 1); strictly decreasing in x.
    """
    if x <= 0.0:
        raise ValueError(f"inverse SINR must be positive, got {x}")
    return (1.0 + x) * math.log1p(1.0 / x) / math.sqrt(2.0 * x + 1.0)


def zero_rate_inverse_sinr(alpha: float) -> float:
    """Inverse of :func:`zero_rate_alpha`: the inverse SINR of the zero-rate point.

    Bisection on [1e-12, 1e12] with monotonicity guards, 1e-12 tolerance.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    lo, hi = 1e-12, 1e12
    if zero_rate_alpha(lo) < alpha:
        raise ValueError(f"alpha={alpha} above the bracketable range")
    if zero_rate_alpha(hi) > alpha:
        raise ValueError(f"alpha={alpha} below the bracketable range")
    for _ in range(200):
        mid = math.sqrt(lo * hi)  # geometric midpoint: the bracket spans 24 decades
        if zero_rate_alpha(mid) > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * mid:
            break
    return 0.5 * (lo + hi)


def rate_kernel_inverse(y: float, alpha: float) -> float:
    """Solve rate_kernel(x, alpha) = y for x on the feasible branch.

    Valid for y >= 0; the kernel decreases from +inf at x -> 0 to zero at
    g^-1(alpha), so the solution is unique.
    """
    if y < 0.0:
        raise ValueError(f"kernel target must be nonnegative, got {y}")
    hi = zero_rate_inverse_sinr(alpha) if alpha > 0.0 else None
    if y == 0.0:
        if hi is None:
            raise InfeasibleTargetError("zero-rate point is at infinite inverse SINR for alpha = 0")
        return hi
    if hi is None:
        # alpha = 0 reduces to the Shannon inversion ln(1 + 1/x) = y.
        return 1.0 / math.expm1(y)
    lo = 1e-12
    if rate_kernel(lo, alpha) < y:
        raise InfeasibleTargetError(f"kernel target {y} unreachable even at inverse SINR {lo}")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if rate_kernel(mid, alpha) > y:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * mid:
            break
    return 0.5 * (lo + hi)


def rate_lower_bound(gamma_hat: float, alpha: float, pilot_ratio: float) -> float:
    """Jensen lower bound on the average short-packet rate, bits/s/Hz.

    Evaluates ((1 - eta)/ln 2) f(1/gamma_hat) in the algebraically equivalent
    SINR form, which is finite at gamma_hat = 0. Negative values indicate an
    SINR below the zero-rate boundary and are returned as-is.
    """
    if gamma_hat < 0.0:
        raise ValueError(f"SINR must be nonnegative, got {gamma_hat}")
    nats = math.log1p(gamma_hat) - alpha * math.sqrt(channel_dispersion(gamma_hat))
    return (1.0 - pilot_ratio) / LN2 * nats


def required_sinr(rate_req: float, alpha: float, pilot_ratio: float) -> float:
    """Minimum SINR meeting a rate requirement at the given dispersion level.

    Inverts the rate kernel at y = rate_req ln2 / (1 - eta); the reliability
    target enters through alpha. Raises :class:`InfeasibleTargetError` when no
    finite SINR achieves the requirement.
    """
    if rate_req < 0.0:
        raise ValueError(f"rate requirement must be nonnegative, got {rate_req}")
    y = rate_req * LN2 / (1.0 - pilot_ratio)
    return 1.0 / rate_kernel_inverse(y, alpha)


@dataclass(frozen=True)
class QosTarget:
    """Per-user requirement: minimum rate, decoding error probability, weight."""

    rate_req: float
    dep: float
    weight: float

    def __post_init__(self) -> None:
        if not 0.0 < self.dep < 0.5:
            raise ValueError(f"decoding error probability must be in (0, 0.5), got {self.dep}")
        if self.rate_req < 0.0:
            raise ValueError(f"rate requirement must be nonnegative, got {self.rate_req}")
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"weight must be in (0, 1], got {self.weight}")


@dataclass(frozen=True)
class BlocklengthBudget:
    """Split of the transmission block between pilots and data."""

    blocklength: int
    pilot_symbols: int

    def __post_init__(self) -> None:
        if not 0 < self.pilot_symbols < self.blocklength:
            raise ValueError(
                f"pilot symbols must be in (0, blocklength), got "
                f"{self.pilot_symbols} of {self.blocklength}"
            )

    @property
    def pilot_ratio(self) -> float:
        """eta = tau / L."""
        return self.pilot_symbols / self.blocklength

    def dispersion_coefficient(self, eps: float) -> float:
        """alpha = Q^-1(eps) / sqrt(L (1 - eta)) for a reliability target eps."""
        return gaussian_q_inv(eps) / math.sqrt(
            self.blocklength * (1.0 - self.pilot_ratio)
        )
