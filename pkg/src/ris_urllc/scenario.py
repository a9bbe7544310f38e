"""Scenario assembly: geometry, large-scale statistics, and system scalars.

The reference layout puts the base station at the origin, the reflecting
surface 50 m away on the y-axis, and the users on a semicircle of radius 5 m
whose center sits 10 m beyond the surface. Direct BS-user links are assumed
blocked, which is the deployment the surface exists to fix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    ChannelStatistics,
    Geometry,
    PilotSetup,
    build_exponential_correlation,
    build_sinc_correlation,
    identity_correlation,
    path_loss,
    place_users_on_semicircle,
)
from .fbl import BlocklengthBudget, QosTarget

BOLTZMANN = 1.381e-23
NOISE_TEMPERATURE_K = 290.0


def noise_power(bandwidth_hz: float, noise_figure_db: float = 9.0) -> float:
    """Thermal noise power in watts: B * k_B * 290 * 10^(NF/10)."""
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return bandwidth_hz * BOLTZMANN * NOISE_TEMPERATURE_K * 10.0 ** (noise_figure_db / 10.0)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """All scalars of one scenario instance."""

    n_antennas: int
    n_elements: int
    n_users: int
    budget: BlocklengthBudget
    power_total: float
    power_pilot: float
    noise_power: float
    targets: list[QosTarget]

    def __post_init__(self) -> None:
        if min(self.n_antennas, self.n_elements, self.n_users) < 1:
            raise ValueError("antenna, element, and user counts must be positive")
        if self.budget.pilot_symbols < self.n_users:
            raise ValueError(
                f"pilot length {self.budget.pilot_symbols} cannot keep "
                f"{self.n_users} users orthogonal"
            )
        if self.power_total <= 0.0 or self.power_pilot <= 0.0:
            raise ValueError("power budgets must be positive")
        if self.noise_power <= 0.0:
            raise ValueError("noise power must be positive")
        if len(self.targets) != self.n_users:
            raise ValueError("one QoS target per user is required")

    @property
    def pilot(self) -> PilotSetup:
        return PilotSetup(
            tau=self.budget.pilot_symbols,
            power=self.power_pilot,
            noise_power=self.noise_power,
        )

    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.targets])

    def rate_requirements(self) -> np.ndarray:
        return np.array([t.rate_req for t in self.targets])

    def dispersion_coefficients(self) -> np.ndarray:
        return np.array([self.budget.dispersion_coefficient(t.dep) for t in self.targets])


@dataclass(frozen=True, eq=False)
class PathLossModel:
    """Reference gain and exponents of the two hops."""

    beta0: float = 1e-2
    bs_ris_exponent: float = 2.2
    ris_user_exponent: float = 2.1


def standard_geometry(
    n_users: int,
    rng: np.random.Generator,
    bs_ris_distance: float = 50.0,
    circle_offset: float = 10.0,
    circle_radius: float = 5.0,
    spacing_wavelengths: float = 0.25,
    wavelength: float = 0.1,
) -> Geometry:
    """Reference layout with seeded user placement on the semicircle."""
    bs = np.zeros(2)
    ris = np.array([0.0, bs_ris_distance])
    users = place_users_on_semicircle(n_users, ris, circle_offset, circle_radius, rng)
    return Geometry(
        bs_position=bs,
        ris_position=ris,
        user_positions=users,
        element_spacing=spacing_wavelengths * wavelength,
        wavelength=wavelength,
    )


def statistics_from_geometry(
    geometry: Geometry,
    n_antennas: int,
    n_elements: int,
    bs_correlation: complex = 0.5,
    correlated: bool = True,
    path_loss_model: PathLossModel = PathLossModel(),
) -> ChannelStatistics:
    """Large-scale statistics for a layout.

    ``correlated=False`` switches every correlation matrix to the identity,
    the independent-elements baseline used when quantifying what spatial
    correlation buys the estimator.
    """
    plm = path_loss_model
    beta_br = path_loss(geometry.bs_ris_distance(), plm.bs_ris_exponent, plm.beta0)
    beta_ru = np.array(
        [path_loss(d, plm.ris_user_exponent, plm.beta0) for d in geometry.ris_user_distances()]
    )
    n_users = len(beta_ru)
    if correlated:
        c_bs = build_exponential_correlation(n_antennas, bs_correlation)
        c_ris = build_sinc_correlation(n_elements, geometry.element_spacing, geometry.wavelength)
        c_users = [c_ris] * n_users
    else:
        c_bs = identity_correlation(n_antennas)
        c_ris = identity_correlation(n_elements)
        c_users = [c_ris] * n_users
    return ChannelStatistics(
        c_bs=c_bs,
        c_ris_rx=c_ris,
        c_ris_user=c_users,
        beta_br=beta_br,
        beta_ru=beta_ru,
    )
