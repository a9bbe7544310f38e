"""Spatial correlation models, path loss, and correlated channel sampling.

The downlink runs through a cascade: an M-antenna base station reaches an
N-element reflecting surface over a correlated Rayleigh channel, and the
surface reaches each single-antenna user over another one. Large-scale state
(correlation matrices and path-loss scalars) is built once per scenario;
small-scale realizations are drawn from it for the Monte-Carlo oracles.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

PSD_EIGENVALUE_FLOOR = -1e-10


class NotPositiveSemidefiniteError(ValueError):
    """Matrix eigenvalues fall below the tolerated numerical floor."""


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Hermitian unit-diagonal correlation matrix with a construction tag.

    Validated on construction: Hermitian, unit diagonal, and positive
    semidefinite up to a -1e-10 eigenvalue floor (sub-wavelength element
    spacing makes the sinc model provably rank-deficient, so small negative
    eigenvalues are expected and later clamped by :func:`psd_factor`).
    """

    kind: str
    mat: np.ndarray

    def __post_init__(self) -> None:
        m = self.mat
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"correlation matrix must be square, got shape {m.shape}")
        if not np.array_equal(m, m.conj().T):
            raise ValueError("correlation matrix must be exactly Hermitian by construction")
        if not np.allclose(np.diagonal(m), 1.0, rtol=0, atol=1e-14):
            raise ValueError("correlation matrix must have unit diagonal")
        min_eig = float(np.linalg.eigvalsh(m)[0])
        if min_eig < PSD_EIGENVALUE_FLOOR:
            raise NotPositiveSemidefiniteError(
                f"minimum eigenvalue {min_eig:.3e} below floor {PSD_EIGENVALUE_FLOOR:.0e}"
            )

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def build_exponential_correlation(dim: int, r: complex) -> CorrelationMatrix:
    """Exponential correlation between receive branches: entry(i, j) = r^(j-i), i <= j.

    The lower triangle is the conjugate mirror, making the result exactly
    Hermitian. |r| <= 1 is required for positive semidefiniteness.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if abs(r) > 1.0:
        raise ValueError(f"correlation coefficient must satisfy |r| <= 1, got |r|={abs(r)}")
    r = complex(r)
    mat = np.eye(dim, dtype=complex)
    for i in range(dim):
        for j in range(i + 1, dim):
            mat[i, j] = r ** (j - i)
            mat[j, i] = np.conj(mat[i, j])
    if r.imag == 0.0:
        mat = mat.real.astype(float)
    return CorrelationMatrix(kind="bs_exponential", mat=mat)


def element_grid(n_elements: int, spacing: float) -> np.ndarray:
    """Positions of a square reflecting array in the y-z plane, row-major.

    Element i (0-based) sits at [0, (i mod side) d, floor(i / side) d].
    """
    side = round(np.sqrt(n_elements))
    if side * side != n_elements:
        raise ValueError(f"element count must be a perfect square, got {n_elements}")
    idx = np.arange(n_elements)
    pos = np.zeros((n_elements, 3))
    pos[:, 1] = (idx % side) * spacing
    pos[:, 2] = (idx // side) * spacing
    return pos


def build_sinc_correlation(n_elements: int, spacing: float, wavelength: float) -> CorrelationMatrix:
    """Isotropic-scattering correlation between reflecting elements.

    entry(i, j) = sinc(2 ||u_i - u_j|| / lambda) with sinc(x) = sin(pi x)/(pi x)
    over the square grid of :func:`element_grid`. Real symmetric by construction.
    """
    if spacing <= 0.0 or wavelength <= 0.0:
        raise ValueError("element spacing and wavelength must be positive")
    pos = element_grid(n_elements, spacing)
    dists = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    mat = np.sinc(2.0 * dists / wavelength)  # numpy sinc is sin(pi x)/(pi x)
    mat = 0.5 * (mat + mat.T)  # distances are symmetric; enforce bit-exactness
    np.fill_diagonal(mat, 1.0)
    return CorrelationMatrix(kind="ris_sinc", mat=mat)


def identity_correlation(dim: int) -> CorrelationMatrix:
    """Uncorrelated branches; the paper-style 'independent' baseline."""
    return CorrelationMatrix(kind="identity", mat=np.eye(dim))


def path_loss(distance: float, exponent: float, beta0: float) -> float:
    """Distance-based power gain beta0 * distance^(-exponent)."""
    if distance <= 0.0:
        raise ValueError(f"distance must be positive, got {distance}")
    return beta0 * distance ** (-exponent)


def psd_factor(c: CorrelationMatrix | np.ndarray) -> np.ndarray:
    """Factor F with F F^H equal to the eigenvalue-clamped matrix.

    Eigendecomposition with negatives clamped at zero; raises
    :class:`NotPositiveSemidefiniteError` below the -1e-10 floor. The
    reconstruction error ||F F^H - C||_F stays within 1e-8 * dim.
    """
    mat = c.mat if isinstance(c, CorrelationMatrix) else np.asarray(c)
    eigvals, eigvecs = np.linalg.eigh(mat)
    if float(eigvals[0]) < PSD_EIGENVALUE_FLOOR:
        raise NotPositiveSemidefiniteError(
            f"minimum eigenvalue {eigvals[0]:.3e} below floor {PSD_EIGENVALUE_FLOOR:.0e}"
        )
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


@dataclass(frozen=True, eq=False)
class Geometry:
    """Scene layout in meters; 2-D coordinates in the propagation plane."""

    bs_position: np.ndarray
    ris_position: np.ndarray
    user_positions: np.ndarray  # (K, 2)
    element_spacing: float
    wavelength: float

    def __post_init__(self) -> None:
        d_br = float(np.linalg.norm(self.ris_position - self.bs_position))
        if d_br <= 0.0:
            raise ValueError("BS and RIS must not coincide")
        if np.any(self.ris_user_distances() <= 0.0):
            raise ValueError("users must not coincide with the RIS")

    def bs_ris_distance(self) -> float:
        return float(np.linalg.norm(self.ris_position - self.bs_position))

    def ris_user_distances(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.ris_position[None, :], axis=1)


def place_users_on_semicircle(
    n_users: int,
    ris_position: np.ndarray,
    center_offset: float,
    radius: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw user positions uniformly on a semicircle beyond the RIS.

    The circle center sits ``center_offset`` meters past the RIS along the
    BS-RIS axis; angles are uniform over the half facing the RIS, so the
    distances to it span [offset - radius, sqrt(offset^2 + radius^2)].
    """
    center = ris_position + np.array([0.0, center_offset])
    angles = rng.uniform(np.pi, 2.0 * np.pi, size=n_users)
    return center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


@dataclass(frozen=True, eq=False)
class ChannelStatistics:
    """Large-scale channel state: correlations and path-loss gains.

    c_bs is the M x M base-station correlation, c_ris_rx the N x N receive
    correlation of the surface, and c_ris_user the per-user N x N transmit
    correlations. beta_br and beta_ru are the corresponding linear power gains.
    """

    c_bs: CorrelationMatrix
    c_ris_rx: CorrelationMatrix
    c_ris_user: list[CorrelationMatrix]
    beta_br: float
    beta_ru: np.ndarray

    # Cached PSD factors; sampling uses them on every draw.
    _f_bs: np.ndarray = field(init=False, repr=False, compare=False)
    _f_ris_rx: np.ndarray = field(init=False, repr=False, compare=False)
    _f_ris_user: list[np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.beta_br <= 0.0:
            raise ValueError(f"BS-RIS gain must be positive, got {self.beta_br}")
        if np.any(np.asarray(self.beta_ru) <= 0.0):
            raise ValueError("every RIS-user gain must be positive")
        if len(self.c_ris_user) != len(self.beta_ru):
            raise ValueError("one RIS-user correlation per user is required")
        n = self.c_ris_rx.dim
        for c in self.c_ris_user:
            if c.dim != n:
                raise ValueError("RIS-side correlation dimensions must agree")
        object.__setattr__(self, "_f_bs", psd_factor(self.c_bs))
        object.__setattr__(self, "_f_ris_rx", psd_factor(self.c_ris_rx))
        object.__setattr__(self, "_f_ris_user", [psd_factor(c) for c in self.c_ris_user])

    @property
    def n_antennas(self) -> int:
        return self.c_bs.dim

    @property
    def n_elements(self) -> int:
        return self.c_ris_rx.dim

    @property
    def n_users(self) -> int:
        return len(self.c_ris_user)


@dataclass(frozen=True)
class PilotSetup:
    """Uplink training parameters: pilot length, pilot power, noise power."""

    tau: int
    power: float
    noise_power: float

    def __post_init__(self) -> None:
        if self.tau < 1:
            raise ValueError(f"pilot length must be >= 1, got {self.tau}")
        if self.power <= 0.0:
            raise ValueError(f"pilot power must be positive, got {self.power}")
        if self.noise_power < 0.0:
            raise ValueError(f"noise power must be nonnegative, got {self.noise_power}")

    @property
    def effective_noise_variance(self) -> float:
        """Per-antenna noise variance of the despread pilot observation."""
        return self.noise_power / (self.tau * self.power)


def theta_digest(theta: np.ndarray) -> str:
    """Stable fingerprint of a phase vector, used for staleness checks."""
    return hashlib.sha256(np.ascontiguousarray(theta, dtype=float).tobytes()).hexdigest()[:16]


def unit_phasor(theta: np.ndarray) -> np.ndarray:
    """b = exp(j theta); the reflection matrix is diag(b)."""
    return np.exp(1j * np.asarray(theta, dtype=float))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One small-scale draw of the cascade plus despread pilot observations."""

    g: np.ndarray  # (M, N) BS-RIS channel
    v: np.ndarray  # (K, N) RIS-user channels
    h: np.ndarray  # (K, M) cascaded channels h_k = G diag(e^{j theta}) v_k
    pilot_noise: np.ndarray  # (K, M) pre-scaled effective pilot noise
    theta_hash: str

    @property
    def y_pilot(self) -> np.ndarray:
        """Despread per-user pilot observations y_k = h_k + noise."""
        return self.h + self.pilot_noise


def _complex_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_batch(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilot: PilotSetup,
    rng: np.random.Generator,
    n_draws: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``n_draws`` correlated realizations at once.

    Returns (g, v, h, pilot_noise) with leading batch axes:
    g is (B, M, N), v and the rest are (K, B, .). Draw order is fixed
    (G first, then per-user fading, then per-user noise) so results are
    reproducible for a given generator state.
    """
    m, n, k = stats.n_antennas, stats.n_elements, stats.n_users
    b_vec = unit_phasor(theta)
    g_iid = _complex_normal(rng, (n_draws, m, n))
    g = np.sqrt(stats.beta_br) * (stats._f_bs @ g_iid @ stats._f_ris_rx.conj().T)
    v = np.empty((k, n_draws, n), dtype=complex)
    for j in range(k):
        v_iid = _complex_normal(rng, (n_draws, n))
        v[j] = np.sqrt(stats.beta_ru[j]) * (v_iid @ stats._f_ris_user[j].T)
    h = np.einsum("bmn,kbn->kbm", g, v * b_vec[None, None, :])
    noise_std = np.sqrt(pilot.effective_noise_variance)
    pilot_noise = noise_std * _complex_normal(rng, (k, n_draws, m))
    return g, v, h, pilot_noise


def sample_realization(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilot: PilotSetup,
    seed: int,
) -> ChannelRealization:
    """Draw one realization deterministically from a 64-bit seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    g, v, h, pilot_noise = sample_batch(stats, theta, pilot, rng, 1)
    return ChannelRealization(
        g=g[0],
        v=v[:, 0, :],
        h=h[:, 0, :],
        pilot_noise=pilot_noise[:, 0, :],
        theta_hash=theta_digest(theta),
    )


def batch_seed_sequences(seed: int, n_batches: int) -> list[np.random.SeedSequence]:
    """Split a master seed into independent per-batch streams.

    Spawned seed sequences keep parallel trials reproducible regardless of
    scheduling: batch i always sees the same stream.
    """
    return np.random.SeedSequence(seed).spawn(n_batches)
