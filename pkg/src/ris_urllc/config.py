"""Experiment configuration: a flat INI document mapped onto a dataclass.

Grammar: standard INI sections parsed by :mod:`configparser` with
``key = value`` pairs, no interpolation, no includes. Unknown sections or
keys are rejected so typos fail loudly. Lists are comma-separated, complex
values use Python literal syntax (``0.5`` or ``0.4+0.2j``).
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .fbl import BlocklengthBudget, QosTarget
from .scenario import PathLossModel, SystemConfig, noise_power, standard_geometry, statistics_from_geometry


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment family."""

    # [system]
    bs_antennas: int = 32
    ris_elements: int = 36
    users: int = 4
    bandwidth_hz: float = 2e6
    latency_s: float = 1e-4
    pilot_symbols: int = 0  # 0 means "one per user"
    power_data_w: float = 1.0
    power_pilot_w: float = 0.1
    noise_figure_db: float = 9.0
    beta0: float = 1e-2
    bs_ris_exponent: float = 2.2
    ris_user_exponent: float = 2.1
    spacing_wavelengths: float = 0.25
    bs_correlation: complex = 0.5

    # [qos]
    rate_req_bps_hz: float = 0.2
    dep: float = 1e-7
    weight_policy: str = "random"  # random | uniform

    # [geometry]
    bs_ris_distance_m: float = 50.0
    user_circle_radius_m: float = 5.0
    user_circle_offset_m: float = 10.0

    # [sweep]
    sweep_ris_elements: tuple[int, ...] = (16, 36, 64)
    sweep_bs_antennas: tuple[int, ...] = (32, 64)
    sweep_pilot_powers_w: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0)
    drops: int = 200

    # [run]
    seed: int = 1
    trials: int = 2000
    smoothing_temperature: float = 50.0

    def __post_init__(self) -> None:
        if min(self.bs_antennas, self.ris_elements, self.users) < 1:
            raise ConfigError("system: counts must be positive")
        side = round(np.sqrt(self.ris_elements))
        if side * side != self.ris_elements:
            raise ConfigError("system.ris_elements: must be a perfect square")
        if self.bandwidth_hz <= 0 or self.latency_s <= 0:
            raise ConfigError("system: bandwidth_hz and latency_s must be positive")
        if self.power_data_w <= 0 or self.power_pilot_w <= 0:
            raise ConfigError("system: power budgets must be positive")
        if self.pilot_symbols and self.pilot_symbols < self.users:
            raise ConfigError("system.pilot_symbols: must be >= users to keep pilots orthogonal")
        if self.effective_pilot_symbols >= self.blocklength:
            raise ConfigError("system.pilot_symbols: must leave room for data symbols")
        if not 0 < self.dep < 0.5:
            raise ConfigError("qos.dep: must lie in (0, 0.5)")
        if self.rate_req_bps_hz < 0:
            raise ConfigError("qos.rate_req_bps_hz: must be nonnegative")
        if self.weight_policy not in ("random", "uniform"):
            raise ConfigError("qos.weight_policy: must be 'random' or 'uniform'")
        if self.trials < 100:
            raise ConfigError("run.trials: at least 100 trials are required")
        if self.drops < 1:
            raise ConfigError("sweep.drops: must be positive")

    @property
    def blocklength(self) -> int:
        return round(self.bandwidth_hz * self.latency_s)

    @property
    def effective_pilot_symbols(self) -> int:
        return self.pilot_symbols if self.pilot_symbols else self.users

    @property
    def noise_power_w(self) -> float:
        return noise_power(self.bandwidth_hz, self.noise_figure_db)


_SECTIONS: dict[str, tuple[str, ...]] = {
    "system": (
        "bs_antennas", "ris_elements", "users", "bandwidth_hz", "latency_s",
        "pilot_symbols", "power_data_w", "power_pilot_w", "noise_figure_db",
        "beta0", "bs_ris_exponent", "ris_user_exponent", "spacing_wavelengths",
        "bs_correlation",
    ),
    "qos": ("rate_req_bps_hz", "dep", "weight_policy"),
    "geometry": ("bs_ris_distance_m", "user_circle_radius_m", "user_circle_offset_m"),
    "sweep": ("sweep_ris_elements", "sweep_bs_antennas", "sweep_pilot_powers_w", "drops"),
    "run": ("seed", "trials", "smoothing_temperature"),
}

_SWEEP_KEYS = {"sweep_ris_elements", "sweep_bs_antennas", "sweep_pilot_powers_w"}


def _parse_value(name: str, raw: str, kind: type):
    try:
        if name in _SWEEP_KEYS:
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if name == "sweep_pilot_powers_w":
                return tuple(float(p) for p in parts)
            return tuple(int(float(p)) for p in parts)
        if kind is int:
            return int(float(raw))
        if kind is float:
            return float(raw)
        if kind is complex:
            return complex(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse an INI document into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    py_types = {"int": int, "float": float, "complex": complex, "str": str}
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kind = types[key]
            kind = py_types.get(kind.split("[")[0] if isinstance(kind, str) else kind, kind)
            values[key] = _parse_value(key, raw, kind)
    return ExperimentConfig(**values)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Render the configuration back to its INI form (round-trip stable)."""
    out = io.StringIO()
    for section, keys in _SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            value = getattr(cfg, key)
            if isinstance(value, tuple):
                rendered = ",".join(repr(v) for v in value)
            elif isinstance(value, complex):
                rendered = repr(value.real) if value.imag == 0.0 else repr(value).strip("()")
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            out.write(f"{key} = {rendered}\n")
        out.write("\n")
    return out.getvalue()


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def config_digest(cfg: ExperimentConfig) -> str:
    """Short stable hash naming the configuration in output provenance."""
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:12]


def full_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Reference-scale variant: 100 BS antennas and 1e4 trials."""
    return replace(cfg, bs_antennas=100, trials=10_000)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully instantiated experiment: scalars plus large-scale state."""

    system: SystemConfig
    stats: "object"
    geometry: "object"
    weights: np.ndarray


def draw_weights(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    """Per-user priority weights on (0, 1], drawn once per seed."""
    if cfg.weight_policy == "uniform":
        return np.ones(cfg.users)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return 1.0 - rng.uniform(0.0, 1.0, size=cfg.users)


def build_scenario(
    cfg: ExperimentConfig,
    seed: int,
    n_antennas: int | None = None,
    n_elements: int | None = None,
    correlated: bool = True,
) -> Scenario:
    """Instantiate geometry, statistics, and system scalars for one seed.

    ``n_antennas``/``n_elements`` override the config (used by sweeps); the
    user placement and the weights depend only on (config geometry, seed).
    """
    m = n_antennas if n_antennas is not None else cfg.bs_antennas
    n = n_elements if n_elements is not None else cfg.ris_elements
    placement_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    geometry = standard_geometry(
        cfg.users,
        placement_rng,
        bs_ris_distance=cfg.bs_ris_distance_m,
        circle_offset=cfg.user_circle_offset_m,
        circle_radius=cfg.user_circle_radius_m,
        spacing_wavelengths=cfg.spacing_wavelengths,
    )
    stats = statistics_from_geometry(
        geometry,
        m,
        n,
        bs_correlation=cfg.bs_correlation,
        correlated=correlated,
        path_loss_model=PathLossModel(
            beta0=cfg.beta0,
            bs_ris_exponent=cfg.bs_ris_exponent,
            ris_user_exponent=cfg.ris_user_exponent,
        ),
    )
    weights = draw_weights(cfg, seed)
    targets = [
        QosTarget(rate_req=cfg.rate_req_bps_hz, dep=cfg.dep, weight=float(w)) for w in weights
    ]
    system = SystemConfig(
        n_antennas=m,
        n_elements=n,
        n_users=cfg.users,
        budget=BlocklengthBudget(
            blocklength=cfg.blocklength, pilot_symbols=cfg.effective_pilot_symbols
        ),
        power_total=cfg.power_data_w,
        power_pilot=cfg.power_pilot_w,
        noise_power=cfg.noise_power_w,
        targets=targets,
    )
    return Scenario(system=system, stats=stats, geometry=geometry, weights=weights)
