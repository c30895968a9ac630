"""Link-level power math: path loss, correlated shadowing, noise, SINR.

Path loss follows the WINNER+ B1 street layout with a dual-slope LOS branch
and a distance-only NLOS branch. Coefficients are configuration data; the
defaults below the breakpoint reproduce the standard B1 LOS curve at 5.9 GHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .util import db_to_linear, linear_to_db

SPEED_OF_LIGHT = 299792458.0
THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class WinnerCoefficients:
    """a*log10(d) + b + c*log10(fc/5 GHz), plus 40 dB/decade past the breakpoint."""

    los_a: float = 22.7
    los_b: float = 41.0
    los_c: float = 20.0
    nlos_a: float = 36.7
    nlos_b: float = 48.0
    nlos_c: float = 26.0
    breakpoint_exponent_db: float = 40.0


@dataclass(frozen=True)
class PropagationConfig:
    carrier_hz: float = 5.9e9
    model: str = "winner_b1_los"  # winner_b1_los | winner_b1_nlos
    shadowing_std_db: float = 3.0
    shadowing_is_variance: bool = False
    decorrelation_m: float = 25.0
    antenna_gain_dbi: float = 3.0
    noise_figure_db: float = 6.0
    tx_power_density_dbm_mhz: float = 13.0
    bandwidth_hz: float = 10e6
    antenna_height_m: float = 1.5
    coefficients: WinnerCoefficients = field(default_factory=WinnerCoefficients)

    def __post_init__(self):
        if self.decorrelation_m <= 0:
            raise ConfigError("decorrelation_m must be > 0")
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz must be > 0")
        if self.model not in ("winner_b1_los", "winner_b1_nlos"):
            raise ConfigError(f"unknown propagation model {self.model!r}")

    @property
    def shadowing_sigma_db(self) -> float:
        if self.shadowing_is_variance:
            return math.sqrt(self.shadowing_std_db)
        return self.shadowing_std_db

    @property
    def tx_power_dbm(self) -> float:
        """Total transmit power: density integrated over the channel."""
        return self.tx_power_density_dbm_mhz + 10.0 * math.log10(self.bandwidth_hz / 1e6)

    @property
    def breakpoint_m(self) -> float:
        return 4.0 * self.antenna_height_m ** 2 * self.carrier_hz / SPEED_OF_LIGHT


@dataclass(frozen=True)
class LinkSample:
    """Received powers feeding one SINR evaluation."""

    rx_power_dbm: float
    interferers: tuple = ()  # (source_id, overlap_fraction in [0,1], power_dbm)

    def __post_init__(self):
        for _, overlap, _ in self.interferers:
            if not 0.0 <= overlap <= 1.0:
                raise ConfigError(f"overlap_fraction {overlap} outside [0, 1]")


def free_space_loss_db(d, carrier_hz: float):
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    return 20.0 * np.log10(d) + 20.0 * np.log10(carrier_hz) + 20.0 * math.log10(
        4.0 * math.pi / SPEED_OF_LIGHT
    )


def winner_formula_db(d, a: float, b: float, c: float, carrier_hz: float):
    """Single-slope WINNER-style term, unclamped; d floored at 1 m."""
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    return a * np.log10(d) + b + c * math.log10(carrier_hz / 5e9)


def path_loss_db(d, cfg: PropagationConfig, los: bool | np.ndarray | None = None):
    """Deterministic path loss at distance d (m), clamped at free-space loss.

    `los` overrides the configured model per element; the LOS branch turns
    dual-slope past the breakpoint, the NLOS branch is single-slope.
    """
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    co = cfg.coefficients
    if los is None:
        los = cfg.model == "winner_b1_los"
    los_loss = winner_formula_db(d, co.los_a, co.los_b, co.los_c, cfg.carrier_hz)
    d_bp = cfg.breakpoint_m
    past = d > d_bp
    if np.any(past):
        at_bp = winner_formula_db(d_bp, co.los_a, co.los_b, co.los_c, cfg.carrier_hz)
        los_loss = np.where(
            past, at_bp + co.breakpoint_exponent_db * np.log10(d / d_bp), los_loss
        )
    nlos_loss = winner_formula_db(d, co.nlos_a, co.nlos_b, co.nlos_c, cfg.carrier_hz)
    loss = np.where(los, los_loss, nlos_loss)
    return np.maximum(loss, free_space_loss_db(d, cfg.carrier_hz))


def noise_power_dbm(cfg: PropagationConfig) -> float:
    """Thermal noise over the channel bandwidth plus the receiver noise figure."""
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.noise_figure_db


def sinr(link: LinkSample, noise_dbm: float) -> float:
    """Linear SINR: everything converted to mW before summation."""
    s = float(db_to_linear(link.rx_power_dbm))
    denom = float(db_to_linear(noise_dbm))
    for _, overlap, power_dbm in link.interferers:
        denom += overlap * float(db_to_linear(power_dbm))
    return s / denom


class LinkShadowing:
    """Correlated log-normal shadowing, one process per directed link.

    The process decorrelates with the transmitter's traveled distance:
    s' = rho*s + sigma*sqrt(1-rho^2)*z with rho = exp(-delta/decorr).
    Used matrix-wise by the engine; `sample` serves single-link callers.
    """

    def __init__(self, sigma_db: float, decorrelation_m: float, rng: np.random.Generator):
        self.sigma_db = sigma_db
        self.decorrelation_m = decorrelation_m
        self.rng = rng
        self._state: dict = {}  # link key -> (traveled_m, value_db)

    def sample(self, link_key, traveled_m: float) -> float:
        """Shadowing in dB for the link after the transmitter moved to traveled_m."""
        prev = self._state.get(link_key)
        if prev is None:
            value = self.sigma_db * self.rng.standard_normal()
        else:
            prev_traveled, prev_value = prev
            delta = abs(traveled_m - prev_traveled)
            rho = math.exp(-delta / self.decorrelation_m)
            value = rho * prev_value + self.sigma_db * math.sqrt(1.0 - rho * rho) * (
                self.rng.standard_normal()
            )
        self._state[link_key] = (traveled_m, value)
        return value

    @staticmethod
    def evolve_matrix(values: np.ndarray, delta_m: np.ndarray, sigma_db: float,
                      decorrelation_m: float, rng: np.random.Generator) -> np.ndarray:
        """Vectorized update: rows share the transmitter's displacement."""
        rho = np.exp(-np.abs(delta_m) / decorrelation_m)[:, None]
        z = rng.standard_normal(values.shape)
        return rho * values + sigma_db * np.sqrt(1.0 - rho * rho) * z


def rx_power_dbm(distance_m, cfg: PropagationConfig, shadowing_db=0.0,
                 los: bool | np.ndarray | None = None):
    """Link budget: tx power + both antenna gains - path loss - shadowing."""
    return (
        cfg.tx_power_dbm
        + 2.0 * cfg.antenna_gain_dbi
        - path_loss_db(distance_m, cfg, los=los)
        - shadowing_db
    )


def sinr_vector(signal_dbm, interferer_dbm_overlap, noise_dbm: float):
    """Array form of `sinr` for one frame against many receivers.

    interferer_dbm_overlap: iterable of (power_dbm_array, overlap_fraction).
    """
    s = db_to_linear(signal_dbm)
    denom = np.full_like(s, float(db_to_linear(noise_dbm)))
    for power_dbm, overlap in interferer_dbm_overlap:
        denom = denom + overlap * db_to_linear(power_dbm)
    return s / denom


__all__ = [
    "PropagationConfig", "WinnerCoefficients", "LinkSample", "LinkShadowing",
    "path_loss_db", "free_space_loss_db", "winner_formula_db", "noise_power_dbm",
    "sinr", "sinr_vector", "rx_power_dbm", "linear_to_db", "db_to_linear",
]
