"""Atmospheric transmission, coupling loss, dark/background clicks and a
configurable per-pass weather process.

Attenuation follows a Beer-Lambert slant path, exp(-tau0 * sec(zenith)),
with the clear-sky vertical optical depth tau0 as the single parameter.
The stochastic weather mode replaces a real-time feed with Bernoulli
cloud blocking per pass and a log-normal multiplier on tau0 for clear
passes.  Turbulence coupling into the detector chain is a static scalar
efficiency per station.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .orbit import GroundStation, PassWindow

__all__ = [
    "AtmosphereParams",
    "WeatherRealization",
    "atml",
    "sample_weather",
    "clear_sky_weather",
    "dark_click_probability",
]

WEATHER_MODES = ("clear-sky", "stochastic")
# Stray-light click-rate presets (Hz) for the two operating regimes.
BACKGROUND_RATE_NIGHT_HZ = 300.0
BACKGROUND_RATE_DAY_HZ = 30000.0


@dataclass(frozen=True)
class AtmosphereParams:
    """Parametric atmosphere shared by all passes of a campaign."""

    zenith_optical_depth: float = 0.35
    coupling_loss: float = 0.5
    weather_mode: str = "clear-sky"
    cloud_block_probability: float = 0.0
    tau_lognormal_sigma: float = 0.25
    background_rate_hz: float = BACKGROUND_RATE_NIGHT_HZ

    def __post_init__(self):
        if self.zenith_optical_depth < 0:
            raise DomainError(
                f"zenith_optical_depth must be >= 0, got {self.zenith_optical_depth}"
            )
        if not (0.0 < self.coupling_loss <= 1.0):
            raise DomainError(f"coupling_loss must be in (0, 1], got {self.coupling_loss}")
        if self.weather_mode not in WEATHER_MODES:
            raise DomainError(
                f"weather_mode must be one of {WEATHER_MODES}, got {self.weather_mode!r}"
            )
        if not (0.0 <= self.cloud_block_probability <= 1.0):
            raise DomainError("cloud_block_probability must be in [0, 1]")
        if self.tau_lognormal_sigma < 0:
            raise DomainError("tau_lognormal_sigma must be >= 0")
        if self.background_rate_hz < 0:
            raise DomainError("background_rate_hz must be >= 0")


@dataclass(frozen=True)
class WeatherRealization:
    """Outcome of the weather process for one pass."""

    blocked: bool
    tau: float


def atml(zenith_angle_deg, params: AtmosphereParams, tau: float | None = None):
    """Beer-Lambert slant-path transmission at the given zenith angle.

    ``tau`` overrides the clear-sky optical depth (used for weather
    realizations).  Accepts scalars or arrays; angles at or beyond 90 deg
    are outside the model.
    """
    z = np.asarray(zenith_angle_deg, dtype=float)
    if np.any(z < 0.0) or np.any(z >= 90.0):
        raise DomainError(f"zenith angle must be in [0, 90) deg, got {zenith_angle_deg}")
    t0 = params.zenith_optical_depth if tau is None else tau
    out = np.exp(-t0 / np.cos(np.radians(z)))
    return float(out) if out.ndim == 0 else out


def clear_sky_weather(params: AtmosphereParams) -> WeatherRealization:
    """The deterministic realization used in clear-sky mode."""
    return WeatherRealization(blocked=False, tau=params.zenith_optical_depth)


def sample_weather(pass_window: PassWindow, params: AtmosphereParams,
                   seed) -> WeatherRealization:
    """Draw the stochastic weather realization for one pass.

    Bernoulli cloud blocking; clear passes scale the optical depth by a
    log-normal multiplier.  Deterministic for a given seed.
    """
    if params.weather_mode != "stochastic":
        raise DomainError("sample_weather requires weather_mode = 'stochastic'")
    rng = np.random.default_rng(seed)
    if rng.random() < params.cloud_block_probability:
        return WeatherRealization(blocked=True, tau=math.inf)
    mult = math.exp(rng.normal(0.0, params.tau_lognormal_sigma))
    return WeatherRealization(blocked=False, tau=params.zenith_optical_depth * mult)


def dark_click_probability(params: AtmosphereParams, station: GroundStation,
                           window_s: float) -> float:
    """Spurious-click probability per detection window.

    Combines the station's detector dark rate with the atmospheric
    background rate: 1 - exp(-(rates) * window), always below 1.
    """
    if window_s <= 0:
        raise DomainError(f"window_s must be > 0, got {window_s}")
    rate = station.detector_dark_rate_hz + params.background_rate_hz
    return min(-math.expm1(-rate * window_s), 1.0 - 1e-15)
