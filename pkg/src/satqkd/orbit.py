"""Circular LEO orbit propagation and joint visibility windows for
ground-station pairs.

Spherical Earth, circular Keplerian motion, no perturbations: at desk
scale the pass statistics only need the right period, slant ranges and
zenith angles.  Earth rotation is applied to the station coordinates; the
inertial frame is aligned with the rotating frame at the epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import DomainError, EmptySpanError

__all__ = [
    "EARTH_RADIUS_KM",
    "MU_EARTH",
    "EARTH_ROTATION_RATE",
    "OrbitConfig",
    "GroundStation",
    "PassWindow",
    "orbital_period",
    "propagate",
    "slant_and_zenith",
    "pass_windows",
]

EARTH_RADIUS_KM = 6378.0
MU_EARTH = 398600.4418          # km^3 / s^2
EARTH_ROTATION_RATE = 7.2921159e-5  # rad / s (sidereal)


def _utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class OrbitConfig:
    """Circular orbit: altitude above the spherical Earth radius."""

    altitude_km: float
    inclination_deg: float
    raan_deg: float = 0.0
    initial_phase_deg: float = 0.0
    epoch: datetime = datetime(2025, 6, 1, tzinfo=timezone.utc)

    def __post_init__(self):
        if not (self.altitude_km > 0 and math.isfinite(self.altitude_km)):
            raise DomainError(f"altitude_km must be > 0, got {self.altitude_km}")
        if not (0.0 <= self.inclination_deg <= 180.0):
            raise DomainError(
                f"inclination_deg must be in [0, 180], got {self.inclination_deg}"
            )
        object.__setattr__(self, "epoch", _utc(self.epoch))

    @property
    def radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    def offset_seconds(self, t) -> float:
        """Seconds since epoch for a datetime (floats pass through)."""
        if isinstance(t, datetime):
            return (_utc(t) - self.epoch).total_seconds()
        return float(t)


@dataclass(frozen=True)
class GroundStation:
    """Receiving telescope site."""

    name: str
    latitude_deg: float
    longitude_deg: float
    aperture_radius_m: float = 0.60
    coupling_loss: float = 0.5
    detector_dark_rate_hz: float = 100.0

    def __post_init__(self):
        if not (-90.0 <= self.latitude_deg <= 90.0):
            raise DomainError(
                f"station {self.name}: latitude must be in [-90, 90], "
                f"got {self.latitude_deg}"
            )
        if not (self.aperture_radius_m > 0):
            raise DomainError(f"station {self.name}: aperture_radius_m must be > 0")
        if not (0.0 < self.coupling_loss <= 1.0):
            raise DomainError(
                f"station {self.name}: coupling_loss must be in (0, 1], "
                f"got {self.coupling_loss}"
            )
        if self.detector_dark_rate_hz < 0:
            raise DomainError(f"station {self.name}: detector_dark_rate_hz must be >= 0")


@dataclass(frozen=True)
class PassWindow:
    """One joint visibility window with its uniformly sampled time series."""

    epoch: datetime
    start_offset_s: float
    end_offset_s: float
    t: np.ndarray               # offsets from epoch (s)
    slant_a_km: np.ndarray
    slant_b_km: np.ndarray
    zenith_a_deg: np.ndarray
    zenith_b_deg: np.ndarray

    def __post_init__(self):
        for name in ("t", "slant_a_km", "slant_b_km", "zenith_a_deg", "zenith_b_deg"):
            getattr(self, name).setflags(write=False)

    @property
    def start(self) -> datetime:
        return self.epoch + timedelta(seconds=self.start_offset_s)

    @property
    def end(self) -> datetime:
        return self.epoch + timedelta(seconds=self.end_offset_s)

    @property
    def duration_s(self) -> float:
        return self.end_offset_s - self.start_offset_s

    @property
    def step_s(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else self.duration_s


def orbital_period(orbit: OrbitConfig) -> float:
    """Keplerian period 2*pi*sqrt(a^3/mu) in seconds."""
    return 2.0 * math.pi * math.sqrt(orbit.radius_km**3 / MU_EARTH)


def propagate(orbit: OrbitConfig, t) -> np.ndarray:
    """Inertial satellite position (km) at time(s) t.

    ``t`` is seconds since the orbit epoch (scalar or array) or a
    datetime.  Returns shape (..., 3).
    """
    tt = np.asarray(orbit.offset_seconds(t) if isinstance(t, datetime) else t,
                    dtype=float)
    n = 2.0 * math.pi / orbital_period(orbit)
    u = math.radians(orbit.initial_phase_deg) + n * tt
    inc = math.radians(orbit.inclination_deg)
    raan = math.radians(orbit.raan_deg)

    # In-plane position rotated by inclination then RAAN.
    x_orb, y_orb = np.cos(u), np.sin(u)
    x = x_orb * math.cos(raan) - y_orb * math.cos(inc) * math.sin(raan)
    y = x_orb * math.sin(raan) + y_orb * math.cos(inc) * math.cos(raan)
    z = y_orb * math.sin(inc)
    return orbit.radius_km * np.stack([x, y, z], axis=-1)


def _station_eci(station: GroundStation, t) -> np.ndarray:
    tt = np.asarray(t, dtype=float)
    lat = math.radians(station.latitude_deg)
    lon = math.radians(station.longitude_deg) + EARTH_ROTATION_RATE * tt
    clat = math.cos(lat)
    return EARTH_RADIUS_KM * np.stack(
        [clat * np.cos(lon), clat * np.sin(lon), np.full_like(tt, math.sin(lat))],
        axis=-1,
    )


def slant_and_zenith(sat_position: np.ndarray, station: GroundStation, t):
    """Slant range (km) and zenith angle (deg) from a station to the satellite.

    ``t`` is the same offset time used to propagate the satellite; it sets
    the Earth-rotation angle of the station.  Zenith angles above 90 deg
    mean the satellite is below the horizon.
    """
    st = _station_eci(station, t)
    rel = np.asarray(sat_position, dtype=float) - st
    slant = np.linalg.norm(rel, axis=-1)
    cosz = (rel * st).sum(axis=-1) / (slant * EARTH_RADIUS_KM)
    zenith = np.degrees(np.arccos(np.clip(cosz, -1.0, 1.0)))
    return slant, zenith


def _joint_zenith(orbit, station_a, station_b, t):
    pos = propagate(orbit, t)
    _, za = slant_and_zenith(pos, station_a, t)
    _, zb = slant_and_zenith(pos, station_b, t)
    return np.maximum(za, zb)


def pass_windows(orbit: OrbitConfig, station_a: GroundStation,
                 station_b: GroundStation, span, max_zenith_deg: float = 70.0,
                 step_s: float = 1.0, coarse_step_s: float = 30.0,
                 refine_tol_s: float = 1.0) -> list[PassWindow]:
    """Maximal intervals where both stations see the satellite inside the mask.

    ``span`` is a (start, end) pair of datetimes or offsets in seconds
    from the orbit epoch.  A coarse scan locates candidate intervals and
    bisection refines each boundary to ``refine_tol_s``; the window is
    then sampled uniformly at ``step_s``.
    """
    if not (0.0 < max_zenith_deg < 90.0):
        raise DomainError(f"max_zenith_deg must be in (0, 90), got {max_zenith_deg}")
    if step_s > 10.0 or step_s <= 0:
        raise DomainError(f"step_s must be in (0, 10] s, got {step_s}")
    t0 = orbit.offset_seconds(span[0])
    t1 = orbit.offset_seconds(span[1])
    if t1 <= t0:
        raise EmptySpanError(f"empty span: [{span[0]}, {span[1]}]")

    coarse = np.arange(t0, t1 + coarse_step_s, coarse_step_s)
    coarse = coarse[coarse <= t1]
    if coarse.size < 2:
        raise EmptySpanError("span shorter than one coarse step")
    visible = _joint_zenith(orbit, station_a, station_b, coarse) <= max_zenith_deg

    def _bisect(outside: float, inside: float) -> float:
        # Shrink the (outside, inside) bracket; return the inside endpoint
        # so every sampled instant respects the mask.
        while abs(inside - outside) > refine_tol_s:
            mid = 0.5 * (outside + inside)
            if _joint_zenith(orbit, station_a, station_b, mid) <= max_zenith_deg:
                inside = mid
            else:
                outside = mid
        return inside

    windows: list[PassWindow] = []
    i = 0
    m = coarse.size
    while i < m:
        if not visible[i]:
            i += 1
            continue
        j = i
        while j + 1 < m and visible[j + 1]:
            j += 1
        start = coarse[i] if i == 0 else _bisect(coarse[i - 1], coarse[i])
        end = coarse[j] if j == m - 1 else _bisect(coarse[j + 1], coarse[j])
        start, end = max(start, t0), min(end, t1)
        if end > start:
            ts = start + np.arange(0.0, end - start + 0.5 * step_s, step_s)
            ts = ts[ts <= end] if ts[-1] > end else ts
            pos = propagate(orbit, ts)
            sa, za = slant_and_zenith(pos, station_a, ts)
            sb, zb = slant_and_zenith(pos, station_b, ts)
            windows.append(PassWindow(
                epoch=orbit.epoch, start_offset_s=float(start), end_offset_s=float(end),
                t=ts, slant_a_km=sa, slant_b_km=sb,
                zenith_a_deg=za, zenith_b_deg=zb,
            ))
        i = j + 1
    return windows
