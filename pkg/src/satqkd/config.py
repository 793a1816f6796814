"""Scenario configuration: one hierarchical YAML file drives every
workflow.

Loading validates every module-level invariant up front and reports all
violations together with their field paths.  The canonical serialization
round-trips losslessly and its SHA-256 hash stamps every output file, so
a result is reproducible from (config, seed) alone.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import yaml

from .atmosphere import AtmosphereParams
from .errors import DomainError, ParseError, ValidationError
from .extraction import AnalyticXi, LutTable
from .orbit import GroundStation, OrbitConfig

__all__ = [
    "TransmitterConfig",
    "BeamConfig",
    "SourceConfig",
    "ExtractionConfig",
    "CampaignConfig",
    "ScenarioConfig",
    "load_config",
    "default_config_path",
]

BEAM_MODES = ("optimized", "fixed")
LAMBDA_MODES = ("optimized", "fixed")
EXTRACTION_MODES = ("analytic", "lut")


@dataclass(frozen=True)
class TransmitterConfig:
    """Satellite-side telescope and pointing."""

    aperture_radius_m: float = 0.15
    wavelength_m: float = 810e-9
    pointing_jitter_rad: float = 0.47e-6

    def __post_init__(self):
        if self.aperture_radius_m <= 0:
            raise DomainError("aperture_radius_m must be > 0")
        if self.wavelength_m <= 0:
            raise DomainError("wavelength_m must be > 0")
        if self.pointing_jitter_rad < 0:
            raise DomainError("pointing_jitter_rad must be >= 0")


@dataclass(frozen=True)
class BeamConfig:
    """Beam-waist handling for the downlink."""

    mode: str = "optimized"
    fixed_w0_m: float = 0.015
    grid_size: int = 2048
    oversampling: float = 1.0
    slant_grid_points: int = 16
    waist_bounds_m: tuple = (0.0125, 0.30)

    def __post_init__(self):
        if self.mode not in BEAM_MODES:
            raise DomainError(f"mode must be one of {BEAM_MODES}, got {self.mode!r}")
        if self.fixed_w0_m <= 0:
            raise DomainError("fixed_w0_m must be > 0")
        if self.grid_size < 64 or self.grid_size & (self.grid_size - 1):
            raise DomainError("grid_size must be a power of two >= 64")
        if self.oversampling <= 0:
            raise DomainError("oversampling must be > 0")
        if self.slant_grid_points < 2:
            raise DomainError("slant_grid_points must be >= 2")
        lo, hi = self.waist_bounds_m
        if not (0 < lo < hi):
            raise DomainError("waist_bounds_m must be increasing and positive")
        object.__setattr__(self, "waist_bounds_m", (float(lo), float(hi)))


@dataclass(frozen=True)
class SourceConfig:
    """Entangled-pair source operating point."""

    pair_rate_hz: float = 5.9e6
    lambda_mode: str = "optimized"
    lambda_fixed: float = 0.01
    lambda_bounds: tuple = (1e-4, 0.5)
    detection_window_s: float = 1e-9

    def __post_init__(self):
        if self.pair_rate_hz <= 0:
            raise DomainError("pair_rate_hz must be > 0")
        if self.lambda_mode not in LAMBDA_MODES:
            raise DomainError(
                f"lambda_mode must be one of {LAMBDA_MODES}, got {self.lambda_mode!r}"
            )
        if not (0.0 <= self.lambda_fixed < 1.0):
            raise DomainError(
                f"lambda_fixed must be in [0, 1), got {self.lambda_fixed}"
            )
        lo, hi = self.lambda_bounds
        if not (0.0 < lo < hi <= 0.5):
            raise DomainError("lambda_bounds must satisfy 0 < lo < hi <= 0.5")
        if self.detection_window_s <= 0:
            raise DomainError("detection_window_s must be > 0")
        object.__setattr__(self, "lambda_bounds", (float(lo), float(hi)))


@dataclass(frozen=True)
class ExtractionConfig:
    """Key-extraction mode: static xi or a look-up table file."""

    mode: str = "analytic"
    xi: float = 1.22
    lut_path: str | None = None
    key_size_bits: int = 256

    def __post_init__(self):
        if self.mode not in EXTRACTION_MODES:
            raise DomainError(
                f"mode must be one of {EXTRACTION_MODES}, got {self.mode!r}"
            )
        if self.xi < 0:
            raise DomainError("xi must be >= 0")
        if self.mode == "lut" and not self.lut_path:
            raise DomainError("lut_path is required when mode = 'lut'")
        if self.key_size_bits <= 0:
            raise DomainError("key_size_bits must be > 0")

    def build_model(self):
        if self.mode == "analytic":
            return AnalyticXi(xi=self.xi)
        path = Path(self.lut_path)
        if path.suffix == ".json":
            return LutTable.from_json(path)
        return LutTable.from_csv(path)


@dataclass(frozen=True)
class CampaignConfig:
    """Campaign span, visibility mask and use-case requirements."""

    link: tuple = ("Madrid", "Barcelona")
    span_days: float = 30.0
    max_zenith_deg: float = 70.0
    coarse_step_s: float = 30.0
    sample_step_s: float = 1.0
    use_cases: dict = field(
        default_factory=lambda: {"telefonica": 0.006, "jpmorgan": 2.13})

    def __post_init__(self):
        if len(self.link) != 2 or self.link[0] == self.link[1]:
            raise DomainError("link must name two distinct stations")
        if self.span_days <= 0:
            raise DomainError("span_days must be > 0")
        if not (0.0 < self.max_zenith_deg < 90.0):
            raise DomainError("max_zenith_deg must be in (0, 90)")
        if not (0.0 < self.sample_step_s <= 10.0):
            raise DomainError("sample_step_s must be in (0, 10]")
        if self.coarse_step_s <= 0:
            raise DomainError("coarse_step_s must be > 0")
        for name, req in self.use_cases.items():
            if req <= 0:
                raise DomainError(f"use case {name!r} requirement must be > 0 keys/s")
        object.__setattr__(self, "link", (str(self.link[0]), str(self.link[1])))


@dataclass
class ScenarioConfig:
    """Fully validated scenario: everything a workflow needs."""

    orbit: OrbitConfig
    stations: list
    transmitter: TransmitterConfig = field(default_factory=TransmitterConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    atmosphere: AtmosphereParams = field(default_factory=AtmosphereParams)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    seed: int = 0
    output_dir: str = "out"

    def station(self, name: str) -> GroundStation:
        for st in self.stations:
            if st.name == name:
                return st
        raise DomainError(f"no station named {name!r} in configuration")

    def link_stations(self):
        return self.station(self.campaign.link[0]), self.station(self.campaign.link[1])

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "orbit": asdict(self.orbit),
            "stations": [asdict(s) for s in self.stations],
            "transmitter": asdict(self.transmitter),
            "beam": asdict(self.beam),
            "source": asdict(self.source),
            "atmosphere": asdict(self.atmosphere),
            "extraction": asdict(self.extraction),
            "campaign": asdict(self.campaign),
        }
        d["orbit"]["epoch"] = self.orbit.epoch.isoformat()
        d["beam"]["waist_bounds_m"] = list(self.beam.waist_bounds_m)
        d["source"]["lambda_bounds"] = list(self.source.lambda_bounds)
        d["campaign"]["link"] = list(self.campaign.link)
        return d

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()

    def save(self, path):
        Path(path).write_text(self.to_yaml())


_SECTION_KEYS = {
    "orbit": {"altitude_km", "inclination_deg", "raan_deg", "initial_phase_deg",
              "epoch"},
    "transmitter": {"aperture_radius_m", "wavelength_m", "pointing_jitter_rad"},
    "beam": {"mode", "fixed_w0_m", "grid_size", "oversampling",
             "slant_grid_points", "waist_bounds_m"},
    "source": {"pair_rate_hz", "lambda_mode", "lambda_fixed", "lambda_bounds",
               "detection_window_s"},
    "atmosphere": {"zenith_optical_depth", "coupling_loss", "weather_mode",
                   "cloud_block_probability", "tau_lognormal_sigma",
                   "background_rate_hz"},
    "extraction": {"mode", "xi", "lut_path", "key_size_bits"},
    "campaign": {"link", "span_days", "max_zenith_deg", "coarse_step_s",
                 "sample_step_s", "use_cases"},
}
_STATION_KEYS = {"name", "latitude_deg", "longitude_deg", "aperture_radius_m",
                 "coupling_loss", "detector_dark_rate_hz"}
_TOP_KEYS = set(_SECTION_KEYS) | {"stations", "seed", "output_dir"}


def _parse_epoch(value):
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    s = str(value).replace("Z", "+00:00")
    dt = datetime.fromisoformat(s)
    return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)


def _build_section(cls, data, path, violations, convert=None, allowed=None):
    if not isinstance(data, dict):
        violations.append(f"{path}: expected a mapping, got {type(data).__name__}")
        return None
    if allowed is not None:
        for k in set(data) - allowed:
            violations.append(f"{path}.{k}: unknown field")
        data = {k: v for k, v in data.items() if k in allowed}
    if convert:
        data = dict(data)
        for k, fn in convert.items():
            if k in data:
                try:
                    data[k] = fn(data[k])
                except Exception as exc:
                    violations.append(f"{path}.{k}: {exc}")
                    return None
    try:
        return cls(**data)
    except DomainError as exc:
        violations.append(f"{path}: {exc}")
    except TypeError as exc:
        violations.append(f"{path}: {exc}")
    return None


def _config_from_dict(raw: dict, base_dir: Path) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ValidationError(["top level: expected a mapping"])
    violations: list[str] = []
    for k in set(raw) - _TOP_KEYS:
        violations.append(f"{k}: unknown section")

    orbit = _build_section(OrbitConfig, raw.get("orbit", {}), "orbit", violations,
                           convert={"epoch": _parse_epoch},
                           allowed=_SECTION_KEYS["orbit"])

    stations = []
    if "stations" not in raw:
        violations.append("stations: section is required")
    elif not isinstance(raw["stations"], list) or len(raw["stations"]) < 2:
        violations.append("stations: at least 2 stations are required")
    else:
        for i, sdata in enumerate(raw["stations"]):
            st = _build_section(GroundStation, sdata, f"stations[{i}]", violations,
                                allowed=_STATION_KEYS)
            if st is not None:
                stations.append(st)
        names = [s.name for s in stations]
        if len(set(names)) != len(names):
            violations.append("stations: names must be unique")

    tx = _build_section(TransmitterConfig, raw.get("transmitter", {}),
                        "transmitter", violations,
                        allowed=_SECTION_KEYS["transmitter"])
    beam = _build_section(BeamConfig, raw.get("beam", {}), "beam", violations,
                          convert={"waist_bounds_m": tuple},
                          allowed=_SECTION_KEYS["beam"])
    source = _build_section(SourceConfig, raw.get("source", {}), "source", violations,
                            convert={"lambda_bounds": tuple},
                            allowed=_SECTION_KEYS["source"])
    atm = _build_section(AtmosphereParams, raw.get("atmosphere", {}),
                         "atmosphere", violations,
                         allowed=_SECTION_KEYS["atmosphere"])
    extraction = _build_section(ExtractionConfig, raw.get("extraction", {}),
                                "extraction", violations,
                                allowed=_SECTION_KEYS["extraction"])
    camp = _build_section(CampaignConfig, raw.get("campaign", {}), "campaign",
                          violations, convert={"link": tuple},
                          allowed=_SECTION_KEYS["campaign"])

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        violations.append(f"seed: must be an integer, got {seed!r}")
    output_dir = raw.get("output_dir", "out")

    if camp is not None and stations:
        names = {s.name for s in stations}
        for nm in camp.link:
            if nm not in names:
                violations.append(f"campaign.link: station {nm!r} is not defined")
    if extraction is not None and extraction.mode == "lut":
        lut = Path(extraction.lut_path)
        if not lut.is_absolute():
            lut = base_dir / lut
        if not lut.exists():
            violations.append(f"extraction.lut_path: file not found: {lut}")
        else:
            extraction = ExtractionConfig(mode="lut", xi=extraction.xi,
                                          lut_path=str(lut),
                                          key_size_bits=extraction.key_size_bits)

    if violations:
        raise ValidationError(violations)
    return ScenarioConfig(
        orbit=orbit, stations=stations, transmitter=tx, beam=beam, source=source,
        atmosphere=atm, extraction=extraction, campaign=camp,
        seed=seed, output_dir=str(output_dir),
    )


def default_config_path() -> Path:
    """Path of the packaged default scenario (Micius-like, Iberian sites)."""
    return Path(resources.files("satqkd").joinpath("data/default.yaml"))


def load_config(path) -> ScenarioConfig:
    """Load and fully validate a scenario file ('default' for the shipped one)."""
    p = default_config_path() if str(path) == "default" else Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse config {p}: {exc}") from exc
    return _config_from_dict(raw, p.parent)
