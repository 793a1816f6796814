"""End-to-end campaign integration: per-pass link budgets, secret key
material, and monthly aggregates with use-case verdicts.

For each joint visibility window the model interpolates the
jitter-averaged capture probability from a slant-range grid (Fresnel
propagation is the dominant cost, so the grid is built once per campaign
and beam mode), composes the per-arm transmission p_T = eta_bar * ATML *
CL at every time step, optimizes the squeezing parameter at the best
sample of the pass, integrates the secret key rate over the window, and
aggregates key material into keys/s against the configured use cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import atmosphere as _atm
from . import extraction as _ex
from . import fidelity as _fid
from . import optics as _opt
from .config import ScenarioConfig
from .errors import AllZeroError, DomainError, EmptySpanError
from .orbit import EARTH_RADIUS_KM, GroundStation, PassWindow, pass_windows
from .source import SourceParams, optimize_lambda

__all__ = [
    "PassRecord",
    "CampaignSummary",
    "LinkModel",
    "simulate_pass",
    "run_campaign",
    "use_case_verdict",
]


@dataclass(frozen=True)
class PassRecord:
    """Time-resolved link budget and integrated key material of one pass."""

    index: int
    window: PassWindow
    weather: _atm.WeatherRealization
    lambda_sq: float
    p_ta: np.ndarray
    p_tb: np.ndarray
    fidelity: np.ndarray
    qber: np.ndarray
    skr: np.ndarray
    sifted_bits: float
    key_bits: float
    successful: bool

    def __post_init__(self):
        for name in ("p_ta", "p_tb", "fidelity", "qber", "skr"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class CampaignSummary:
    """Aggregates of one link over the campaign span."""

    link: tuple[str, str]
    n_passes: int
    n_successful: int
    success_fraction: float
    mean_key_bits_per_pass: float
    total_key_bits: float
    span_seconds: float
    key_size_bits: int
    keys_per_second: float
    verdicts: dict = field(default_factory=dict)


def use_case_verdict(summary: CampaignSummary, requirement_keys_per_s: float) -> bool:
    """True when the campaign key-material rate meets the requirement."""
    if not (requirement_keys_per_s > 0):
        raise DomainError(
            f"requirement must be > 0 keys/s, got {requirement_keys_per_s}"
        )
    return summary.keys_per_second >= requirement_keys_per_s


def _max_slant_km(altitude_km: float, max_zenith_deg: float) -> float:
    r = EARTH_RADIUS_KM
    cz = math.cos(math.radians(max_zenith_deg))
    return -r * cz + math.sqrt(r * r * cz * cz + 2.0 * r * altitude_km
                               + altitude_km**2)


class LinkModel:
    """Per-link evaluation context with cached eta_bar(slant) curves."""

    def __init__(self, config: ScenarioConfig, station_a: GroundStation,
                 station_b: GroundStation):
        self.config = config
        self.station_a = station_a
        self.station_b = station_b
        self.extraction = config.extraction.build_model()
        self.atm = config.atmosphere

        beam, tx = config.beam, config.transmitter
        z_lo = config.orbit.altitude_km * 0.999
        z_hi = _max_slant_km(config.orbit.altitude_km,
                             config.campaign.max_zenith_deg) * 1.005
        self._slants_m = np.linspace(z_lo, z_hi, beam.slant_grid_points) * 1e3
        self._eta_curves = {}
        self._w0_curves = {}
        for b in sorted({station_a.aperture_radius_m, station_b.aperture_radius_m}):
            etas = np.empty_like(self._slants_m)
            w0s = np.empty_like(self._slants_m)
            for i, z in enumerate(self._slants_m):
                if beam.mode == "optimized":
                    w0s[i], etas[i] = _opt.optimize_beamwaist(
                        tx.aperture_radius_m, b, z, tx.pointing_jitter_rad,
                        tx.wavelength_m, search_bounds=beam.waist_bounds_m,
                        grid_size=beam.grid_size, oversampling=beam.oversampling)
                else:
                    w0s[i] = beam.fixed_w0_m
                    etas[i] = _opt.waist_scan(
                        tx.aperture_radius_m, b, z, tx.pointing_jitter_rad,
                        tx.wavelength_m, [beam.fixed_w0_m],
                        grid_size=beam.grid_size,
                        oversampling=beam.oversampling)[0]
            self._eta_curves[b] = etas
            self._w0_curves[b] = w0s

        win = config.source.detection_window_s
        pd_a = _atm.dark_click_probability(self.atm, station_a, win)
        pd_b = _atm.dark_click_probability(self.atm, station_b, win)
        # The coefficient model carries a single dark probability.
        self.p_dark = 0.5 * (pd_a + pd_b)

    def eta_bar(self, station: GroundStation, slant_m) -> np.ndarray:
        curve = self._eta_curves[station.aperture_radius_m]
        return np.interp(slant_m, self._slants_m, curve)

    def arm_transmission(self, station: GroundStation, slant_km, zenith_deg,
                         weather: _atm.WeatherRealization) -> np.ndarray:
        eta = self.eta_bar(station, np.asarray(slant_km) * 1e3)
        trans = _atm.atml(zenith_deg, self.atm, tau=weather.tau)
        return eta * trans * station.coupling_loss

    def _zero_record(self, index: int, window: PassWindow,
                     weather: _atm.WeatherRealization,
                     lambda_sq: float = float("nan")) -> PassRecord:
        n = window.t.size
        z = np.zeros(n)
        return PassRecord(
            index=index, window=window, weather=weather, lambda_sq=lambda_sq,
            p_ta=z, p_tb=z.copy(), fidelity=z.copy(), qber=z.copy(), skr=z.copy(),
            sifted_bits=0.0, key_bits=0.0, successful=False,
        )

    def simulate_pass(self, window: PassWindow,
                      weather: _atm.WeatherRealization | None = None,
                      index: int = 0) -> PassRecord:
        """Integrate the link budget and key material over one window."""
        cfg = self.config
        if weather is None:
            weather = _atm.clear_sky_weather(self.atm)
        if weather.blocked:
            return self._zero_record(index, window, weather)

        p_ta = self.arm_transmission(self.station_a, window.slant_a_km,
                                     window.zenith_a_deg, weather)
        p_tb = self.arm_transmission(self.station_b, window.slant_b_km,
                                     window.zenith_b_deg, weather)

        # Squeezing parameter fixed per pass, chosen at the best-budget sample.
        ref = int(np.argmax(p_ta * p_tb))
        if cfg.source.lambda_mode == "optimized":
            budget_ref = _fid.ChannelBudget(float(p_ta[ref]), float(p_tb[ref]),
                                            self.p_dark)
            try:
                lam, _ = optimize_lambda(budget_ref, self.extraction,
                                         cfg.source.pair_rate_hz,
                                         bounds=cfg.source.lambda_bounds)
            except AllZeroError:
                return self._zero_record(index, window, weather)
        else:
            lam = cfg.source.lambda_fixed

        params = SourceParams.from_pair_rate(cfg.source.pair_rate_hz, lam,
                                             self.p_dark)
        n = window.t.size
        fid = np.empty(n)
        qb = np.empty(n)
        rate = np.empty(n)
        for i in range(n):
            bd = _fid.breakdown(params,
                                _fid.ChannelBudget(float(p_ta[i]), float(p_tb[i]),
                                                   self.p_dark))
            fid[i] = bd.fidelity
            qb[i] = bd.qber
            rate[i] = _ex.r_final(params.pulse_rate, bd)

        dt = window.step_s
        sifted = float(rate.sum() * dt)
        if self.extraction.mode == "lut":
            min_block = float(self.extraction.block_lengths[0])
            if sifted < min_block or sifted <= 0:
                skr = np.zeros(n)
            else:
                q_avg = float((qb * rate).sum() / rate.sum()) if rate.sum() > 0 else 0.0
                eff = self.extraction.lookup(sifted, q_avg)[0]
                skr = rate * eff
        else:
            eff = np.array([self.extraction.efficiency(q) for q in qb])
            skr = rate * eff
        key_bits = float(skr.sum() * dt)
        return PassRecord(
            index=index, window=window, weather=weather, lambda_sq=float(lam),
            p_ta=p_ta, p_tb=p_tb, fidelity=fid, qber=qb, skr=skr,
            sifted_bits=sifted, key_bits=key_bits, successful=key_bits > 0.0,
        )


def simulate_pass(window: PassWindow, config: ScenarioConfig,
                  weather: _atm.WeatherRealization | None = None) -> PassRecord:
    """Single-pass convenience wrapper building a fresh LinkModel."""
    sa, sb = config.link_stations()
    return LinkModel(config, sa, sb).simulate_pass(window, weather)


def run_campaign(link: tuple[str, str], span, config: ScenarioConfig, seed: int):
    """Simulate every joint pass of a link over the span.

    ``span`` is a (start, end) pair of datetimes or offsets in seconds
    from the orbit epoch, at least one day long.  Returns
    ``(CampaignSummary, [PassRecord])``; deterministic for a given seed.
    """
    t0 = config.orbit.offset_seconds(span[0])
    t1 = config.orbit.offset_seconds(span[1])
    if t1 - t0 < 86400.0:
        raise EmptySpanError("campaign span must cover at least one day")
    sa = config.station(link[0])
    sb = config.station(link[1])

    windows = pass_windows(
        config.orbit, sa, sb, (t0, t1), config.campaign.max_zenith_deg,
        step_s=config.campaign.sample_step_s,
        coarse_step_s=config.campaign.coarse_step_s,
    )
    model = LinkModel(config, sa, sb)

    records = []
    for idx, window in enumerate(windows):
        if config.atmosphere.weather_mode == "stochastic":
            wseed = np.random.SeedSequence(entropy=seed, spawn_key=(1, idx))
            weather = _atm.sample_weather(window, config.atmosphere, wseed)
        else:
            weather = _atm.clear_sky_weather(config.atmosphere)
        records.append(model.simulate_pass(window, weather, index=idx))

    n_passes = len(records)
    n_success = sum(1 for r in records if r.successful)
    total_bits = float(sum(r.key_bits for r in records))
    span_s = t1 - t0
    key_size = config.extraction.key_size_bits
    keys_per_second = total_bits / (key_size * span_s) if span_s > 0 else 0.0
    summary = CampaignSummary(
        link=(sa.name, sb.name),
        n_passes=n_passes,
        n_successful=n_success,
        success_fraction=(n_success / n_passes) if n_passes else 0.0,
        mean_key_bits_per_pass=(total_bits / n_passes) if n_passes else 0.0,
        total_key_bits=total_bits,
        span_seconds=span_s,
        key_size_bits=key_size,
        keys_per_second=keys_per_second,
        verdicts={},
    )
    verdicts = {name: use_case_verdict(summary, req)
                for name, req in sorted(config.campaign.use_cases.items())}
    summary.verdicts.update(verdicts)
    return summary, records
