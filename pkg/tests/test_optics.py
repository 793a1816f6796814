import math

import numpy as np
import pytest

from satqkd.errors import (
    AliasingError,
    DomainError,
    NoInteriorMaximumError,
    ResolutionError,
    TailTruncationError,
)
from satqkd.optics import (
    BeamChannel,
    CaptureMap,
    IntensityField,
    capture_pdf,
    capture_probability_map,
    jitter_averaged_capture,
    monte_carlo_capture,
    optimize_beamwaist,
    propagate_truncated_gaussian,
    waist_scan,
)

from conftest import APERTURE_RX, APERTURE_TX, JITTER, WAVELENGTH


def channel(w0, z=1e6, sigma_pj=JITTER, b=APERTURE_RX):
    return BeamChannel(w0=w0, a=APERTURE_TX, b=b, z=z,
                       wavelength=WAVELENGTH, sigma_pj=sigma_pj)


def pipeline_eta(w0, z=1e6, sigma_pj=JITTER, b=APERTURE_RX, n=1024):
    ch = channel(w0, z, sigma_pj, b)
    fmap = propagate_truncated_gaussian(ch, n)
    gmap = capture_probability_map(fmap, ch.b)
    return jitter_averaged_capture(gmap, ch), gmap, ch


class TestBeamChannel:
    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            BeamChannel(w0=-0.1, a=0.15, b=0.6, z=1e6, wavelength=WAVELENGTH)
        with pytest.raises(DomainError):
            BeamChannel(w0=0.1, a=0.15, b=0.6, z=1e6, wavelength=WAVELENGTH,
                        sigma_pj=-1e-7)
        with pytest.raises(DomainError):
            BeamChannel(w0=math.inf, a=0.15, b=0.6, z=1e6, wavelength=WAVELENGTH)

    def test_far_field_flag(self):
        assert channel(0.11, z=1e6).far_field
        assert not channel(0.11, z=1e4).far_field


class TestPropagation:
    def test_energy_conservation_w0_sweep(self):
        # discrete integral must match the analytic aperture transmission,
        # both before (total_power) and after propagation (grid integral)
        for w0 in (0.03, 0.06, 0.11, 0.15, 0.22):
            ch = channel(w0)
            fmap = propagate_truncated_gaussian(ch, 1024)
            expected = 1.0 - math.exp(-2.0 * ch.a**2 / w0**2)
            assert fmap.total_power == pytest.approx(expected, rel=5e-3)
            integral = float(fmap.grid.sum()) * fmap.dx**2
            assert integral == pytest.approx(expected, rel=5e-3)

    def test_untruncated_gaussian_divergence(self):
        # w0 = a/10: truncation negligible, RMS radius follows the
        # far-field divergence half-angle wavelength/(pi*w0)
        ch = channel(0.015)
        fmap = propagate_truncated_gaussian(ch, 1024)
        w_measured = fmap.radial_rms() * math.sqrt(2.0)
        w_theory = WAVELENGTH * ch.z / (math.pi * ch.w0)
        assert w_measured == pytest.approx(w_theory, rel=0.02)

    def test_diffraction_rings_when_truncated(self):
        # heavy truncation produces a non-monotonic radial profile
        ch = channel(0.11, z=5e5)
        fmap = propagate_truncated_gaussian(ch, 2048)
        n = fmap.n
        radial = fmap.grid[n // 2, n // 2:]
        rising = np.diff(radial) > radial.max() * 1e-9
        assert rising.any()

    def test_grid_size_must_be_power_of_two(self):
        with pytest.raises(DomainError):
            propagate_truncated_gaussian(channel(0.11), 1000)

    def test_near_field_raises_aliasing(self):
        # at 1 km the output window cannot span the transmitter aperture
        with pytest.raises(AliasingError):
            propagate_truncated_gaussian(channel(0.11, z=1e3, sigma_pj=0.0), 1024)

    def test_unresolvable_geometry_raises_resolution(self):
        with pytest.raises(ResolutionError):
            propagate_truncated_gaussian(channel(0.015, z=4e5), 512)
        with pytest.raises(ResolutionError):
            propagate_truncated_gaussian(channel(0.11), 1024, oversampling=50.0)


def synthetic_field(n=64, extent=4.0, sigma=1.0):
    dx = 2.0 * extent / n
    c = (np.arange(n) - n // 2) * dx
    r2 = c[:, None] ** 2 + c[None, :] ** 2
    grid = np.exp(-r2 / (2 * sigma**2))
    grid /= grid.sum() * dx * dx
    return IntensityField(grid=grid, extent=extent, total_power=1.0)


class TestCaptureMap:
    def test_fft_matches_direct_convolution(self):
        field = synthetic_field(n=64)
        b = 0.8
        gmap = capture_probability_map(field, b)
        dx = field.dx
        c = field.coords()
        disk = np.clip((b - np.hypot(c[:, None], c[None, :])) / dx + 0.5, 0, 1)
        direct = np.zeros_like(field.grid)
        for i in range(64):
            for j in range(64):
                shifted = np.roll(np.roll(disk, i - 32, axis=0), j - 32, axis=1)
                direct[i, j] = (field.grid * shifted).sum() * dx * dx
        scale = max(direct.max(), 1e-30)
        assert np.max(np.abs(gmap.grid - direct)) / scale < 1e-6

    def test_center_is_global_maximum(self):
        _, gmap, _ = pipeline_eta(0.11)
        assert gmap.center_value == pytest.approx(float(gmap.grid.max()), abs=1e-12)

    def test_radially_non_increasing_for_smooth_beam(self):
        # tolerance covers the FFT-convolution noise floor (~1e-10 absolute)
        _, gmap, _ = pipeline_eta(0.06)
        n = gmap.n
        radial = gmap.grid[n // 2, n // 2:]
        assert np.all(np.diff(radial) <= radial.max() * 1e-8)

    def test_full_aperture_captures_total_power(self):
        # disk covering the whole grid: capture equals total_power everywhere
        field = synthetic_field(n=64, extent=4.0, sigma=0.5)
        gmap = capture_probability_map(field, b=1.5 * field.extent)
        assert np.all(np.abs(gmap.grid - field.total_power) < 1e-6)

    def test_under_resolved_aperture_raises(self):
        field = synthetic_field(n=64, extent=4.0)
        with pytest.raises(ResolutionError):
            capture_probability_map(field, b=field.dx)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(DomainError):
            capture_probability_map(synthetic_field(), 0.0)


class TestJitterAverage:
    def test_zero_jitter_returns_center(self):
        eta0, gmap, _ = pipeline_eta(0.11, sigma_pj=0.0)
        assert eta0 == gmap.center_value

    def test_matches_monte_carlo(self):
        eta, gmap, ch = pipeline_eta(0.11)
        mc = monte_carlo_capture(gmap, ch, 100_000, seed=42)
        assert eta == pytest.approx(mc, rel=0.01)

    def test_non_increasing_in_jitter(self):
        etas = [pipeline_eta(0.11, sigma_pj=s)[0]
                for s in (0.1e-6, 0.47e-6, 1.0e-6)]
        assert etas[0] >= etas[1] >= etas[2]

    def test_non_decreasing_in_receiver_aperture(self):
        etas = [pipeline_eta(0.11, b=b)[0] for b in (0.4, 0.6, 0.8)]
        assert etas[0] <= etas[1] <= etas[2]

    def test_tail_truncation_guard(self):
        _, gmap, _ = pipeline_eta(0.11)
        huge = BeamChannel(w0=0.11, a=APERTURE_TX, b=APERTURE_RX, z=1e6,
                           wavelength=WAVELENGTH, sigma_pj=1e-3)
        with pytest.raises(TailTruncationError):
            jitter_averaged_capture(gmap, huge)


class TestCapturePdf:
    def test_zero_jitter_single_bin(self):
        _, gmap, _ = pipeline_eta(0.11, sigma_pj=0.0)
        ch = channel(0.11, sigma_pj=0.0)
        pdf = capture_pdf(gmap, ch, 100)
        hot = pdf.densities > 0
        assert hot.sum() == 1
        lo = pdf.bin_edges[:-1][hot][0]
        hi = pdf.bin_edges[1:][hot][0]
        assert lo <= gmap.center_value <= hi

    def test_normalization_and_mean_consistency(self):
        eta, gmap, ch = pipeline_eta(0.11)
        pdf = capture_pdf(gmap, ch, 400)
        assert (pdf.densities * pdf.widths).sum() == pytest.approx(1.0, abs=1e-3)
        assert pdf.mean() == pytest.approx(eta, abs=1e-3)

    def test_optimized_waist_has_larger_fluctuations(self):
        _, gmap_small, ch_small = pipeline_eta(0.015)
        _, gmap_opt, ch_opt = pipeline_eta(0.13)
        pdf_small = capture_pdf(gmap_small, ch_small, 400)
        pdf_opt = capture_pdf(gmap_opt, ch_opt, 400)
        assert pdf_opt.variance() > pdf_small.variance()


class TestOptimizer:
    def test_matches_dense_grid(self):
        # golden-section argmax vs a 200-point scan, coarse 512^2 grid for
        # speed but identical physics
        bounds = (0.03, 0.30)
        w_opt, eta_opt = optimize_beamwaist(
            APERTURE_TX, APERTURE_RX, 1e6, JITTER, WAVELENGTH,
            search_bounds=bounds, grid_size=512)
        w0s = np.geomspace(bounds[0], bounds[1], 200)
        etas = waist_scan(APERTURE_TX, APERTURE_RX, 1e6, JITTER, WAVELENGTH,
                          w0s, grid_size=512)
        w_grid = w0s[int(np.argmax(etas))]
        assert w_opt == pytest.approx(w_grid, rel=0.02)
        assert eta_opt >= etas.max() - 1e-12

    def test_monotone_objective_raises(self):
        # bounds clipped around the known maximum leave only a rising edge
        with pytest.raises(NoInteriorMaximumError):
            optimize_beamwaist(APERTURE_TX, APERTURE_RX, 1e6, JITTER,
                               WAVELENGTH, search_bounds=(0.03, 0.10),
                               grid_size=512)

    def test_invalid_bounds(self):
        with pytest.raises(DomainError):
            optimize_beamwaist(APERTURE_TX, APERTURE_RX, 1e6, JITTER,
                               WAVELENGTH, search_bounds=(0.2, 0.1),
                               grid_size=512)

    def test_scan_rejects_empty_or_negative(self):
        with pytest.raises(DomainError):
            waist_scan(APERTURE_TX, APERTURE_RX, 1e6, JITTER, WAVELENGTH, [],
                       grid_size=512)
        with pytest.raises(DomainError):
            waist_scan(APERTURE_TX, APERTURE_RX, 1e6, JITTER, WAVELENGTH,
                       [-0.1], grid_size=512)
