"""Free-space optical channel: truncated-Gaussian propagation, aperture
capture and pointing-jitter statistics.

The downlink beam is a Gaussian mode of waist ``w0`` truncated by the
transmitter aperture of radius ``a``.  The receiver-plane intensity is
computed with a single-FFT Fresnel propagator, convolved with the receiver
aperture disk to obtain the capture probability ``g(x0, y0)`` as a function
of beam displacement, and averaged over the isotropic Gaussian displacement
produced by angular pointing jitter (per-axis sigma = z * sigma_pj).

All grids are square with power-of-two side length.  Sampling is planned
automatically so that one grid resolves the transmitter mode, contains the
receiver-plane beam, resolves the receiver aperture and the jitter scale,
and satisfies the Fresnel-kernel Nyquist condition; violations raise
typed errors instead of silently aliasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .errors import (
    AliasingError,
    DomainError,
    NoInteriorMaximumError,
    ResolutionError,
    TailTruncationError,
)

__all__ = [
    "BeamChannel",
    "IntensityField",
    "CaptureMap",
    "CapturePdf",
    "propagate_truncated_gaussian",
    "capture_probability_map",
    "jitter_averaged_capture",
    "capture_pdf",
    "monte_carlo_capture",
    "waist_scan",
    "optimize_beamwaist",
]

# Minimum number of samples across the receiver aperture diameter.
_MIN_APERTURE_SAMPLES = 4
# Samples per jitter sigma used when planning the receiver grid.
_JITTER_SAMPLES_PER_SIGMA = 3.0
# Minimum samples across min(w0, a) at the transmitter plane.
_MIN_INPUT_SAMPLES = 2.0
# Beam radii that must fit inside the receiver grid: hard floor and target.
_CONTAIN_HARD = 3.5
_CONTAIN_PREF = 8.0


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _fft2(x):
    return _fft.fft2(x, workers=-1)


def _ifft2(x):
    return _fft.ifft2(x, workers=-1)


@dataclass(frozen=True)
class BeamChannel:
    """Geometry of one optical downlink.

    Attributes
    ----------
    w0 : beam waist at the transmitter aperture (m)
    a : transmitter aperture radius (m)
    b : receiver aperture radius (m)
    z : transmitter-receiver distance (m)
    wavelength : optical wavelength (m)
    sigma_pj : one-axis angular pointing jitter standard deviation (rad)
    """

    w0: float
    a: float
    b: float
    z: float
    wavelength: float
    sigma_pj: float = 0.0

    def __post_init__(self):
        for name in ("w0", "a", "b", "z", "wavelength"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"BeamChannel.{name} must be finite and > 0, got {v}")
        if not (math.isfinite(self.sigma_pj) and self.sigma_pj >= 0):
            raise DomainError(f"BeamChannel.sigma_pj must be >= 0, got {self.sigma_pj}")

    @property
    def jitter_sigma(self) -> float:
        """Beam-center displacement sigma on the receiver plane (m)."""
        return self.z * self.sigma_pj

    @property
    def far_field(self) -> bool:
        """True when z exceeds the aperture Fresnel distance pi*a^2/wavelength."""
        return self.z >= math.pi * self.a**2 / self.wavelength


@dataclass(frozen=True)
class IntensityField:
    """Receiver-plane probability density of the photon position.

    ``grid`` holds density values (1/m^2) on a square grid of spacing
    ``dx``; its discrete integral equals ``total_power``, the fraction of
    the emitted photon transmitted by the truncated aperture.
    """

    grid: np.ndarray
    extent: float
    total_power: float

    def __post_init__(self):
        self.grid.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    def coords(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    def radial_rms(self) -> float:
        """RMS radius sqrt(E[x^2 + y^2]) of the intensity distribution."""
        c = self.coords()
        r2 = c[:, None] ** 2 + c[None, :] ** 2
        return math.sqrt(float((self.grid * r2).sum() / self.grid.sum()))


@dataclass(frozen=True)
class CaptureMap:
    """Capture probability g(x0, y0) versus beam-center displacement."""

    grid: np.ndarray
    extent: float

    def __post_init__(self):
        self.grid.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    def coords(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    @property
    def center_value(self) -> float:
        return float(self.grid[self.n // 2, self.n // 2])


@dataclass(frozen=True)
class CapturePdf:
    """Histogram estimate of the capture-probability density f(eta)."""

    bin_edges: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        self.bin_edges.setflags(write=False)
        self.densities.setflags(write=False)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def mean(self) -> float:
        return float((self.densities * self.centers * self.widths).sum())

    def variance(self) -> float:
        m = self.mean()
        return float((self.densities * (self.centers - m) ** 2 * self.widths).sum())


@dataclass(frozen=True)
class _GridPlan:
    """Sampling of the transmitter (dx1) and receiver (dx2) planes."""

    n: int
    dx1: float
    dx2: float

    @property
    def l1(self) -> float:
        return self.n * self.dx1

    @property
    def l2(self) -> float:
        return self.n * self.dx2


def _plan_grids(channel: BeamChannel, n: int, oversampling: float,
                sizing_w0: float | None = None) -> _GridPlan:
    """Choose dx1/dx2 for the single-FFT propagator (dx1*dx2 = wavelength*z/n).

    ``sizing_w0`` lets a waist scan plan one common grid for its most
    demanding (smallest) waist so every scan point shares the same plan.
    """
    if not _is_pow2(n):
        raise DomainError(f"grid_size must be a power of two, got {n}")
    if not (oversampling > 0 and math.isfinite(oversampling)):
        raise DomainError(f"oversampling must be positive, got {oversampling}")
    lam, z, a, b = channel.wavelength, channel.z, channel.a, channel.b
    w0s = channel.w0 if sizing_w0 is None else sizing_w0
    sigma = channel.jitter_sigma

    # Receiver-plane beam scale: Gaussian divergence or, for heavily
    # truncated beams, the aperture diffraction scale with ring margin.
    zr = math.pi * w0s**2 / lam
    w_gauss = w0s * math.sqrt(1.0 + (z / zr) ** 2)
    w_eff = max(w_gauss, 2.0 * lam * z / (math.pi * a))

    caps = [b / _MIN_APERTURE_SAMPLES * 2.0]
    if sigma > 0:
        caps.append(sigma / _JITTER_SAMPLES_PER_SIGMA)
    dx2_cap = min(caps) / oversampling

    l2_hard = 2.0 * (_CONTAIN_HARD * w_eff + 4.0 * sigma + b)
    l2_pref = 2.0 * (_CONTAIN_PREF * w_eff + 4.0 * sigma + b)
    dx2_min = l2_hard / n
    if dx2_min > dx2_cap:
        raise ResolutionError(
            f"cannot resolve receiver aperture/jitter (needs dx <= {dx2_cap:.4g} m) "
            f"while containing the beam (needs extent >= {l2_hard / 2:.4g} m) "
            f"at grid_size {n}; increase grid_size"
        )
    dx2 = min(max(l2_pref / n, dx2_min), dx2_cap)
    dx1 = lam * z / (n * dx2)

    if n * dx1 < 2.2 * (2.0 * a):
        raise AliasingError(
            f"transmitter plane extent {n * dx1:.4g} m does not contain the "
            f"aperture of radius {a:.4g} m"
        )
    if dx1 > min(channel.w0, a) / _MIN_INPUT_SAMPLES:
        raise AliasingError(
            f"transmitter sampling {dx1:.4g} m under-resolves the beam "
            f"(w0 = {channel.w0:.4g} m, a = {a:.4g} m); increase grid_size"
        )
    # Fresnel chirp Nyquist over the aperture support.
    if dx1 > lam * z / (4.0 * a):
        raise AliasingError(
            f"Fresnel kernel Nyquist violated: dx1 = {dx1:.4g} m exceeds "
            f"wavelength*z/(4a) = {lam * z / (4 * a):.4g} m (near-field geometry)"
        )
    return _GridPlan(n=n, dx1=dx1, dx2=dx2)


def _disk_coverage(coords: np.ndarray, radius: float, dx: float) -> np.ndarray:
    """Anti-aliased disk indicator: cell coverage via a linear edge ramp."""
    r = np.hypot(coords[:, None], coords[None, :])
    return np.clip((radius - r) / dx + 0.5, 0.0, 1.0)


def _propagate_on_plan(channel: BeamChannel, plan: _GridPlan) -> IntensityField:
    n, dx1, dx2 = plan.n, plan.dx1, plan.dx2
    lam, z = channel.wavelength, channel.z
    c1 = (np.arange(n) - n // 2) * dx1
    r2 = c1[:, None] ** 2 + c1[None, :] ** 2

    # Unit-power Gaussian mode amplitude, truncated by the aperture; the
    # sqrt of the area coverage keeps cell energy exact at the edge.
    amp2 = (2.0 / (math.pi * channel.w0**2)) * np.exp(-2.0 * r2 / channel.w0**2)
    cover = _disk_coverage(c1, channel.a, dx1)
    field = np.sqrt(amp2 * cover).astype(np.complex128)
    total_power = float((amp2 * cover).sum() * dx1 * dx1)

    # Single-FFT Fresnel: quadratic input phase then scaled Fourier transform.
    field *= np.exp(1j * (math.pi / (lam * z)) * r2)
    spec = _fft.fftshift(_fft2(_fft.ifftshift(field)))
    intensity = (np.abs(spec) ** 2) * (dx1 * dx1 / (lam * z)) ** 2

    # Parseval guarantees the discrete integral; renormalize the residual
    # float rounding so the stored total_power is exact.
    s = float(intensity.sum() * dx2 * dx2)
    intensity *= total_power / s
    return IntensityField(grid=intensity, extent=n * dx2 / 2.0, total_power=total_power)


def propagate_truncated_gaussian(channel: BeamChannel, grid_size: int = 2048,
                                 oversampling: float = 1.0) -> IntensityField:
    """Propagate the truncated Gaussian mode to the receiver plane.

    Returns the photon-position probability density I(x, y) at distance z.
    Its discrete integral equals the aperture-truncation transmission of
    the mode (energy is conserved by the propagation itself).

    Raises AliasingError when the sampling cannot satisfy the Fresnel
    Nyquist condition and ResolutionError when aperture/jitter scales and
    beam containment cannot be met on one grid of this size.
    """
    plan = _plan_grids(channel, grid_size, oversampling)
    return _propagate_on_plan(channel, plan)


def capture_probability_map(fieldmap: IntensityField, b: float) -> CaptureMap:
    """Convolve the intensity with the receiver-aperture disk of radius b.

    g(x0, y0) is the probability of capturing the photon when the beam
    center is displaced to (x0, y0).
    """
    if not (b > 0 and math.isfinite(b)):
        raise DomainError(f"receiver radius must be > 0, got {b}")
    dx = fieldmap.dx
    if b < dx * _MIN_APERTURE_SAMPLES / 2.0:
        raise ResolutionError(
            f"receiver aperture (radius {b:.4g} m) spans fewer than "
            f"{_MIN_APERTURE_SAMPLES} samples at dx = {dx:.4g} m"
        )
    disk = _disk_coverage(fieldmap.coords(), b, dx)
    conv = _ifft2(_fft2(_fft.ifftshift(fieldmap.grid)) * _fft2(_fft.ifftshift(disk)))
    g = _fft.fftshift(conv.real) * dx * dx

    low, high = float(g.min()), float(g.max())
    if low < -1e-10 or high > 1.0 + 1e-10:
        raise FloatingPointError(
            f"capture map out of [0, 1] beyond rounding noise: [{low}, {high}]"
        )
    np.clip(g, 0.0, 1.0, out=g)
    return CaptureMap(grid=g, extent=fieldmap.extent)


def _jitter_weights(capmap: CaptureMap, sigma: float) -> np.ndarray:
    """Discrete pointing-jitter mass per cell, normalized to unit total."""
    if 4.0 * sigma > capmap.extent:
        raise TailTruncationError(
            f"jitter 4*sigma = {4 * sigma:.4g} m exceeds map extent "
            f"{capmap.extent:.4g} m"
        )
    c = capmap.coords()
    r2 = c[:, None] ** 2 + c[None, :] ** 2
    w = np.exp(-r2 / (2.0 * sigma * sigma))
    return w / w.sum()


def jitter_averaged_capture(capmap: CaptureMap, channel: BeamChannel) -> float:
    """Average capture probability over the pointing-jitter distribution."""
    sigma = channel.jitter_sigma
    if sigma == 0.0:
        return capmap.center_value
    w = _jitter_weights(capmap, sigma)
    return float(np.clip((w * capmap.grid).sum(), 0.0, 1.0))


def capture_pdf(capmap: CaptureMap, channel: BeamChannel, n_bins: int) -> CapturePdf:
    """Histogram estimate of the capture-probability density f(eta)."""
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    gmax = float(capmap.grid.max())
    edges = np.linspace(0.0, gmax * (1.0 + 1e-12) + 1e-300, n_bins + 1)
    sigma = channel.jitter_sigma
    if sigma == 0.0:
        mass, _ = np.histogram([capmap.center_value], bins=edges)
        mass = mass.astype(float)
    else:
        w = _jitter_weights(capmap, sigma)
        mass, _ = np.histogram(capmap.grid.ravel(), bins=edges, weights=w.ravel())
    densities = mass / np.diff(edges)
    return CapturePdf(bin_edges=edges, densities=densities)


def monte_carlo_capture(capmap: CaptureMap, channel: BeamChannel, n_samples: int,
                        seed: int) -> float:
    """Monte-Carlo estimate of the jitter-averaged capture probability.

    Samples beam displacements from the jitter Gaussian and reads the
    capture map by bilinear interpolation.  Independent of the quadrature
    path in jitter_averaged_capture; used as its oracle.
    """
    sigma = channel.jitter_sigma
    if sigma == 0.0:
        return capmap.center_value
    if 4.0 * sigma > capmap.extent:
        raise TailTruncationError("jitter tails exceed the capture map extent")
    rng = np.random.default_rng(seed)
    pts = rng.normal(0.0, sigma, size=(n_samples, 2))
    c = capmap.coords()
    np.clip(pts, c[0], c[-1], out=pts)
    # Bilinear interpolation on the uniform grid.
    u = (pts - c[0]) / capmap.dx
    i0 = np.minimum(u.astype(int), capmap.n - 2)
    f = u - i0
    g = capmap.grid
    gi = (g[i0[:, 0], i0[:, 1]] * (1 - f[:, 0]) * (1 - f[:, 1])
          + g[i0[:, 0] + 1, i0[:, 1]] * f[:, 0] * (1 - f[:, 1])
          + g[i0[:, 0], i0[:, 1] + 1] * (1 - f[:, 0]) * f[:, 1]
          + g[i0[:, 0] + 1, i0[:, 1] + 1] * f[:, 0] * f[:, 1])
    return float(gi.mean())


class _EtaEvaluator:
    """Shared-grid evaluator of eta_bar(w0) for waist scans.

    Fixes one grid plan (sized for the smallest waist to be scanned) and
    caches the jitter-weighted aperture kernel, so each waist costs a
    single FFT.  Mathematically identical to propagating, convolving and
    averaging on that plan.
    """

    def __init__(self, a, b, z, sigma_pj, wavelength, w0_min, grid_size, oversampling):
        self.a, self.b, self.z = a, b, z
        self.sigma_pj, self.wavelength = sigma_pj, wavelength
        ref = BeamChannel(w0=w0_min, a=a, b=b, z=z, wavelength=wavelength,
                          sigma_pj=sigma_pj)
        self.plan = _plan_grids(ref, grid_size, oversampling, sizing_w0=w0_min)
        c2 = (np.arange(self.plan.n) - self.plan.n // 2) * self.plan.dx2
        disk = _disk_coverage(c2, b, self.plan.dx2)
        sigma = z * sigma_pj
        if sigma > 0:
            if 4.0 * sigma > self.plan.l2 / 2.0:
                raise TailTruncationError("jitter tails exceed the planned grid")
            r2 = c2[:, None] ** 2 + c2[None, :] ** 2
            w = np.exp(-r2 / (2.0 * sigma * sigma))
            w /= w.sum()
            kern = _ifft2(_fft2(_fft.ifftshift(w)) * _fft2(_fft.ifftshift(disk)))
            self.kernel = np.clip(_fft.fftshift(kern.real), 0.0, 1.0)
        else:
            # Delta jitter: eta_bar reduces to g(0, 0) = sum(I * disk) * dx^2.
            self.kernel = disk
        # w0-independent transmitter-plane factors, computed once.
        c1 = (np.arange(self.plan.n) - self.plan.n // 2) * self.plan.dx1
        self._r2_in = c1[:, None] ** 2 + c1[None, :] ** 2
        cover = _disk_coverage(c1, a, self.plan.dx1)
        self._chirped_cover = (np.sqrt(cover)
                               * np.exp(1j * (math.pi / (wavelength * z)) * self._r2_in))

    def eta(self, w0: float) -> float:
        if self.plan.dx1 > min(w0, self.a) / _MIN_INPUT_SAMPLES:
            raise AliasingError(
                f"scan grid under-resolves w0 = {w0:.4g} m; increase grid_size"
            )
        plan = self.plan
        amp = (math.sqrt(2.0 / math.pi) / w0) * np.exp(-self._r2_in / w0**2)
        spec = _fft.fftshift(_fft2(_fft.ifftshift(amp * self._chirped_cover)))
        scale = (plan.dx1 * plan.dx1 / (self.wavelength * self.z)) ** 2
        val = float((np.abs(spec) ** 2 * self.kernel).sum() * scale * plan.dx2**2)
        return min(max(val, 0.0), 1.0)


def waist_scan(a, b, z, sigma_pj, wavelength, w0_values, grid_size=2048,
               oversampling=1.0) -> np.ndarray:
    """Evaluate eta_bar over a set of waists on one shared grid plan."""
    w0_values = np.asarray(w0_values, dtype=float)
    if w0_values.size == 0 or np.any(w0_values <= 0):
        raise DomainError("w0_values must be positive and non-empty")
    ev = _EtaEvaluator(a, b, z, sigma_pj, wavelength, float(w0_values.min()),
                       grid_size, oversampling)
    return np.array([ev.eta(w) for w in w0_values])


def optimize_beamwaist(a, b, z, sigma_pj, wavelength, search_bounds=None,
                       grid_size=2048, oversampling=1.0,
                       coarse_points=32, rel_tol=1e-3, return_scan=False):
    """Find the beam waist maximizing the jitter-averaged capture.

    A coarse log-spaced scan brackets the maximum, which must be interior
    to the search bounds (NoInteriorMaximumError otherwise); golden-section
    search then refines the bracket to ``rel_tol`` relative width.

    Returns ``(w0_opt, eta_opt)``, plus the coarse scan arrays
    ``(w0s, etas)`` when ``return_scan`` is set.
    """
    if search_bounds is None:
        search_bounds = (a / 12.0, 2.0 * a)
    lo, hi = float(search_bounds[0]), float(search_bounds[1])
    if not (0 < lo < hi):
        raise DomainError(f"invalid search bounds ({lo}, {hi})")

    ev = _EtaEvaluator(a, b, z, sigma_pj, wavelength, lo, grid_size, oversampling)
    w0s = np.geomspace(lo, hi, coarse_points)
    etas = np.array([ev.eta(w) for w in w0s])
    k = int(np.argmax(etas))
    if k == 0 or k == len(w0s) - 1:
        raise NoInteriorMaximumError(
            f"eta_bar is monotone over bounds ({lo:.4g}, {hi:.4g}); argmax at "
            f"w0 = {w0s[k]:.4g} m"
        )

    # Golden-section refinement of the three-point bracket.
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x_lo, x_hi = w0s[k - 1], w0s[k + 1]
    x1 = x_hi - invphi * (x_hi - x_lo)
    x2 = x_lo + invphi * (x_hi - x_lo)
    f1, f2 = ev.eta(x1), ev.eta(x2)
    while (x_hi - x_lo) > rel_tol * x_lo:
        if f1 >= f2:
            x_hi, x2, f2 = x2, x1, f1
            x1 = x_hi - invphi * (x_hi - x_lo)
            f1 = ev.eta(x1)
        else:
            x_lo, x1, f1 = x1, x2, f2
            x2 = x_lo + invphi * (x_hi - x_lo)
            f2 = ev.eta(x2)
    w_best = x1 if f1 >= f2 else x2
    f_best = max(f1, f2)
    # Never return below the best coarse sample.
    if f_best < etas[k]:
        w_best, f_best = float(w0s[k]), float(etas[k])
    if return_scan:
        return float(w_best), float(f_best), (w0s, etas)
    return float(w_best), float(f_best)
