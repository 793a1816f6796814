"""Entangled-pair source model: pair-number statistics of the SPDC state
and optimization of the squeezing parameter for maximum secret key rate.

The source emits the polarization-entangled two-mode-squeezed expansion
whose n-pair manifold has probability (n+1) * lambda^n * (1-lambda)^(2-n)
(vacuum (1-lambda)^2, one pair 2*lambda*(1-lambda), two pairs 3*lambda^2).
The single-pair manifold is the Bell state with anticorrelated
polarizations; higher manifolds split evenly over their n+1 polarization
terms.  The expansion is the weak-pump truncation: its norm is
1 + O(lambda^2), exact normalization being meaningful only for
lambda << 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroError, DomainError, ZeroAcceptanceError

__all__ = ["SourceParams", "FockAmplitudes", "state_coefficients", "optimize_lambda"]


@dataclass(frozen=True)
class SourceParams:
    """Source operating point.

    ``lambda_sq`` is the squeezing parameter; the mean pair number per
    attempt window is mu = 2*lambda_sq exactly.  ``pulse_rate`` is the
    attempt-window rate; the emitted pair rate is the truncation-corrected
    pulse_rate * mu * (1-lambda)^2 (single-pair manifold flux).
    ``p_dark`` records the spurious-click probability per detection window.
    """

    lambda_sq: float
    pulse_rate: float
    p_dark: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.lambda_sq < 1.0):
            raise DomainError(
                f"lambda_sq must be in [0, 1), got {self.lambda_sq}"
            )
        if not (self.pulse_rate > 0 and math.isfinite(self.pulse_rate)):
            raise DomainError(f"pulse_rate must be > 0, got {self.pulse_rate}")
        if not (0.0 <= self.p_dark < 1.0):
            raise DomainError(f"p_dark must be in [0, 1), got {self.p_dark}")

    @property
    def mu(self) -> float:
        """Mean photon pairs per attempt window."""
        return 2.0 * self.lambda_sq

    @property
    def pair_rate(self) -> float:
        """Emitted pair rate (pairs/s), truncation corrected."""
        lam = self.lambda_sq
        return self.pulse_rate * self.mu * (1.0 - lam) ** 2

    @classmethod
    def from_pair_rate(cls, pair_rate: float, lambda_sq: float,
                       p_dark: float = 0.0) -> "SourceParams":
        """Fix the emitted pair rate and derive the attempt-window rate.

        The source is treated as effectively CW pumped: attempts are
        detection windows whose rate is chosen so the configured pair rate
        is honored for any lambda.
        """
        if not (pair_rate > 0 and math.isfinite(pair_rate)):
            raise DomainError(f"pair_rate must be > 0, got {pair_rate}")
        if not (0.0 < lambda_sq < 1.0):
            raise DomainError(
                f"lambda_sq must be in (0, 1) to derive a window rate, got {lambda_sq}"
            )
        rate = pair_rate / (2.0 * lambda_sq * (1.0 - lambda_sq) ** 2)
        return cls(lambda_sq=lambda_sq, pulse_rate=rate, p_dark=p_dark)


@dataclass(frozen=True)
class FockAmplitudes:
    """Per-manifold amplitudes of the emitted state up to n_max pairs.

    Manifold n holds n+1 orthogonal polarization terms of equal weight;
    within the single-pair manifold they form the coherent Bell
    superposition, within higher manifolds the equal split of the
    expansion.  The squared norm converges to 1 + O(lambda^2) as n_max
    grows (the expansion is exactly normalized only in the weak-pump
    limit).
    """

    lambda_sq: float
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes.setflags(write=False)

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    def manifold_probs(self) -> np.ndarray:
        return self.amplitudes**2

    def norm_squared(self) -> float:
        return float((self.amplitudes**2).sum())

    def term_amplitudes(self, n: int) -> np.ndarray:
        """Equal amplitudes of the n+1 polarization terms of manifold n."""
        return np.full(n + 1, self.amplitudes[n] / math.sqrt(n + 1))

    @staticmethod
    def term_labels(n: int) -> list[tuple[str, str]]:
        """Polarization content (side A, side B) of each manifold-n term."""

        def ket(h: int, v: int) -> str:
            parts = []
            if h:
                parts.append(f"{h if h > 1 else ''}H")
            if v:
                parts.append(f"{v if v > 1 else ''}V")
            return "".join(parts) if parts else "0"

        return [(ket(n - k, k), ket(k, n - k)) for k in range(n + 1)]


def state_coefficients(params: SourceParams, n_max: int) -> FockAmplitudes:
    """Manifold amplitudes of the SPDC expansion truncated at n_max pairs.

    The n-pair amplitude is (1-lambda) * sqrt(n+1) * (lambda/(1-lambda))^(n/2);
    the sqrt(n+1) factor is the bosonic norm of the n-fold pair-creation
    operator acting on vacuum.  Probabilities follow P(n) = (n+1) *
    lambda^n * (1-lambda)^(2-n); the squared norm converges (for
    lambda < 1/2) to its weak-pump limit 1 + O(lambda^2) as n_max grows.
    """
    if n_max < 2:
        raise DomainError(f"n_max must be >= 2, got {n_max}")
    lam = params.lambda_sq
    n = np.arange(n_max + 1)
    ratio = lam / (1.0 - lam) if lam < 1.0 else math.inf
    amps = (1.0 - lam) * np.sqrt(n + 1.0) * ratio ** (n / 2.0)
    return FockAmplitudes(lambda_sq=lam, amplitudes=amps)


def optimize_lambda(budget, extraction, pair_rate: float,
                    bounds: tuple[float, float] = (1e-4, 0.5),
                    coarse_points: int = 32, rel_tol: float = 1e-3):
    """Squeezing parameter maximizing the secret key rate at fixed channel.

    The attempt-window rate follows the configured ``pair_rate`` for every
    lambda (CW-window model), so the trade-off is purely between
    multi-pair errors at large lambda and the dark-count floor at small
    lambda.  ``extraction`` is any model with an ``efficiency(qber,
    block_length)`` method (analytic xi or a look-up table).

    Returns ``(lambda_opt, skr_opt)``.  A maximum on the bracket boundary
    is returned as-is (monotone regime); AllZeroError is raised when the
    key rate vanishes over the whole bracket.  Ties break toward smaller
    lambda.
    """
    from . import extraction as _ex
    from . import fidelity as _fid

    lo, hi = float(bounds[0]), float(bounds[1])
    if not (0.0 < lo < hi <= 0.5):
        raise DomainError(f"lambda bounds must satisfy 0 < lo < hi <= 0.5, got {bounds}")

    def skr(lam: float) -> float:
        params = SourceParams.from_pair_rate(pair_rate, lam, budget.p_dark)
        try:
            bd = _fid.breakdown(params, budget)
        except ZeroAcceptanceError:
            return 0.0
        rate = _ex.r_final(params.pulse_rate, bd)
        return rate * extraction.efficiency(bd.qber, block_length=None)

    lams = np.geomspace(lo, hi, coarse_points)
    vals = np.array([skr(l) for l in lams])
    if not np.any(vals > 0.0):
        raise AllZeroError(
            "secret key rate is zero over the whole lambda bracket "
            "(QBER above threshold or no channel)"
        )
    k = int(np.argmax(vals))
    if k == 0 or k == coarse_points - 1:
        return float(lams[k]), float(vals[k])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x_lo, x_hi = lams[k - 1], lams[k + 1]
    x1 = x_hi - invphi * (x_hi - x_lo)
    x2 = x_lo + invphi * (x_hi - x_lo)
    f1, f2 = skr(x1), skr(x2)
    while (x_hi - x_lo) > rel_tol * x_lo:
        if f1 >= f2:  # prefer smaller lambda on ties
            x_hi, x2, f2 = x2, x1, f1
            x1 = x_hi - invphi * (x_hi - x_lo)
            f1 = skr(x1)
        else:
            x_lo, x1, f1 = x1, x2, f2
            x2 = x_lo + invphi * (x_hi - x_lo)
            f2 = skr(x2)
    l_best, s_best = (x1, f1) if f1 >= f2 else (x2, f2)
    if s_best < vals[k]:
        l_best, s_best = lams[k], vals[k]
    return float(l_best), float(s_best)
