"""Post-selected state quality: coefficient decomposition, fidelity, QBER,
and a brute-force Fock-space Monte-Carlo of the measurement network.

The state arriving at the two ground stations decomposes into a target
Bell component (weight A), a dephased two-pair remnant (weight B, fidelity
5/12) and a zero-fidelity garbage component (weight C, dark-count driven).
The analytic coefficients are cross-validated by simulating the physical
chain: manifold sampling, fictitious-beam-splitter loss per photon, the
50/50 splitter + half-wave plate + polarizing splitter network, dark
clicks and coincidence post-selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ZeroAcceptanceError
from .source import SourceParams

__all__ = [
    "ChannelBudget",
    "FidelityBreakdown",
    "FockSimResult",
    "DEPHASED_FIDELITY",
    "coefficients",
    "fidelity",
    "qber",
    "sifting_factor",
    "breakdown",
    "simulate_measurement_fock",
]

# Overlap of the dephased two-pair remnant with the target Bell state.
DEPHASED_FIDELITY = 5.0 / 12.0


@dataclass(frozen=True)
class ChannelBudget:
    """End-to-end transmission probabilities of the two downlink arms."""

    p_ta: float
    p_tb: float
    p_dark: float = 0.0

    def __post_init__(self):
        for name in ("p_ta", "p_tb", "p_dark"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"ChannelBudget.{name} must be in [0, 1], got {v}")
        if self.p_dark >= 1.0:
            raise DomainError("p_dark must be < 1")


@dataclass(frozen=True)
class FidelityBreakdown:
    """Weights of the post-selected state and the derived quality figures.

    ``accept_prob`` is A + B + C, the probability of a post-selected
    coincidence per attempt window.
    """

    coeff_a: float
    coeff_b: float
    coeff_c: float
    fidelity: float
    qber: float
    accept_prob: float


def coefficients(params: SourceParams, budget: ChannelBudget):
    """Unnormalized weights (A, B, C) of target, dephased and garbage parts.

    The dark-click probability is taken from ``budget``; every C term
    carries at least one factor of it.
    """
    lam = params.lambda_sq
    pa, pb, pd = budget.p_ta, budget.p_tb, budget.p_dark
    qa, qb = 1.0 - pa, 1.0 - pb

    a = lam * (1.0 - lam) * pa * pb
    b = 5.0 * lam**2 * pa * pb * qa * qb
    c = (
        lam * (1.0 - lam) * (pa * qb * pd + pb * qa * pd + qa * qb * pd**2)
        + lam**2 * (
            3.0 * pa * qa * qb**2 * pd
            + 3.0 * pb * qb * qa**2 * pd
            + 1.5 * qa**2 * qb**2 * pd**2
        )
        + 0.5 * (1.0 - lam) ** 2 * pd**2
    )
    return a, b, c


def fidelity(coeff_a: float, coeff_b: float, coeff_c: float) -> float:
    """Overall fidelity (A + (5/12) B) / (A + B + C)."""
    for name, v in (("A", coeff_a), ("B", coeff_b), ("C", coeff_c)):
        if v < 0 or not math.isfinite(v):
            raise DomainError(f"coefficient {name} must be finite and >= 0, got {v}")
    total = coeff_a + coeff_b + coeff_c
    if total == 0.0:
        raise ZeroAcceptanceError("A + B + C = 0: no post-selected coincidences")
    return (coeff_a + DEPHASED_FIDELITY * coeff_b) / total


def qber(fid: float) -> float:
    """Quantum bit error rate of the sifted key under the Werner-state map.

    Q = (1 - (3F + 1)/4) / 2 = 3 (1 - F) / 8, affine and monotone
    decreasing in F; maps [0, 1] onto [0.375, 0].
    """
    if not (0.0 <= fid <= 1.0):
        raise DomainError(f"fidelity must be in [0, 1], got {fid}")
    return 3.0 * (1.0 - fid) / 8.0


def sifting_factor() -> float:
    """Fraction of coincidences retained by basis reconciliation."""
    return 0.5


def breakdown(params: SourceParams, budget: ChannelBudget) -> FidelityBreakdown:
    """Compose coefficients, fidelity and QBER into one record."""
    a, b, c = coefficients(params, budget)
    f = fidelity(a, b, c)
    return FidelityBreakdown(
        coeff_a=a, coeff_b=b, coeff_c=c,
        fidelity=f, qber=qber(f), accept_prob=a + b + c,
    )


@dataclass(frozen=True)
class FockSimResult:
    """Empirical statistics of the measurement-network Monte-Carlo.

    ``fidelity`` is the mean conditional fidelity of the post-selected
    state over accepted trials; ``qber`` applies the Werner-state map to
    it (the QBER is defined through the fidelity in this model).
    Standard errors are binomial/sample estimates.
    """

    fidelity: float
    fidelity_se: float
    qber: float
    qber_se: float
    accept_prob: float
    accept_se: float
    n_accepted: int
    n_trials: int
    same_basis_fraction: float


# Detector index = 2*basis + outcome; basis 0 = Z (H/V), 1 = X (D/A).
_POPCOUNT = np.array([bin(i).count("1") for i in range(16)], dtype=np.int64)
_SINGLE = np.full(16, -1, dtype=np.int64)
for _d in range(4):
    _SINGLE[1 << _d] = _d


def simulate_measurement_fock(params: SourceParams, budget: ChannelBudget,
                              n_cutoff: int = 2, trials: int = 100_000,
                              seed: int = 0) -> FockSimResult:
    """Monte-Carlo of the full detection chain, reproducible per seed.

    Per trial: sample the pair manifold (vacuum / one pair / two pairs,
    the truncation order of the source expansion), pass each photon
    through a fictitious beam splitter of its arm's transmission, route
    survivors through the 50/50 basis splitter and polarizing splitter,
    add station-level dark clicks on a uniformly random detector, then
    post-select trials with exactly one fired detector per station in the
    same basis (double clicks are discarded as garbage, which keeps the
    estimate a lower bound).
    """
    if n_cutoff < 2:
        raise DomainError(f"n_cutoff must be >= 2, got {n_cutoff}")
    if trials < 10_000:
        raise DomainError(f"trials must be >= 10^4, got {trials}")
    lam = params.lambda_sq
    pa, pb, pd = budget.p_ta, budget.p_tb, budget.p_dark
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    # Manifold probabilities at the source expansion's own normalization;
    # two-pair terms are equiprobable thirds.
    p1, p2 = 2.0 * lam * (1.0 - lam), 3.0 * lam**2
    p0 = (1.0 - lam) ** 2
    probs = np.array([p0, p1, p2]) / (p0 + p1 + p2)
    manifold = rng.choice(3, size=trials, p=probs)
    m1 = manifold == 1
    m2 = manifold == 2

    # Two-pair polarization component: A carries (H,H)/(H,V)/(V,V) and B
    # the anticorrelated (V,V)/(H,V)/(H,H).
    comp = rng.integers(0, 3, size=trials)
    pol_a1 = np.where(comp == 2, 1, 0)  # first A photon: V only for comp 2
    pol_a2 = np.where(comp == 0, 0, 1)  # second A photon: H only for comp 0
    pol_b1 = 1 - pol_a1
    pol_b2 = 1 - pol_a2

    u = rng.random
    surv_a1, surv_a2 = u(trials) < pa, u(trials) < pa
    surv_b1, surv_b2 = u(trials) < pb, u(trials) < pb
    bas_a1, bas_a2 = rng.integers(0, 2, trials), rng.integers(0, 2, trials)
    bas_b1, bas_b2 = rng.integers(0, 2, trials), rng.integers(0, 2, trials)

    def _outcome(basis, pol, flip):
        # Z basis projects the polarization; X basis is uniform for H/V.
        return np.where(basis == 0, pol, flip)

    flip = lambda: rng.integers(0, 2, trials)

    # Single-pair manifold: Bell state, anticorrelated in Z, correlated in X.
    out_a1_bell = flip()
    same_basis_bell = bas_a1 == bas_b1
    out_b1_bell = np.where(
        same_basis_bell,
        np.where(bas_a1 == 0, 1 - out_a1_bell, out_a1_bell),
        flip(),
    )
    # Marginals are maximally mixed when only one photon survives.
    out_a1 = np.where(m1, out_a1_bell, _outcome(bas_a1, pol_a1, flip()))
    out_b1 = np.where(m1, out_b1_bell, _outcome(bas_b1, pol_b1, flip()))
    out_a2 = _outcome(bas_a2, pol_a2, flip())
    out_b2 = _outcome(bas_b2, pol_b2, flip())

    def station_bits(first_on, second_on, b1, o1, b2, o2):
        det1 = 2 * b1 + o1
        det2 = 2 * b2 + o2
        bits = np.where(first_on, 1 << det1, 0) | np.where(second_on, 1 << det2, 0)
        dark = u(trials) < pd
        dark_det = rng.integers(0, 4, trials)
        return bits | np.where(dark, 1 << dark_det, 0)

    a_first = (m1 | m2) & surv_a1
    a_second = m2 & surv_a2
    b_first = (m1 | m2) & surv_b1
    b_second = m2 & surv_b2
    bits_a = station_bits(a_first, a_second, bas_a1, out_a1, bas_a2, out_a2)
    bits_b = station_bits(b_first, b_second, bas_b1, out_b1, bas_b2, out_b2)

    n_a, n_b = _POPCOUNT[bits_a], _POPCOUNT[bits_b]
    det_a, det_b = _SINGLE[bits_a], _SINGLE[bits_b]
    coincide = (n_a == 1) & (n_b == 1)
    same_basis = (det_a >> 1) == (det_b >> 1)
    accept = coincide & same_basis

    # Conditional fidelity of the post-selected state given the photon
    # content: Bell pair intact -> 1; one survivor per side from the
    # two-pair manifold -> 1/2 if polarizations anticorrelate, else 0;
    # anything else (dark-assisted or wrong photon number) -> 0.
    f_val = np.zeros(trials)
    f_val[m1 & surv_a1 & surv_b1] = 1.0
    one_each = m2 & ((surv_a1.astype(int) + surv_a2) == 1) \
                  & ((surv_b1.astype(int) + surv_b2) == 1)
    pol_a = np.where(surv_a1, pol_a1, pol_a2)
    pol_b = np.where(surv_b1, pol_b1, pol_b2)
    f_val[one_each & (pol_a != pol_b)] = 0.5

    acc_hat = float(accept.mean())
    acc_se = max(math.sqrt(acc_hat * (1.0 - acc_hat) / trials), 1.0 / trials)
    n_acc = int(accept.sum())
    if n_acc > 0:
        f_acc = f_val[accept]
        f_hat = float(f_acc.mean())
        spread = float(f_acc.std(ddof=1)) if n_acc > 1 else 0.0
        f_se = max(spread / math.sqrt(n_acc), 0.5 / n_acc)
        q_hat, q_se = qber(f_hat), 3.0 / 8.0 * f_se
    else:
        f_hat = f_se = q_hat = q_se = float("nan")
    n_coin = int(coincide.sum())
    sb_frac = float(same_basis[coincide].mean()) if n_coin else float("nan")
    return FockSimResult(
        fidelity=f_hat, fidelity_se=f_se, qber=q_hat, qber_se=q_se,
        accept_prob=acc_hat, accept_se=acc_se,
        n_accepted=n_acc, n_trials=trials, same_basis_fraction=sb_frac,
    )
