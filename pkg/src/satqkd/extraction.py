"""Secret key extraction: binary-entropy key rate, Cascade reconciliation,
and the key-extraction-efficiency look-up table.

The secret key rate is SKR = R_final * max(0, 1 - (1 + xi) * H(QBER)) with
H the binary entropy and xi the classical-protocol inefficiency (static
xi = 1.22 approximates large blocks).  The look-up table replaces the
analytic factor with a Monte-Carlo measured efficiency: random bit strings
of given length and error rate are pushed through QBER estimation,
Cascade error correction and privacy amplification, and the surviving
fraction is tabulated over (block length, QBER).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from ._cascade import cascade_core
from .errors import DomainError
from .fidelity import FidelityBreakdown, sifting_factor

__all__ = [
    "binary_entropy",
    "qber_threshold",
    "KeyRateResult",
    "skr_analytic",
    "AnalyticXi",
    "cascade_reconcile",
    "LutTable",
    "generate_lut",
    "lookup",
    "r_final",
    "DEFAULT_BLOCK_LENGTHS",
    "DEFAULT_QBER_GRID",
    "DEFAULT_XI",
]

DEFAULT_XI = 1.22
DEFAULT_BLOCK_LENGTHS = (100, 1_000, 10_000, 100_000, 1_000_000)
DEFAULT_QBER_GRID = (0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05,
                     0.06, 0.07, 0.08, 0.09, 0.10)
_LUT_FORMAT = "satqkd-lut-v1"


def binary_entropy(q):
    """Shannon binary entropy H(q) in bits; exact 0 and 1 at the boundaries."""
    arr = np.asarray(q, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"binary_entropy argument must be in [0, 1], got {q}")
    h = -(xlogy(arr, arr) + xlogy(1.0 - arr, 1.0 - arr)) / math.log(2.0)
    return float(h) if np.isscalar(q) or arr.ndim == 0 else h


def qber_threshold(xi: float = DEFAULT_XI) -> float:
    """QBER where (1 + xi) * H(q) = 1, above which the key rate vanishes."""
    from scipy.optimize import brentq

    return float(brentq(lambda q: (1.0 + xi) * binary_entropy(q) - 1.0,
                        1e-12, 0.5 - 1e-12, xtol=1e-12))


@dataclass(frozen=True)
class KeyRateResult:
    """Secret key rate with the inputs and extraction mode that produced it."""

    r_final: float
    qber: float
    skr: float
    mode: str


def skr_analytic(r_final_rate: float, qber: float, xi: float = DEFAULT_XI) -> KeyRateResult:
    """Secret key rate with the static classical-inefficiency factor xi."""
    if not (0.0 <= qber <= 0.5):
        raise DomainError(f"qber must be in [0, 0.5], got {qber}")
    if xi < 0:
        raise DomainError(f"xi must be >= 0, got {xi}")
    if r_final_rate < 0:
        raise DomainError(f"r_final must be >= 0, got {r_final_rate}")
    skr = r_final_rate * max(0.0, 1.0 - (1.0 + xi) * binary_entropy(qber))
    return KeyRateResult(r_final=r_final_rate, qber=qber, skr=skr, mode="analytic-xi")


@dataclass(frozen=True)
class AnalyticXi:
    """Extraction model with a static classical-protocol inefficiency."""

    xi: float = DEFAULT_XI
    mode: str = "analytic-xi"

    def efficiency(self, qber: float, block_length=None) -> float:
        return max(0.0, 1.0 - (1.0 + self.xi) * binary_entropy(qber))


def cascade_reconcile(alice_bits, bob_bits, qber_estimate: float, seed: int):
    """Cascade error correction of Bob's string toward Alice's.

    Four passes; first-pass blocks of ceil(0.73 / qber_estimate) bits,
    doubling each pass, with seeded random shuffles between passes and
    binary-search backtracking into earlier passes.  Returns the corrected
    string and the exact number of parity bits disclosed.  Residual errors
    are possible; callers compare against the reference string.
    """
    alice = np.ascontiguousarray(alice_bits, dtype=np.uint8)
    bob = np.array(bob_bits, dtype=np.uint8, copy=True)
    if alice.shape != bob.shape or alice.ndim != 1:
        raise DomainError("alice and bob must be equal-length 1-D bit arrays")
    if alice.size < 2:
        raise DomainError("strings must hold at least 2 bits")
    if np.any(alice > 1) or np.any(bob > 1):
        raise DomainError("bit arrays must contain only 0/1")
    if not (0.0 < qber_estimate < 0.5):
        raise DomainError(f"qber_estimate must be in (0, 0.5), got {qber_estimate}")

    n = alice.size
    # Blocks never exceed half the string so late passes still split
    # error pairs that cancelled in earlier parities.
    k_cap = max(2, n // 2)
    k1 = max(2, min(int(math.ceil(0.73 / qber_estimate)), k_cap))
    block_sizes = np.array([min(k1 * 2**i, k_cap) for i in range(4)], dtype=np.int64)
    rng = np.random.default_rng(seed)
    perms = np.empty((4, n), dtype=np.int64)
    perms[0] = np.arange(n)
    for p in range(1, 4):
        perms[p] = rng.permutation(n)
    leaked = int(cascade_core(alice, bob, perms, block_sizes))
    return bob, leaked


@dataclass(frozen=True)
class LutTable:
    """Key-extraction efficiency gridded over (block length, QBER)."""

    block_lengths: np.ndarray
    qber_grid: np.ndarray
    eta: np.ndarray
    trials_per_cell: int
    meta: dict = field(default_factory=dict)
    mode: str = "lut"

    def __post_init__(self):
        bl = np.asarray(self.block_lengths, dtype=float)
        qg = np.asarray(self.qber_grid, dtype=float)
        et = np.asarray(self.eta, dtype=float)
        if bl.ndim != 1 or qg.ndim != 1 or et.shape != (bl.size, qg.size):
            raise DomainError("eta must be shaped (len(block_lengths), len(qber_grid))")
        if np.any(np.diff(bl) <= 0) or np.any(np.diff(qg) <= 0):
            raise DomainError("grids must be strictly increasing")
        if np.any(et < 0) or np.any(et > 1):
            raise DomainError("eta values must lie in [0, 1]")
        object.__setattr__(self, "block_lengths", bl)
        object.__setattr__(self, "qber_grid", qg)
        object.__setattr__(self, "eta", et)
        for a in (self.block_lengths, self.qber_grid, self.eta):
            a.setflags(write=False)

    def lookup(self, block_length: float, qber: float):
        """Bilinear interpolation in (log10 block length, QBER).

        Queries outside the grid hull are clamped to it; the second return
        value flags when clamping occurred.
        """
        if block_length <= 0 or not (0.0 <= qber <= 0.5):
            raise DomainError("query outside the physical domain")
        lx = math.log10(block_length)
        xs = np.log10(self.block_lengths)
        ys = self.qber_grid
        clamped = not (xs[0] <= lx <= xs[-1] and ys[0] <= qber <= ys[-1])
        lx = min(max(lx, xs[0]), xs[-1])
        qy = min(max(qber, ys[0]), ys[-1])
        i = min(int(np.searchsorted(xs, lx, side="right")) - 1, xs.size - 2)
        j = min(int(np.searchsorted(ys, qy, side="right")) - 1, ys.size - 2)
        i, j = max(i, 0), max(j, 0)
        tx = (lx - xs[i]) / (xs[i + 1] - xs[i])
        ty = (qy - ys[j]) / (ys[j + 1] - ys[j])
        e = self.eta
        val = ((1 - tx) * (1 - ty) * e[i, j] + tx * (1 - ty) * e[i + 1, j]
               + (1 - tx) * ty * e[i, j + 1] + tx * ty * e[i + 1, j + 1])
        return float(val), clamped

    def efficiency(self, qber: float, block_length=None) -> float:
        if block_length is None:
            block_length = float(self.block_lengths[-1])
        return self.lookup(block_length, qber)[0]

    # -- serialization ----------------------------------------------------

    def to_csv(self, path):
        """Header row holds the QBER grid; first column the block lengths."""
        with open(path, "w", newline="") as fh:
            fh.write(f"# {_LUT_FORMAT}\n")
            fh.write(f"# trials_per_cell: {self.trials_per_cell}\n")
            for k in sorted(self.meta):
                fh.write(f"# {k}: {self.meta[k]!r}\n")
            w = csv.writer(fh)
            w.writerow(["block_length"] + [repr(float(q)) for q in self.qber_grid])
            for bl, row in zip(self.block_lengths, self.eta):
                w.writerow([repr(float(bl))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "LutTable":
        meta, rows, header = {}, [], None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if ":" in body:
                        k, v = body.split(":", 1)
                        try:
                            meta[k.strip()] = eval(v.strip(), {"__builtins__": {}})
                        except Exception:
                            meta[k.strip()] = v.strip()
                    continue
                cells = next(csv.reader([line]))
                if header is None:
                    header = [float(c) for c in cells[1:]]
                else:
                    rows.append([float(c) for c in cells])
        if header is None or not rows:
            raise DomainError(f"no look-up table found in {path}")
        arr = np.array(rows)
        trials = int(meta.pop("trials_per_cell", 0))
        return cls(block_lengths=arr[:, 0], qber_grid=np.array(header),
                   eta=arr[:, 1:], trials_per_cell=trials, meta=meta)

    def to_json(self, path):
        payload = {
            "format": _LUT_FORMAT,
            "block_lengths": self.block_lengths.tolist(),
            "qber_grid": self.qber_grid.tolist(),
            "eta": self.eta.tolist(),
            "trials_per_cell": self.trials_per_cell,
            "meta": self.meta,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "LutTable":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format") != _LUT_FORMAT:
            raise DomainError(f"unrecognized look-up table format in {path}")
        return cls(
            block_lengths=np.array(payload["block_lengths"]),
            qber_grid=np.array(payload["qber_grid"]),
            eta=np.array(payload["eta"]),
            trials_per_cell=int(payload["trials_per_cell"]),
            meta=dict(payload.get("meta", {})),
        )


def _simulate_cell(length: int, q: float, trials: int, seed: int, i_l: int, i_q: int,
                   sacrifice_fraction: float, security_bits: int) -> float:
    vals = np.empty(trials)
    for t in range(trials):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(i_l, i_q, t))
        rng = np.random.default_rng(ss)
        alice = rng.integers(0, 2, length, dtype=np.uint8)
        bob = alice ^ (rng.random(length) < q).astype(np.uint8)

        n_sac = max(1, int(round(sacrifice_fraction * length)))
        sac = rng.choice(length, size=n_sac, replace=False)
        n_err_seen = int(np.count_nonzero(alice[sac] != bob[sac]))
        q_est = min(max(n_err_seen / n_sac, 0.5 / n_sac), 0.499)
        # Conservative rate for block sizing: a point estimate of zero must
        # not blow the blocks up past what the true rate can sustain.
        q_sizing = min(max(q_est, (n_err_seen + 1.0) / n_sac), 0.499)
        keep = np.ones(length, dtype=bool)
        keep[sac] = False
        a_keep, b_keep = alice[keep], bob[keep]

        corrected, leaked = cascade_reconcile(
            a_keep, b_keep, q_sizing, seed=int(rng.integers(2**63)))
        if np.any(corrected != a_keep):
            vals[t] = 0.0  # verification failure aborts the block
            continue
        n_rem = length - n_sac
        pa_cost = math.ceil(n_rem * binary_entropy(q_est))
        vals[t] = (n_rem - leaked - pa_cost - security_bits) / length
    return max(0.0, float(vals.mean()))


def generate_lut(block_lengths=DEFAULT_BLOCK_LENGTHS, qber_grid=DEFAULT_QBER_GRID,
                 trials: int = 50, seed: int = 0, sacrifice_fraction: float = 0.1,
                 security_bits: int = 64) -> LutTable:
    """Measure the key-extraction efficiency over a (length, QBER) grid.

    Each cell averages ``trials`` runs of: i.i.d. errors at the cell's
    rate, QBER estimation on a sacrificed fraction of the bits, Cascade
    reconciliation, and privacy amplification charging the entropy of the
    estimated QBER plus a fixed finite-size security margin.  Runs whose
    verification fails contribute zero.
    """
    if trials < 20:
        raise DomainError(f"trials must be >= 20, got {trials}")
    if not (0.0 < sacrifice_fraction < 1.0):
        raise DomainError("sacrifice_fraction must be in (0, 1)")
    if security_bits < 0:
        raise DomainError("security_bits must be >= 0")
    bls = sorted(int(b) for b in block_lengths)
    qs = sorted(float(q) for q in qber_grid)
    if any(b < 10 for b in bls):
        raise DomainError("block lengths below 10 bits are not meaningful")
    if any(not 0.0 < q < 0.5 for q in qs):
        raise DomainError("qber grid values must be in (0, 0.5)")

    eta = np.zeros((len(bls), len(qs)))
    for i_l, length in enumerate(bls):
        for i_q, q in enumerate(qs):
            eta[i_l, i_q] = _simulate_cell(length, q, trials, seed, i_l, i_q,
                                           sacrifice_fraction, security_bits)
    return LutTable(
        block_lengths=np.array(bls, dtype=float), qber_grid=np.array(qs),
        eta=eta, trials_per_cell=trials,
        meta={"seed": seed, "sacrifice_fraction": sacrifice_fraction,
              "security_bits": security_bits, "generator_version": 1},
    )


def lookup(lut: LutTable, block_length: float, qber: float):
    """Module-level alias of LutTable.lookup."""
    return lut.lookup(block_length, qber)


def r_final(attempt_rate: float, bd: FidelityBreakdown) -> float:
    """Sifted coincidence rate: attempts * accept probability * sifting.

    This composition rule (attempt rate x post-selected coincidence
    probability x 1/2 basis retention) is the module's definition of the
    raw key rate entering the secret-key-rate formula.
    """
    if attempt_rate < 0:
        raise DomainError(f"attempt_rate must be >= 0, got {attempt_rate}")
    return attempt_rate * bd.accept_prob * sifting_factor()
