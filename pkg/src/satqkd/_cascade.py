"""Numba kernel for the Cascade reconciliation inner loop."""

import numpy as np
from numba import njit


@njit(cache=True)
def _range_parity(d, perm, lo, hi):
    p = 0
    for i in range(lo, hi):
        p ^= d[perm[i]]
    return p


@njit(cache=True)
def cascade_core(alice, bob, perms, block_sizes):
    """Run all Cascade passes in place on ``bob``; return disclosed bits.

    ``perms[p]`` maps pass-p positions to bit indices; pass-p blocks are
    consecutive runs of ``block_sizes[p]`` positions.  Every revealed
    parity (one per top-level block, one per binary-search halving) counts
    toward the leakage.  A corrected bit toggles the tracked parity of its
    block in every initialized pass; blocks that turn odd are re-searched
    (the cascading step).
    """
    n = alice.size
    n_passes = block_sizes.size
    d = np.empty(n, np.uint8)
    for i in range(n):
        d[i] = alice[i] ^ bob[i]

    inv = np.empty((n_passes, n), np.int64)
    for p in range(n_passes):
        for i in range(n):
            inv[p, perms[p, i]] = i

    nblocks = np.empty(n_passes, np.int64)
    maxb = 0
    for p in range(n_passes):
        nblocks[p] = (n + block_sizes[p] - 1) // block_sizes[p]
        maxb = max(maxb, nblocks[p])
    par = np.zeros((n_passes, maxb), np.uint8)

    cap = 8 * n + 64
    stack = np.empty((cap, 2), np.int64)
    leaked = 0

    for p in range(n_passes):
        k = block_sizes[p]
        sp = 0
        for j in range(nblocks[p]):
            lo = j * k
            hi = min(lo + k, n)
            par[p, j] = _range_parity(d, perms[p], lo, hi)
            leaked += 1
            if par[p, j] == 1:
                stack[sp, 0] = p
                stack[sp, 1] = j
                sp += 1
        while sp > 0:
            sp -= 1
            q = stack[sp, 0]
            j = stack[sp, 1]
            if par[q, j] == 0:
                continue
            kq = block_sizes[q]
            lo = j * kq
            hi = min(lo + kq, n)
            while hi - lo > 1:
                mid = (lo + hi) // 2
                leaked += 1
                if _range_parity(d, perms[q], lo, mid) == 1:
                    hi = mid
                else:
                    lo = mid
            bit = perms[q, lo]
            bob[bit] ^= 1
            d[bit] ^= 1
            for r in range(p + 1):
                jr = inv[r, bit] // block_sizes[r]
                par[r, jr] ^= 1
                if par[r, jr] == 1:
                    stack[sp, 0] = r
                    stack[sp, 1] = jr
                    sp += 1
    return leaked
