"""Compiled inner loops. All take the CSR adjacency of an ``IsingModel``.

Randomness comes from a ``numpy.random.Generator`` passed in by the caller, so
results are reproducible and independent of thread placement.
"""

import numpy as np
from numba import njit

# improving-flip threshold; keeps descent from chasing rounding noise
DESCENT_EPS = 1e-12


@njit(cache=True, nogil=True)
def _fields(indptr, nbrs, wts, h, z, out):
    n = h.shape[0]
    for k in range(n):
        acc = h[k]
        for p in range(indptr[k], indptr[k + 1]):
            acc += wts[p] * z[nbrs[p]]
        out[k] = acc


# Row loads/stores live in separate non-inlined functions: writing the int8
# output inside the hot loop blocks LLVM from keeping the fields in registers
# (measured ~15x slowdown).
@njit(cache=True, nogil=True, inline="never")
def _store(out, t, z):
    for k in range(z.shape[0]):
        out[t, k] = 1 if z[k] > 0 else -1


@njit(cache=True, nogil=True, inline="never")
def _load(Z, t, z):
    for k in range(z.shape[0]):
        z[k] = Z[t, k]


@njit(cache=True, nogil=True)
def anneal(indptr, nbrs, wts, h, betas, trials, rho, rng):
    """Run ``trials`` Metropolis anneals; returns final states, one per row.

    Each trial restarts from a uniform random state, except that with
    probability ``rho`` it continues from the previous trial's final state.
    Sites are visited in index order once per sweep; ``betas`` holds one
    inverse temperature per sweep.
    """
    n = h.shape[0]
    out = np.empty((trials, n), dtype=np.int8)
    z = np.empty(n, dtype=np.float64)
    f = np.empty(n, dtype=np.float64)
    for t in range(trials):
        fresh = True
        if t > 0 and rho > 0.0:
            fresh = rng.random() >= rho
        if fresh:
            for k in range(n):
                z[k] = 1.0 if rng.random() < 0.5 else -1.0
        _fields(indptr, nbrs, wts, h, z, f)
        for s in range(betas.shape[0]):
            beta = betas[s]
            for i in range(n):
                de = -2.0 * z[i] * f[i]
                if de > 0.0 and rng.random() >= np.exp(-beta * de):
                    continue
                z[i] = -z[i]
                step = 2.0 * z[i]
                for p in range(indptr[i], indptr[i + 1]):
                    f[nbrs[p]] += wts[p] * step
        _store(out, t, z)
    return out


@njit(cache=True, nogil=True)
def descend(indptr, nbrs, wts, h, Z):
    """Steepest single-flip descent on every row of ``Z`` (modified in place).

    Each step flips the spin with the most negative energy change, lowest
    index on ties, until no flip lowers the energy.
    """
    rows, n = Z.shape
    z = np.empty(n, dtype=np.float64)
    f = np.empty(n, dtype=np.float64)
    flips = 0
    for r in range(rows):
        _load(Z, r, z)
        _fields(indptr, nbrs, wts, h, z, f)
        while True:
            best = -DESCENT_EPS
            arg = -1
            for i in range(n):
                de = -2.0 * z[i] * f[i]
                if de < best:
                    best = de
                    arg = i
            if arg < 0:
                break
            z[arg] = -z[arg]
            step = 2.0 * z[arg]
            for p in range(indptr[arg], indptr[arg + 1]):
                f[nbrs[p]] += wts[p] * step
            flips += 1
        _store(Z, r, z)
    return flips


@njit(cache=True, nogil=True)
def gray_minimum(indptr, nbrs, wts, h, offset):
    """Exhaustive minimum over all 2^n states by Gray-code single flips.

    Returns ``(energy, gray_code)``; bit ``i`` of the code set means spin ``i``
    is -1, all others +1.
    """
    n = h.shape[0]
    z = np.ones(n, dtype=np.float64)
    f = np.empty(n, dtype=np.float64)
    _fields(indptr, nbrs, wts, h, z, f)
    e = offset
    for k in range(n):
        e += h[k]
        for p in range(indptr[k], indptr[k + 1]):
            if nbrs[p] > k:
                e += wts[p]
    best = e
    best_code = np.int64(0)
    total = np.int64(1) << n
    for c in range(1, total):
        i = 0
        while not (c >> i) & 1:
            i += 1
        e += -2.0 * z[i] * f[i]
        z[i] = -z[i]
        step = 2.0 * z[i]
        for p in range(indptr[i], indptr[i + 1]):
            f[nbrs[p]] += wts[p] * step
        if e < best:
            best = e
            best_code = c ^ (c >> 1)
    return best, best_code


@njit(cache=True, nogil=True)
def batch_energy(Z, h, ii, jj, ww, offset):
    """Energy of each row of ``Z``, summed in a fixed order."""
    rows, n = Z.shape
    out = np.empty(rows, dtype=np.float64)
    for r in range(rows):
        e = 0.0
        for k in range(n):
            e += h[k] * Z[r, k]
        for p in range(ii.shape[0]):
            e += ww[p] * Z[r, ii[p]] * Z[r, jj[p]]
        out[r] = offset + e
    return out
