"""Matern-5/2 elementwise kernels, JIT-compiled when numba is available.

The fused single-pass versions dominate the fit/selection inner loops; the
numpy fallbacks compute identical values.
"""

from __future__ import annotations

import os

import numpy as np

# Preempt numba's TBB probe (the sandbox TBB is too old and only warns).
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

SQRT5 = np.sqrt(5.0)


def _matern52_numpy(sqdist: np.ndarray, signal_variance: float) -> np.ndarray:
    u = SQRT5 * np.sqrt(np.maximum(sqdist, 0.0))
    return signal_variance * (1.0 + u + u * u / 3.0) * np.exp(-u)


def _matern52_grad_numpy(sqdist, signal_variance):
    u = SQRT5 * np.sqrt(np.maximum(sqdist, 0.0))
    e = np.exp(-u)
    k = signal_variance * (1.0 + u + u * u / 3.0) * e
    g = (5.0 / 3.0) * signal_variance * (1.0 + u) * e
    return k, g


def _matern52_batch_numpy(sqdist, signal_variances):
    return _matern52_numpy(sqdist, signal_variances[:, None, None])


def _matern52_batch_grad_numpy(sqdist, signal_variances):
    return _matern52_grad_numpy(sqdist, signal_variances[:, None, None])


try:  # pragma: no cover - exercised whenever numba is installed
    import numba
    from numba import njit, prange

    @njit(parallel=True, cache=True, nogil=True)
    def _matern52_numba(sqdist, signal_variance):
        n, m = sqdist.shape
        out = np.empty((n, m))
        for i in prange(n):
            for j in range(m):
                s = sqdist[i, j]
                u = np.sqrt(5.0 * s) if s > 0.0 else 0.0
                out[i, j] = signal_variance * (1.0 + u + u * u / 3.0) * np.exp(-u)
        return out

    @njit(parallel=True, cache=True, nogil=True)
    def _matern52_grad_numba(sqdist, signal_variance):
        n, m = sqdist.shape
        k = np.empty((n, m))
        g = np.empty((n, m))
        for i in prange(n):
            for j in range(m):
                s = sqdist[i, j]
                u = np.sqrt(5.0 * s) if s > 0.0 else 0.0
                e = np.exp(-u)
                k[i, j] = signal_variance * (1.0 + u + u * u / 3.0) * e
                g[i, j] = (5.0 / 3.0) * signal_variance * (1.0 + u) * e
        return k, g

    @njit(parallel=True, cache=True, nogil=True)
    def _matern52_batch_numba(sqdist, signal_variances):
        b, n, m = sqdist.shape
        out = np.empty((b, n, m))
        for row in prange(b * n):
            k = row // n
            i = row % n
            sf2 = signal_variances[k]
            for j in range(m):
                s = sqdist[k, i, j]
                u = np.sqrt(5.0 * s) if s > 0.0 else 0.0
                out[k, i, j] = sf2 * (1.0 + u + u * u / 3.0) * np.exp(-u)
        return out

    @njit(parallel=True, cache=True, nogil=True)
    def _matern52_batch_grad_numba(sqdist, signal_variances):
        b, n, m = sqdist.shape
        kk = np.empty((b, n, m))
        gg = np.empty((b, n, m))
        for row in prange(b * n):
            k = row // n
            i = row % n
            sf2 = signal_variances[k]
            for j in range(m):
                s = sqdist[k, i, j]
                u = np.sqrt(5.0 * s) if s > 0.0 else 0.0
                e = np.exp(-u)
                kk[k, i, j] = sf2 * (1.0 + u + u * u / 3.0) * e
                gg[k, i, j] = (5.0 / 3.0) * sf2 * (1.0 + u) * e
        return kk, gg

    def matern52(sqdist, signal_variance):
        return _matern52_numba(np.ascontiguousarray(sqdist), float(signal_variance))

    def matern52_with_grad(sqdist, signal_variance):
        return _matern52_grad_numba(np.ascontiguousarray(sqdist), float(signal_variance))

    def matern52_batch(sqdist, signal_variances):
        return _matern52_batch_numba(
            np.ascontiguousarray(sqdist), np.ascontiguousarray(signal_variances)
        )

    def matern52_batch_with_grad(sqdist, signal_variances):
        return _matern52_batch_grad_numba(
            np.ascontiguousarray(sqdist), np.ascontiguousarray(signal_variances)
        )

except ImportError:  # pragma: no cover
    matern52 = _matern52_numpy
    matern52_with_grad = _matern52_grad_numpy
    matern52_batch = _matern52_batch_numpy
    matern52_batch_with_grad = _matern52_batch_grad_numpy


def scaled_sqdist(A: np.ndarray, B: np.ndarray | None, lengthscales: np.ndarray) -> np.ndarray:
    """Pairwise squared distances of rows after dividing coordinates by the
    lengthscales.  ``B=None`` means ``B=A`` (symmetric case)."""
    As = A / lengthscales
    a2 = np.einsum("ij,ij->i", As, As)
    if B is None:
        sq = a2[:, None] + a2[None, :] - 2.0 * (As @ As.T)
    else:
        Bs = B / lengthscales
        b2 = np.einsum("ij,ij->i", Bs, Bs)
        sq = a2[:, None] + b2[None, :] - 2.0 * (As @ Bs.T)
    return np.maximum(sq, 0.0, out=sq)


def scaled_sqdist_batch(X: np.ndarray, lengthscale_batch: np.ndarray) -> np.ndarray:
    """Stack of pairwise squared-distance matrices of ``X`` under several
    lengthscale vectors at once: ``(m, d) -> (m, n, n)``."""
    Xs = X[None, :, :] / lengthscale_batch[:, None, :]
    sq = np.einsum("kij,kij->ki", Xs, Xs)
    out = sq[:, :, None] + sq[:, None, :] - 2.0 * np.matmul(Xs, Xs.transpose(0, 2, 1))
    return np.maximum(out, 0.0, out=out)
