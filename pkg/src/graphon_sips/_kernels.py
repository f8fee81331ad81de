"""Euler-Maruyama inner loops for the particle system.

The drift on particle i is

    -(theta / (N alpha_N)) sum_k a_k k [sin(k X_i) (W c_k)_i - cos(k X_i) (W s_k)_i]

with (c_k)_j = cos(k X_j), (s_k)_j = sin(k X_j), which is the pairwise sum
sum_j W_ij D'(X_i - X_j) rewritten with the sine addition formula. Each
step therefore costs one (N x N) @ (N x 2K) product instead of N^2 K
trigonometric calls.

Both the numba and the numpy variants take the same arguments:
``x`` (positions, updated in place), the weights (dense matrix or CSR
triple), ``ak`` = a_k * k, ``modes`` = k, ``scale`` = theta / (N alpha_N),
``amp`` = sigma sqrt(dt), ``dt`` and ``noise`` with one row per step.
"""

import math

import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit

TWO_PI = 2.0 * math.pi


# --- numba ----------------------------------------------------------------


@njit
def _trig_table(x, modes, cs):
    n = x.shape[0]
    K = modes.shape[0]
    for i in range(n):
        for k in range(K):
            kx = modes[k] * x[i]
            cs[i, k] = math.cos(kx)
            cs[i, K + k] = math.sin(kx)


@njit
def _combine(cs, M, ak, out):
    n = cs.shape[0]
    K = ak.shape[0]
    for i in range(n):
        f = 0.0
        for k in range(K):
            f += ak[k] * (cs[i, K + k] * M[i, k] - cs[i, k] * M[i, K + k])
        out[i] = f


@njit
def _csr_matmul(indptr, indices, data, B, out):
    n = out.shape[0]
    c = out.shape[1]
    for i in range(n):
        for q in range(c):
            out[i, q] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            w = data[p]
            for q in range(c):
                out[i, q] += w * B[j, q]


@njit
def _em_update(x, force, scale, amp, dt, noise_row):
    for i in range(x.shape[0]):
        xi = x[i] - scale * force[i] * dt + amp * noise_row[i]
        xi -= TWO_PI * math.floor(xi / TWO_PI)
        if xi >= TWO_PI:
            xi -= TWO_PI
        x[i] = xi


@njit
def advance_dense_numba(x, W, ak, modes, scale, amp, dt, noise):
    n = x.shape[0]
    K = modes.shape[0]
    cs = np.empty((n, 2 * K))
    force = np.empty(n)
    for s in range(noise.shape[0]):
        _trig_table(x, modes, cs)
        M = W @ cs
        _combine(cs, M, ak, force)
        _em_update(x, force, scale, amp, dt, noise[s])


@njit
def advance_sparse_numba(x, indptr, indices, data, ak, modes, scale, amp, dt, noise):
    n = x.shape[0]
    K = modes.shape[0]
    cs = np.empty((n, 2 * K))
    M = np.empty((n, 2 * K))
    force = np.empty(n)
    for s in range(noise.shape[0]):
        _trig_table(x, modes, cs)
        _csr_matmul(indptr, indices, data, cs, M)
        _combine(cs, M, ak, force)
        _em_update(x, force, scale, amp, dt, noise[s])


@njit
def force_dense_numba(x, W, ak, modes):
    n = x.shape[0]
    K = modes.shape[0]
    cs = np.empty((n, 2 * K))
    force = np.empty(n)
    _trig_table(x, modes, cs)
    M = W @ cs
    _combine(cs, M, ak, force)
    return force


@njit
def force_sparse_numba(x, indptr, indices, data, ak, modes):
    n = x.shape[0]
    K = modes.shape[0]
    cs = np.empty((n, 2 * K))
    M = np.empty((n, 2 * K))
    force = np.empty(n)
    _trig_table(x, modes, cs)
    _csr_matmul(indptr, indices, data, cs, M)
    _combine(cs, M, ak, force)
    return force


# --- numpy ----------------------------------------------------------------


def _force_numpy(x, W, ak, modes):
    kx = np.multiply.outer(x, modes)
    c = np.cos(kx)
    s = np.sin(kx)
    M = W @ np.hstack([c, s])
    K = len(modes)
    return (s * M[:, :K] - c * M[:, K:]) @ ak


def _wrap(x):
    x = x - TWO_PI * np.floor(x / TWO_PI)
    x[x >= TWO_PI] -= TWO_PI
    return x


def advance_dense_numpy(x, W, ak, modes, scale, amp, dt, noise):
    for s in range(noise.shape[0]):
        f = _force_numpy(x, W, ak, modes)
        x[:] = _wrap(x - scale * f * dt + amp * noise[s])


def advance_sparse_numpy(x, indptr, indices, data, ak, modes, scale, amp, dt, noise):
    n = x.shape[0]
    W = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    advance_dense_numpy(x, W, ak, modes, scale, amp, dt, noise)


def force_dense_numpy(x, W, ak, modes):
    return _force_numpy(x, W, ak, modes)


def force_sparse_numpy(x, indptr, indices, data, ak, modes):
    n = x.shape[0]
    W = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    return _force_numpy(x, W, ak, modes)


NUMBA_KERNELS = {
    "dense": advance_dense_numba,
    "sparse": advance_sparse_numba,
    "force_dense": force_dense_numba,
    "force_sparse": force_sparse_numba,
}
NUMPY_KERNELS = {
    "dense": advance_dense_numpy,
    "sparse": advance_sparse_numpy,
    "force_dense": force_dense_numpy,
    "force_sparse": force_sparse_numpy,
}


def kernels(backend=None):
    """Kernel table for ``backend`` ('numba', 'numpy' or None for the default)."""
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        return NUMBA_KERNELS
    if backend == "numpy":
        return NUMPY_KERNELS
    raise ValueError(f"unknown backend {backend!r}")
