"""Independent reference computations used by the tests.

Each oracle works from the defining formula rather than the package code.
"""

import numpy as np
from scipy import integrate


def pairwise_drift(x, W, coeffs, theta, alpha_n=1.0):
    """-(theta/(N alpha_N)) sum_j W_ij D'(x_i - x_j), D'(u) = sum_k a_k k sin(ku)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    d = x[:, None] - x[None, :]
    Dp = np.zeros_like(d)
    for k, a in enumerate(coeffs, start=1):
        Dp += a * k * np.sin(k * d)
    return -theta / (n * alpha_n) * np.sum(np.asarray(W) * Dp, axis=1)


def bessel_quadrature(n, z, points=10**6):
    """I_n(z) = (1/pi) int_0^pi exp(z cos t) cos(n t) dt, midpoint rule.

    The integrand is smooth and even-periodic, so the midpoint rule converges
    geometrically; ``points`` = 10^6 is far beyond what is needed.
    """
    t = (np.arange(points) + 0.5) * (np.pi / points)
    return float(np.mean(np.exp(z * np.cos(t)) * np.cos(n * t)))


def bessel_ratio_quadrature(z, points=10**6):
    """I_1(z)/I_0(z) with a common factor exp(-|z|) to avoid overflow."""
    t = (np.arange(points) + 0.5) * (np.pi / points)
    e = np.exp(z * np.cos(t) - abs(z))
    return float(np.sum(e * np.cos(t)) / np.sum(e))


def sw_cell_average(p, h, n, i, j):
    """n^2 * integral of the small-world kernel over cell (i, j) by scipy.dblquad."""
    near = 1.0 - p + 2.0 * p * h
    far = 2.0 * p * h

    def W(y, x):
        d = abs(x - y)
        d = min(d, 1.0 - d)
        return near if d <= h else far

    # split the cell where the kernel jumps so dblquad sees smooth pieces
    x0, x1 = i / n, (i + 1) / n

    def ybreaks(x):
        pts = {j / n, (j + 1) / n}
        for c in (x - h, x + h, x - h + 1, x + h - 1, x - h - 1, x + h + 1):
            if j / n < c < (j + 1) / n:
                pts.add(c)
        return sorted(pts)

    def inner(x):
        b = ybreaks(x)
        return sum(integrate.quad(W, lo, hi, args=(x,))[0] for lo, hi in zip(b[:-1], b[1:]))

    xs = {x0, x1}
    for c in (j / n - h, (j + 1) / n - h, j / n + h, (j + 1) / n + h):
        for shift in (-1.0, 0.0, 1.0):
            if x0 < c + shift < x1:
                xs.add(c + shift)
    xs = sorted(xs)
    total = sum(integrate.quad(inner, lo, hi, limit=200)[0] for lo, hi in zip(xs[:-1], xs[1:]))
    return total * n * n


def pl_cell_average_mc(gamma, n, i, j, samples=10**4, seed=0):
    """Monte-Carlo estimate of n^2 * integral of (xy)^-gamma over cell (i, j)."""
    rng = np.random.default_rng(seed)
    x = (i + rng.random(samples)) / n
    y = (j + rng.random(samples)) / n
    vals = (x * y) ** (-gamma)
    return float(vals.mean()), float(vals.std() / np.sqrt(samples))


def growth_rate_fd(rhs_fn, state, mode, eps=1e-7):
    """d/dA_m of the mode-m component of rhs at ``state``, by central differences."""
    sp = state.copy()
    sm = state.copy()
    sp.A[:, mode - 1] += eps
    sm.A[:, mode - 1] -= eps
    dp = rhs_fn(sp)[0][:, mode - 1]
    dm = rhs_fn(sm)[0][:, mode - 1]
    return (dp - dm) / (2.0 * eps)


def diffusion_variance(increments, dt):
    """Per-unit-time variance of wrapped increments mapped to (-pi, pi]."""
    d = np.angle(np.exp(1j * increments))
    return float(np.var(d) / dt)
