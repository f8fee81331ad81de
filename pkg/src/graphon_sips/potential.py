"""Multichromatic interaction potentials D(u) = -sum_k a_k cos(k u)."""

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(u):
    """Reduce angles to [0, 2pi) by subtracting whole turns."""
    u = np.asarray(u, dtype=float)
    w = u - TWO_PI * np.floor(u / TWO_PI)
    # floor() can leave exactly 2pi for tiny negative inputs
    return np.where(w >= TWO_PI, w - TWO_PI, w)


@dataclass(frozen=True)
class MultichromaticPotential:
    """Trigonometric interaction potential with amplitudes ``a_1..a_n``.

    Amplitudes may have any sign. The bifurcation formulas only make sense
    for positive modes and enforce that themselves.
    """

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(self.coefficients))
        if len(coeffs) == 0:
            raise ValueError("a potential needs at least one harmonic")
        if not all(np.isfinite(coeffs)):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n(self):
        return len(self.coefficients)

    @property
    def a(self):
        return np.asarray(self.coefficients)

    @property
    def modes(self):
        return np.arange(1, self.n + 1)

    def D(self, u):
        return eval_D(self, u)

    def Dprime(self, u):
        return eval_Dprime(self, u)

    def fourier_coefficient(self, k):
        """Cosine transform int_0^{2pi} D(u) cos(k u) du = -pi a_k."""
        if 1 <= k <= self.n:
            return -np.pi * self.coefficients[k - 1]
        return 0.0


def eval_D(pot, u):
    u = wrap_angle(u)
    ku = np.multiply.outer(u, pot.modes)
    return -(np.cos(ku) @ pot.a)


def eval_Dprime(pot, u):
    u = wrap_angle(u)
    ku = np.multiply.outer(u, pot.modes)
    return np.sin(ku) @ (pot.a * pot.modes)


def h_stability_decomposition(pot):
    """Split ``pot`` into H-stable and H-unstable parts, mode by mode.

    Mode k has Fourier coefficient -pi a_k, so it is stable iff a_k <= 0.
    Returns ``(stable_coeffs, unstable_coeffs, is_H_stable)``; the two
    coefficient lists add up to the original one exactly.
    """
    a = list(pot.coefficients)
    stable = [c if c <= 0.0 else 0.0 for c in a]
    unstable = [c if c > 0.0 else 0.0 for c in a]
    if not any(stable):
        stable = []
    if not any(unstable):
        unstable = []
    return stable, unstable, all(c <= 0.0 for c in a)
