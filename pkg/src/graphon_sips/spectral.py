"""Spectrum of the graphon integral operator L[V](x) = int_0^1 W(x, y) V(y) dy."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graphon import ErdosRenyi, PowerLaw, SmallWorld, discretize


class ConvergenceError(RuntimeError):
    """Iterative eigen-solver did not reach its residual tolerance."""


@dataclass
class SpectrumResult:
    """Leading eigenpairs of a discretised integral operator.

    ``eigenfunctions[l]`` is sampled on the quadrature nodes and has unit
    discrete L2 norm, sum_i w_i phi_i^2 = 1 (w_i = 1/m on a uniform grid).
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid_size: int
    simple: np.ndarray = field(default=None)
    residuals: np.ndarray = field(default=None)
    weights: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.eigenvalues)

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("index,eigenvalue\n")
            for i, lam in enumerate(self.eigenvalues, start=1):
                fh.write(f"{i},{lam:.12g}\n")


@dataclass(frozen=True)
class LeadingEigenpair:
    """Closed-form leading eigenpair: phi(x) = 1 or phi(x) = x^(-exponent)."""

    eigenvalue: float
    kind: str
    exponent: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.ones_like(x)[()]
        return (x ** (-self.exponent))[()]

    @property
    def norm(self):
        if self.kind == "constant":
            return 1.0
        return 1.0 / np.sqrt(1.0 - 2.0 * self.exponent)


def analytic_leading_eigenpair(g):
    """(lambda_1, phi_1) for the three families.

    ER: (p, 1). PL is rank one: (1/(1-2 gamma), x^-gamma). SW: (2h, 1),
    the constant function being an eigenfunction since every row of the
    ring kernel integrates to 2h.
    """
    if isinstance(g, ErdosRenyi):
        return LeadingEigenpair(float(g.p), "constant")
    if isinstance(g, SmallWorld):
        return LeadingEigenpair(2.0 * g.h, "constant")
    if isinstance(g, PowerLaw):
        return LeadingEigenpair(1.0 / (1.0 - 2.0 * g.gamma), "power", g.gamma)
    raise TypeError(f"no closed form for {type(g).__name__}")


def _inner(u, v, w):
    return np.dot(w * u, v)


def numeric_spectrum(kernel, k=1, weights=None, tol=1e-10, max_iter=20000, seed=0,
                     multiplet_rtol=1e-6):
    """Top-``k`` eigenpairs of the Nystrom operator f -> sum_j K_ij w_j f_j.

    Shifted power iteration with Gram-Schmidt deflation. The shift by an
    upper bound of the spectral radius makes the whole shifted spectrum
    nonnegative, so eigenvalues come out in descending algebraic order.
    Uniform weights 1/m are used unless ``weights`` is given. One extra
    pair is computed to decide whether the k-th eigenvalue is simple.
    """
    K = np.asarray(kernel, dtype=float)
    m = K.shape[0]
    if K.shape != (m, m):
        raise ValueError("kernel must be square")
    if not np.allclose(K, K.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(K).max())):
        raise ValueError("kernel must be symmetric")
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= {m}")
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)

    # symmetric form S = sqrt(w) K sqrt(w); eigenvectors psi = sqrt(w) phi
    sw = np.sqrt(w)
    S = sw[:, None] * K * sw[None, :]
    shift = np.abs(S).sum(axis=1).max()
    scale = max(shift, np.finfo(float).tiny)

    rng = np.random.default_rng(seed)
    n_pairs = min(k + 1, m)
    vals, vecs, res = [], [], []
    for _ in range(n_pairs):
        v = rng.standard_normal(m)
        basis = np.array(vecs) if vecs else np.empty((0, m))
        v -= basis.T @ (basis @ v)
        v /= np.linalg.norm(v)
        lam = 0.0
        for it in range(max_iter):
            Sv = S @ v
            lam = float(v @ Sv)
            r = np.linalg.norm(Sv - lam * v)
            if r <= tol:
                break
            v = Sv + shift * v
            # deflate twice: one pass of Gram-Schmidt loses orthogonality slowly
            v -= basis.T @ (basis @ v)
            v -= basis.T @ (basis @ v)
            nv = np.linalg.norm(v)
            if nv <= 1e-300 * scale:
                break
            v /= nv
        else:
            raise ConvergenceError(
                f"power iteration stalled after {max_iter} iterations "
                f"(eigenpair {len(vals) + 1}, residual {r:.3e})"
            )
        vals.append(lam)
        vecs.append(v)
        res.append(r)

    order = np.argsort(vals)[::-1]
    vals = np.asarray(vals)[order]
    vecs = np.asarray(vecs)[order]
    res = np.asarray(res)[order]

    simple = np.ones(len(vals), dtype=bool)
    for i in range(len(vals) - 1):
        if abs(vals[i] - vals[i + 1]) <= multiplet_rtol * max(abs(vals[i]), abs(vals[i + 1])):
            simple[i] = simple[i + 1] = False

    funcs = vecs / sw[None, :]
    # fix the sign so the function has a positive weighted mean
    for i in range(len(funcs)):
        if _inner(funcs[i], np.ones(m), w) < 0:
            funcs[i] = -funcs[i]

    return SpectrumResult(
        eigenvalues=vals[:k],
        eigenfunctions=funcs[:k],
        grid_size=m,
        simple=simple[:k],
        residuals=res[:k],
        weights=w,
    )


def graphon_spectrum(g, m=512, k=1, **kwargs):
    """Numerical spectrum of ``g`` on an m-point uniform grid (cell averages)."""
    spec = numeric_spectrum(discretize(g, m), k=k, **kwargs)
    if isinstance(g, SmallWorld):
        check_small_world_dominance(g, spec)
    return spec


def check_small_world_dominance(g, spec, rtol=1e-6):
    """Warn if the discretised SW kernel has an eigenvalue above 2h."""
    lam = 2.0 * g.h
    if spec.eigenvalues[0] > lam * (1.0 + rtol) and not np.allclose(
        spec.eigenfunctions[0], spec.eigenfunctions[0].mean(), atol=1e-6
    ):
        warnings.warn(
            f"small-world kernel has leading eigenvalue {spec.eigenvalues[0]:.6g} > 2h = {lam:.6g}",
            RuntimeWarning,
            stacklevel=2,
        )
        return False
    return True


def operator_residual(kernel, spec, weights=None):
    """Discrete L2 residuals ||L_m phi - lambda phi|| for every pair of ``spec``."""
    K = np.asarray(kernel, dtype=float)
    m = K.shape[0]
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
    out = []
    for lam, phi in zip(spec.eigenvalues, spec.eigenfunctions):
        r = K @ (w * phi) - lam * phi
        out.append(np.sqrt(_inner(r, r, w)))
    return np.asarray(out)
