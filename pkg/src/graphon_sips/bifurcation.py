"""Primary and secondary bifurcation thresholds.

Primary: theta_{m,l} = 2 / (beta a_m lambda_l), minimised over positive
modes and positive simple eigenvalues. Secondary (bichromatic potentials
only): along the even branch R_1 = 0, R_2 = L[Gamma(h_2)], the odd mode
destabilises when beta theta a_1 lambda_max(L M_g) = 1 with
g = (1 + Gamma(h_2)) / 2.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .graphon import ErdosRenyi, PowerLaw, SmallWorld, discretize
from .specialfn import bessel_ratio
from .spectral import analytic_leading_eigenpair, numeric_spectrum

TIE_RTOL = 1e-12


class ThresholdError(ValueError):
    """The potential or spectrum admits no bifurcation from the uniform state."""


class BranchConvergenceError(RuntimeError):
    pass


class BracketingError(RuntimeError):
    """Phi(theta) - 1 never changes sign on the search interval."""


@dataclass(frozen=True)
class Candidate:
    m: int
    l: int
    theta: float
    simple: bool


@dataclass
class ThresholdReport:
    theta_c: float
    mode: int
    eigen_index: int
    candidates: list
    ties: list = field(default_factory=list)

    @property
    def degenerate(self):
        return len(self.ties) > 1


def _leading_values(g, spectrum):
    if spectrum is not None:
        lams = np.asarray(spectrum.eigenvalues, dtype=float)
        simple = (
            np.ones(len(lams), bool) if spectrum.simple is None else np.asarray(spectrum.simple)
        )
        return lams, simple
    if g is None:
        raise ValueError("need a graphon or a spectrum")
    return np.array([analytic_leading_eigenpair(g).eigenvalue]), np.array([True])


def primary_threshold(pot, g=None, beta=200.0, spectrum=None):
    """Smallest theta_{m,l} over positive modes and positive simple eigenvalues.

    Without ``spectrum`` the closed-form leading eigenvalue of ``g`` is used.
    Every candidate attaining the minimum (relative 1e-12) is listed in
    ``ties``; more than one means the bifurcation is degenerate.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    a = np.asarray(pot.coefficients)
    if not np.any(a > 0):
        raise ThresholdError("potential has no positive mode; the uniform state never bifurcates")
    lams, simple = _leading_values(g, spectrum)
    if not np.any((lams > 0) & simple):
        raise ThresholdError("spectrum has no positive simple eigenvalue")

    cands = []
    for m, a_m in enumerate(a, start=1):
        if a_m <= 0:
            continue
        for l, (lam, s) in enumerate(zip(lams, simple), start=1):
            if lam <= 0:
                continue
            cands.append(Candidate(m, l, 2.0 / (beta * lam * a_m), bool(s)))

    admissible = [c for c in cands if c.simple]
    best = min(admissible, key=lambda c: c.theta)
    ties = [c for c in admissible if abs(c.theta - best.theta) <= TIE_RTOL * best.theta]
    return ThresholdReport(best.theta, best.m, best.l, cands, ties)


def second_variation_eigenvalue(m, lambda_l, theta, beta, a_m):
    """xi_{m,l} = pi m^2 (2/beta - theta a_m lambda_l)."""
    if m < 1:
        raise ValueError("mode index m must be >= 1")
    return np.pi * m * m * (2.0 / beta - theta * a_m * lambda_l)


def second_variation_zero(m, lambda_l, beta, a_m):
    """theta at which xi_{m,l} changes sign, from two evaluations of the linear map."""
    xi0 = second_variation_eigenvalue(m, lambda_l, 0.0, beta, a_m)
    xi1 = second_variation_eigenvalue(m, lambda_l, 1.0, beta, a_m)
    return xi0 / (xi0 - xi1)


# --- even branch ---------------------------------------------------------


def _graded_gauss(n_panels=16, order=16, smallest=1e-10):
    """Composite Gauss-Legendre on [0, 1] with panels refined geometrically towards 0."""
    edges = np.concatenate([[0.0], np.geomspace(smallest, 1.0, n_panels)])
    t, w = leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * t + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class BranchGrid:
    """Quadrature nodes carrying the even-branch profile of one graphon.

    ``L[f](x_i) = kappa * phi(x_i) * sum_j w_j phi(x_j) f(x_j)`` holds for
    the functions the branch produces (constants on ER/SW, multiples of
    x^-gamma on PL); ``kernel`` is the full Nystrom kernel W(x_i, x_j).
    """

    nodes: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    kappa: float
    kernel: np.ndarray
    family: str

    @property
    def lambda1(self):
        """Leading eigenvalue as seen by this quadrature."""
        return self.kappa * float(np.dot(self.weights, self.phi**2))


def branch_grid(g, m=None):
    if isinstance(g, ErdosRenyi):
        m = m or 8
        x = (np.arange(m) + 0.5) / m
        return BranchGrid(x, np.full(m, 1.0 / m), np.ones(m), g.p, np.full((m, m), g.p), "ER")
    if isinstance(g, SmallWorld):
        m = m or 64
        x = (np.arange(m) + 0.5) / m
        return BranchGrid(x, np.full(m, 1.0 / m), np.ones(m), 2.0 * g.h, discretize(g, m), "SW")
    if isinstance(g, PowerLaw):
        # y = s^(1/(1-gamma)) turns y^-gamma dy into ds/(1-gamma)
        s, ws = _graded_gauss()
        e = 1.0 / (1.0 - g.gamma)
        y = s**e
        w = ws * e * s ** (e - 1.0)
        phi = y ** (-g.gamma)
        return BranchGrid(y, w, phi, 1.0, np.outer(phi, phi), "PL")
    raise TypeError(f"no even-branch solver for {type(g).__name__}")


@dataclass
class EvenBranch:
    """Solution of R_2 = L[Gamma(h_2)], h_2 = beta theta a_2 R_2, with R_1 = 0.

    ``amplitude`` is C_2 in R_2 = C_2 phi_1 (phi_1 = 1 for ER/SW and
    x^-gamma for PL); it carries the branch sign.
    """

    theta: float
    beta: float
    a2: float
    sign: int
    amplitude: float
    grid: BranchGrid
    theta_c: float
    residual: float
    iterations: int = 0

    @property
    def profile(self):
        return self.amplitude * self.grid.phi

    @property
    def h2(self):
        return self.beta * self.theta * self.a2 * self.profile

    @property
    def nodes(self):
        return self.grid.nodes


def _parse_sign(sign):
    if sign in ("+", 1, "+1", "positive", "pos"):
        return 1
    if sign in ("-", -1, "-1", "negative", "neg"):
        return -1
    raise ValueError(f"branch sign must be '+' or '-', got {sign!r}")


def _bichromatic(pot):
    a = np.asarray(pot.coefficients)
    if len(a) < 2:
        raise ThresholdError("even-branch analysis needs a potential with an a_2 mode")
    if np.any(a[2:] != 0.0):
        raise ThresholdError("secondary analysis is implemented for bichromatic potentials only")
    a1, a2 = float(a[0]), float(a[1])
    if a2 <= 0 or a1 < 0:
        raise ThresholdError("even-branch analysis needs a_2 > 0 and a_1 >= 0")
    return a1, a2


def _amplitude_map(C, J, grid):
    """F(C) = kappa sum_j w_j phi_j Gamma(J C phi_j)."""
    return grid.kappa * np.dot(grid.weights * grid.phi, bessel_ratio(J * C * grid.phi))


def solve_even_branch(pot, g, beta, theta, sign="+", grid=None, max_iter=200):
    """Even-branch amplitude by bisection on r(C) = 1 - F(C)/C.

    r is increasing in C because F(C)/C is strictly decreasing, and
    r(0+) = 1 - J lambda_1 / 2 is negative exactly above threshold, so the
    root is bracketed by (0, F_max]. Bisection runs to full double
    precision or ``max_iter`` halvings.
    """
    _, a2 = _bichromatic(pot)
    s = _parse_sign(sign)
    grid = grid or branch_grid(g)
    lam = grid.lambda1
    J = beta * theta * a2
    theta_c = 2.0 / (beta * a2 * lam)

    if J * lam / 2.0 <= 1.0:
        return EvenBranch(theta, beta, a2, s, 0.0, grid, theta_c, 0.0, 0)

    lo, hi = 0.0, grid.kappa * float(np.dot(grid.weights, grid.phi))
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mid - _amplitude_map(mid, J, grid) < 0.0:
            lo = mid
        else:
            hi = mid
    else:
        if hi - lo > 1e-12 * hi:
            raise BranchConvergenceError(
                f"even branch not converged after {max_iter} halvings (bracket width {hi - lo:.3e})"
            )
    # pick whichever end has the smaller residual
    C = min((lo, hi), key=lambda c: abs(c - _amplitude_map(c, J, grid)))
    branch = EvenBranch(theta, beta, a2, s, s * C, grid, theta_c, 0.0, it)
    branch.residual = even_branch_residual(branch)
    return branch


def even_branch_residual(branch):
    """sup_i |R_2(x_i) - L[Gamma(h_2)](x_i)| using the full Nystrom kernel."""
    grid = branch.grid
    rhs = grid.kernel @ (grid.weights * bessel_ratio(branch.h2))
    return float(np.max(np.abs(branch.profile - rhs)))


def pitchfork_exponent(pot, g, beta, ratios=None):
    """Least-squares slope of log C_2 against log(theta - theta_c)."""
    _, a2 = _bichromatic(pot)
    grid = branch_grid(g)
    theta_c = 2.0 / (beta * a2 * grid.lambda1)
    if ratios is None:
        ratios = np.geomspace(1.001, 1.05, 25)
    thetas = theta_c * np.asarray(ratios)
    amps = np.array([solve_even_branch(pot, g, beta, t, grid=grid).amplitude for t in thetas])
    slope, _ = np.polyfit(np.log(thetas - theta_c), np.log(amps), 1)
    return float(slope)


def susceptibility_g(branch_or_h2):
    """g(x) = (1 + Gamma(h_2(x))) / 2 on the branch grid."""
    h2 = branch_or_h2.h2 if isinstance(branch_or_h2, EvenBranch) else np.asarray(branch_or_h2)
    return 0.5 * (1.0 + bessel_ratio(h2))


# --- secondary threshold --------------------------------------------------


def lambda_max_symmetrized(branch, tol=1e-12):
    """Largest eigenvalue of sqrt(g) W sqrt(g) under the branch quadrature."""
    g = susceptibility_g(branch)
    sg = np.sqrt(g)
    K = sg[:, None] * branch.grid.kernel * sg[None, :]
    spec = numeric_spectrum(K, k=1, weights=branch.grid.weights, tol=tol)
    return float(spec.eigenvalues[0])


def lambda_max_composition(branch, tol=1e-13, max_iter=100000):
    """Largest eigenvalue of the non-symmetric A = L M_g by plain power iteration."""
    grid = branch.grid
    gw = susceptibility_g(branch) * grid.weights
    v = np.ones(len(gw))
    lam = 0.0
    for _ in range(max_iter):
        Av = grid.kernel @ (gw * v)
        new = float(np.max(np.abs(Av)))
        Av /= new
        if abs(new - lam) <= tol * new and np.max(np.abs(Av - v)) <= 1e-12:
            return new
        v, lam = Av, new
    raise BranchConvergenceError("power iteration on L M_g did not converge")


def lambda_max_scalar(branch):
    """Constant-eigenfunction families: A = g L, so lambda_max = g lambda_1."""
    return float(susceptibility_g(branch)[0]) * branch.grid.lambda1


@dataclass
class SecondaryReport:
    theta_c2: object
    sign: int
    theta_c: float
    bounds: tuple
    trace: list
    phi_at_root: object = None

    def trace_to_csv(self, path, beta=None, a1=None):
        with open(path, "w", newline="\n") as fh:
            fh.write("theta,lambda_max,Phi\n")
            for theta, lam, phi in self.trace:
                fh.write(f"{theta:.12g},{lam:.12g},{phi:.12g}\n")


def secondary_threshold(pot, g, beta, sign="+", spectrum=None, theta_max_factor=10.0,
                        n_scan=48, method="auto", rtol=1e-14):
    """Solve Phi(theta) = beta theta a_1 lambda_max(L M_g(theta)) = 1.

    The interval [theta_c (1 + 1e-6), theta_max_factor * theta_c] is scanned
    on a geometric grid, the first sign change of Phi - 1 is refined by
    bisection. On the negative branch a scan without crossing means the
    branch stays stable and ``theta_c2`` is None; on the positive branch it
    raises ``BracketingError``.

    ``method`` selects how lambda_max is obtained: ``scalar`` (g lambda_1,
    valid when phi_1 is constant), ``numeric`` (power iteration on the
    symmetrised kernel) or ``auto`` (scalar for ER/SW, numeric otherwise).
    """
    a1, a2 = _bichromatic(pot)
    if a1 <= 0 or a2 <= a1:
        raise ThresholdError("secondary threshold needs 0 < a_1 < a_2")
    s = _parse_sign(sign)
    grid = branch_grid(g)
    lam1 = (
        float(spectrum.eigenvalues[0])
        if spectrum is not None
        else analytic_leading_eigenpair(g).eigenvalue
    )
    theta_c = 2.0 / (beta * a2 * grid.lambda1)
    bounds = (1.0 / (beta * a1 * lam1), 2.0 / (beta * a1 * lam1)) if s > 0 else (
        2.0 / (beta * a1 * lam1),
        np.inf,
    )

    if method == "auto":
        method = "scalar" if grid.family in ("ER", "SW") else "numeric"
    if method == "scalar":
        lam_max = lambda_max_scalar
    elif method == "numeric":
        lam_max = lambda_max_symmetrized
    else:
        raise ValueError(f"unknown method {method!r}")

    trace = []

    def phi(theta):
        br = solve_even_branch(pot, g, beta, theta, sign=s, grid=grid)
        lm = lam_max(br)
        val = beta * theta * a1 * lm
        trace.append((theta, lm, val))
        return val

    thetas = np.geomspace(theta_c * (1.0 + 1e-6), theta_max_factor * theta_c, n_scan)
    prev_t, prev_v = thetas[0], phi(thetas[0])
    bracket = None
    if prev_v >= 1.0:
        bracket = (prev_t, prev_t)
    for t in thetas[1:]:
        if bracket:
            break
        v = phi(t)
        if (prev_v - 1.0) * (v - 1.0) <= 0.0:
            bracket = (prev_t, t)
        prev_t, prev_v = t, v

    if bracket is None:
        trace.sort()
        if s < 0:
            return SecondaryReport(None, s, theta_c, bounds, trace)
        raise BracketingError(
            f"Phi(theta) stays below 1 on [{thetas[0]:.6g}, {thetas[-1]:.6g}] on the positive branch"
        )

    lo, hi = bracket
    v_lo = phi(lo)
    root, v_root = lo, v_lo
    for _ in range(200):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        v = phi(mid)
        root, v_root = mid, v
        if v == 1.0:
            break
        if (v_lo - 1.0) * (v - 1.0) < 0.0:
            hi = mid
        else:
            lo, v_lo = mid, v
    trace.sort()
    return SecondaryReport(root, s, theta_c, bounds, trace, v_root)
