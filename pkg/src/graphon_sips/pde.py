"""Mean-field limit: the graphon McKean-Vlasov equation

    d_t rho(u, x) = theta d_u(rho d_u Phi) + beta^-1 d_uu rho,
    Phi(u, x) = int int W(x, y) D(u - v) rho(v, y) dv dy,

in a Fourier basis in u and on a uniform midpoint grid in x. Each fibre is

    rho(u, x) = (1/2pi) (1 + sum_{j=1..M} A_j(x) cos(ju) + B_j(x) sin(ju)),

so mass is conserved by construction and m_k(x) = A_k(x) / 2. With
D(u) = -sum a_k cos(ku) the potential field is

    Phi = -1/2 sum_k a_k (L A_k cos(ku) + L B_k sin(ku)).

Products are formed on a 4M-point u-grid, which is alias-free for the
quadratic transport term as long as the potential has at most M modes.
"""

import functools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graphon import discretize
from .potential import TWO_PI

log = logging.getLogger(__name__)

EPS_NEG = 1e-6
ENTROPY_FLOOR = 1e-12
BLOWUP = 1e3


class RealizabilityError(ArithmeticError):
    """Truncated density went negative beyond the allowed tolerance."""


class BlowUpError(ArithmeticError):
    """Coefficient norm exceeded the blow-up guard."""


class FixedPointError(RuntimeError):
    """Stationary iteration hit its cap without converging."""


@dataclass
class MeanFieldState:
    """Coefficients ``A[i, j-1]``, ``B[i, j-1]`` of mode j on x-node i."""

    A: np.ndarray
    B: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.A = np.array(self.A, dtype=float)
        self.B = np.array(self.B, dtype=float)
        if self.A.ndim != 2 or self.A.shape != self.B.shape:
            raise ValueError("A and B must be 2-D arrays of equal shape (m, M)")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def M(self):
        return self.A.shape[1]

    @property
    def x_grid(self):
        return (np.arange(self.m) + 0.5) / self.m

    @classmethod
    def uniform(cls, m=64, M=16):
        return cls(np.zeros((m, M)), np.zeros((m, M)))

    @classmethod
    def perturbed(cls, m=64, M=16, mode=1, eps=1e-3, profile=None, sine=False):
        """Uniform state plus eps * profile(x) * cos(mode u) (or sin)."""
        s = cls.uniform(m, M)
        prof = np.ones(m) if profile is None else np.asarray(profile, dtype=float)
        (s.B if sine else s.A)[:, mode - 1] = eps * prof
        return s

    def copy(self):
        return MeanFieldState(self.A.copy(), self.B.copy(), self.time)

    def m_k(self, k):
        """m_k(x) = int cos(ku) rho du = A_k / 2."""
        return self.A[:, k - 1] / 2.0

    def to_grid(self, nu=None):
        """rho on the u-grid 2pi i / nu, shape (m, nu)."""
        nu = 4 * self.M if nu is None else nu
        c = np.zeros((self.m, nu // 2 + 1), dtype=complex)
        c[:, 0] = 1.0 / TWO_PI
        c[:, 1 : self.M + 1] = (self.A - 1j * self.B) / (2.0 * TWO_PI)
        return np.fft.irfft(c * nu, n=nu, axis=1)

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("x_index,j,A_j,B_j\n")
            for i in range(self.m):
                for j in range(self.M):
                    fh.write(f"{i},{j + 1},{self.A[i, j]:.17g},{self.B[i, j]:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        m = int(data[:, 0].max()) + 1
        M = int(data[:, 1].max())
        A = np.zeros((m, M))
        B = np.zeros((m, M))
        i = data[:, 0].astype(int)
        j = data[:, 1].astype(int) - 1
        A[i, j] = data[:, 2]
        B[i, j] = data[:, 3]
        return cls(A, B)


@functools.lru_cache(maxsize=32)
def _coupling(g, m):
    """Nystrom matrix of L on the midpoint grid: (L f)_i = sum_j K_ij f_j."""
    K = discretize(g, m) / m
    K.setflags(write=False)
    return K


@functools.lru_cache(maxsize=16)
def _tables(M, nu):
    u = TWO_PI * np.arange(nu) / nu
    j = np.arange(1, M + 1)
    cos_t = np.cos(np.outer(j, u))
    sin_t = np.sin(np.outer(j, u))
    cos_t.setflags(write=False)
    sin_t.setflags(write=False)
    return cos_t, sin_t


class _Model:
    def __init__(self, state, theta, beta, pot, g, kernel=None):
        if pot.n > state.M:
            raise ValueError(f"potential has {pot.n} modes but the state keeps only {state.M}")
        self.theta = float(theta)
        self.beta = float(beta)
        self.pot = pot
        self.K = _coupling(g, state.m) if kernel is None else np.asarray(kernel, dtype=float)
        if self.K.shape != (state.m, state.m):
            raise ValueError("kernel does not match the x-grid")
        self.M = state.M
        self.nu = 4 * state.M
        self.cos_t, self.sin_t = _tables(self.M, self.nu)
        self.j = np.arange(1, self.M + 1, dtype=float)
        self.k = pot.modes
        self.a = pot.a

    def field_coeffs(self, s):
        """(L A_k, L B_k) for the potential modes, shape (m, n)."""
        idx = self.k - 1
        return self.K @ s.A[:, idx], self.K @ s.B[:, idx]

    def phi(self, s):
        LA, LB = self.field_coeffs(s)
        ct = self.cos_t[self.k - 1]
        st = self.sin_t[self.k - 1]
        return -0.5 * ((LA * self.a) @ ct + (LB * self.a) @ st)

    def phi_u(self, s):
        LA, LB = self.field_coeffs(s)
        ak = self.a * self.k
        ct = self.cos_t[self.k - 1]
        st = self.sin_t[self.k - 1]
        return 0.5 * ((LA * ak) @ st - (LB * ak) @ ct)

    def rho(self, s):
        return (1.0 + s.A @ self.cos_t + s.B @ self.sin_t) / TWO_PI

    def project(self, f):
        """Coefficients (FA, FB) of f in the (1/2pi)(sum FA cos + FB sin) convention."""
        scale = 2.0 * TWO_PI / self.nu
        return scale * (f @ self.cos_t.T), scale * (f @ self.sin_t.T)

    def transport(self, s, rho=None):
        rho = self.rho(s) if rho is None else rho
        FA, FB = self.project(rho * self.phi_u(s))
        return self.theta * self.j * FB, -self.theta * self.j * FA

    def decay(self):
        return self.j**2 / self.beta


def _mask(M, symmetry):
    return (np.arange(1, M + 1) % int(symmetry)) == 0


def _check_realizable(rho, eps=EPS_NEG):
    lo = float(rho.min())
    if lo < -eps:
        raise RealizabilityError(f"density minimum {lo:.3e} below -{eps:g}")
    return lo


def rhs(state, theta, beta, pot, g, symmetry=1, kernel=None):
    """Time derivative (dA, dB) of the coefficients."""
    model = _Model(state, theta, beta, pot, g, kernel)
    rho = model.rho(state)
    _check_realizable(rho)
    TA, TB = model.transport(state, rho)
    lam = model.decay()
    dA = TA - lam * state.A
    dB = TB - lam * state.B
    if symmetry != 1:
        keep = _mask(state.M, symmetry)
        dA[:, ~keep] = 0.0
        dB[:, ~keep] = 0.0
    return dA, dB


@dataclass
class FreeEnergy:
    F: float
    entropy: float
    interaction: float
    clamped: int = 0


def free_energy(state, theta, beta, pot, g, kernel=None, floor=ENTROPY_FLOOR, parts=False):
    """beta^-1 int int rho log rho + (theta/2) int...int W D rho rho.

    The interaction term reduces exactly to
    -(theta/8) sum_k a_k (<A_k, L A_k> + <B_k, L B_k>). The entropy uses the
    4M-point u-grid with the density clamped below at ``floor``; the number
    of clamped samples is reported when ``parts`` is set.
    """
    model = _Model(state, theta, beta, pot, g, kernel)
    rho = model.rho(state)
    _check_realizable(rho)
    clamped = int(np.count_nonzero(rho < floor))
    if clamped:
        log.debug("entropy floor applied at %d grid points", clamped)
    r = np.maximum(rho, floor)
    S = float(np.mean(np.sum(r * np.log(r), axis=1) * (TWO_PI / model.nu))) / model.beta
    LA, LB = model.field_coeffs(state)
    idx = model.k - 1
    quad = np.mean(state.A[:, idx] * LA + state.B[:, idx] * LB, axis=0)
    E = -model.theta / 8.0 * float(model.a @ quad)
    out = FreeEnergy(S + E, S, E, clamped)
    return out if parts else out.F


@dataclass
class PDETrajectory:
    times: np.ndarray
    F: np.ndarray
    S: np.ndarray
    E_int: np.ndarray
    final: MeanFieldState
    snapshots: list = field(default_factory=list, repr=False)
    clamped: int = 0

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("t,F,S,E_int\n")
            for row in zip(self.times, self.F, self.S, self.E_int):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def evolve(state0, theta, beta, pot, g, T, dt_pde=0.01, symmetry=1, record_every=1,
           snapshot_every=None, kernel=None):
    """Integrate to time T with exponential-Euler (ETD1) steps.

    Diffusion is integrated exactly per mode, A <- e^{-lam dt} A +
    (1 - e^{-lam dt}) / lam * N(A) with lam = j^2 / beta and N the explicit
    transport term. Fixed points of the step are exactly the zeros of rhs.
    ``symmetry`` = s keeps only modes divisible by s.
    """
    if not dt_pde > 0:
        raise ValueError("dt_pde must be positive")
    n_steps = int(round(T / dt_pde))
    s = state0.copy()
    model = _Model(s, theta, beta, pot, g, kernel)
    keep = _mask(s.M, symmetry)
    s.A[:, ~keep] = 0.0
    s.B[:, ~keep] = 0.0

    lam = model.decay()
    E = np.exp(-lam * dt_pde)
    phi1 = -np.expm1(-lam * dt_pde) / lam

    times, Fs, Ss, Es, snaps = [], [], [], [], []
    clamped = 0

    def record(st):
        nonlocal clamped
        fe = free_energy(st, theta, beta, pot, g, kernel=model.K, parts=True)
        times.append(st.time)
        Fs.append(fe.F)
        Ss.append(fe.entropy)
        Es.append(fe.interaction)
        clamped += fe.clamped

    record(s)
    if snapshot_every:
        snaps.append(s.copy())
    for n in range(1, n_steps + 1):
        rho = model.rho(s)
        _check_realizable(rho)
        TA, TB = model.transport(s, rho)
        TA[:, ~keep] = 0.0
        TB[:, ~keep] = 0.0
        s.A = E * s.A + phi1 * TA
        s.B = E * s.B + phi1 * TB
        s.time = state0.time + n * dt_pde
        norm = max(np.abs(s.A).max(), np.abs(s.B).max())
        if not np.isfinite(norm) or norm > BLOWUP:
            raise BlowUpError(f"coefficient norm {norm:.3g} at t = {s.time:.6g}")
        if n % record_every == 0 or n == n_steps:
            record(s)
        if snapshot_every and n % snapshot_every == 0:
            snaps.append(s.copy())
    return PDETrajectory(
        np.asarray(times), np.asarray(Fs), np.asarray(Ss), np.asarray(Es), s, snaps, clamped
    )


def gibbs_map(state, theta, beta, pot, g, symmetry=1, kernel=None):
    """f(rho) = exp(-beta theta Phi) / Z, evaluated on the u-grid and re-projected."""
    model = _Model(state, theta, beta, pot, g, kernel)
    return _gibbs(model, state, symmetry)


def _gibbs(model, state, symmetry):
    h = -model.beta * model.theta * model.phi(state)
    h -= h.max(axis=1, keepdims=True)
    w = np.exp(h)
    rho = w / (w.mean(axis=1, keepdims=True) * TWO_PI)
    FA, FB = model.project(rho)
    keep = _mask(state.M, symmetry)
    FA[:, ~keep] = 0.0
    FB[:, ~keep] = 0.0
    return MeanFieldState(FA, FB, state.time)


def stationary_fixed_point(theta, beta, pot, g, init, damping=0.5, tol=1e-12, max_iter=100000,
                           symmetry=1, kernel=None):
    """Damped iteration rho <- (1 - damping) rho + damping f(rho) to a fixed point.

    Stops when the sup-norm coefficient change falls below ``tol`` and raises
    FixedPointError after ``max_iter`` iterations.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    model = _Model(init, theta, beta, pot, g, kernel)
    s = init.copy()
    keep = _mask(s.M, symmetry)
    s.A[:, ~keep] = 0.0
    s.B[:, ~keep] = 0.0
    for it in range(1, max_iter + 1):
        f = _gibbs(model, s, symmetry)
        dA = f.A - s.A
        dB = f.B - s.B
        change = damping * max(np.abs(dA).max(), np.abs(dB).max())
        s.A += damping * dA
        s.B += damping * dB
        if change < tol:
            log.debug("fixed point after %d iterations", it)
            return s
    raise FixedPointError(f"no convergence after {max_iter} iterations (last change {change:.3e})")


def fixed_point_residual(state, theta, beta, pot, g, symmetry=1, kernel=None):
    f = gibbs_map(state, theta, beta, pot, g, symmetry, kernel)
    return max(np.abs(f.A - state.A).max(), np.abs(f.B - state.B).max())


def odd_mode_growth_rate(state, theta, beta, pot, g, eps=1e-7, kernel=None):
    """Largest real part of the rhs Jacobian restricted to odd modes.

    ``state`` should be an even (pi-periodic) stationary state; odd
    perturbations then decouple from even ones. The Jacobian is built by
    central differences, so this is a diagnostic for moderate m and M.
    """
    M = state.M
    odd = np.flatnonzero(np.arange(1, M + 1) % 2 == 1)
    m = state.m
    n_odd = len(odd)
    dim = 2 * m * n_odd

    def pack(dA, dB):
        return np.concatenate([dA[:, odd].ravel(), dB[:, odd].ravel()])

    J = np.empty((dim, dim))
    col = 0
    for which in (0, 1):
        for i in range(m):
            for q in odd:
                sp = state.copy()
                sm = state.copy()
                (sp.A if which == 0 else sp.B)[i, q] += eps
                (sm.A if which == 0 else sm.B)[i, q] -= eps
                fp = pack(*rhs(sp, theta, beta, pot, g, kernel=kernel))
                fm = pack(*rhs(sm, theta, beta, pot, g, kernel=kernel))
                J[:, col] = (fp - fm) / (2.0 * eps)
                col += 1
    # column order is (A|B, x, j), matching pack's (A|B, x, j) row order
    return float(np.max(np.linalg.eigvals(J).real))


def transport_guard(state, theta, beta, pot, g, dt_pde, kernel=None):
    """dt * theta * max|d_u Phi| * M, the explicit-transport step number."""
    model = _Model(state, theta, beta, pot, g, kernel)
    val = dt_pde * model.theta * float(np.abs(model.phi_u(state)).max()) * state.M
    if val > 1.0:
        warnings.warn(f"transport step number {val:.3g} > 1", RuntimeWarning, stacklevel=2)
    return val
