"""Euler-Maruyama simulation of N interacting diffusions on a weighted graph.

    dX^i = -(theta / (N alpha_N)) sum_j W_ij D'(X^i - X^j) dt + sqrt(2/beta) dB^i

Noise for step s is drawn from a stream keyed by (noise_seed, s // CHUNK),
so a trajectory depends only on its seeds and parameters, never on how the
run is split into recording intervals or scheduled across workers.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .potential import TWO_PI, MultichromaticPotential, wrap_angle

log = logging.getLogger(__name__)

SPARSE_DENSITY = 0.10
NOISE_CHUNK = 256
_NOISE_TAG = 1


@dataclass
class SimParams:
    theta: float
    beta: float
    potential: MultichromaticPotential
    graph: object
    dt: float = 0.01
    T: float = 1.0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"horizon T={self.T} shorter than dt={self.dt}")
        if not self.beta > 0:
            raise ValueError("beta must be positive (use inf for zero noise)")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be >= 1")
        self.record_stride = int(self.record_stride)

    @property
    def sigma(self):
        return float(np.sqrt(2.0 / self.beta))

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def scale(self):
        return self.theta / (self.graph.n * self.graph.alpha_n)

    def stability_number(self):
        """theta max_i deg_i / (N alpha_N) * sum_k a_k k^2 * dt (explicit-scheme heuristic)."""
        a = np.abs(self.potential.a)
        k = self.potential.modes
        return self.scale * self.graph.degrees.max() * float(np.sum(a * k * k)) * self.dt


@dataclass
class ParticleState:
    positions: np.ndarray
    time: float = 0.0
    step: int = 0
    noise_seed: int = 0

    @property
    def n(self):
        return len(self.positions)


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    final: ParticleState = field(repr=False, default=None)


def init_state(n, seed=0, distribution="uniform", value=None):
    """Initial positions: ``uniform`` on [0, 2pi), ``point_mass`` at ``value``,
    or ``custom`` with ``value`` the explicit list of positions."""
    if n < 1:
        raise ValueError("need at least one particle")
    if distribution == "uniform":
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2,)))
        pos = rng.uniform(0.0, TWO_PI, size=n)
    elif distribution == "point_mass":
        pos = np.full(n, 0.0 if value is None else float(value))
    elif distribution == "custom":
        pos = np.asarray(value, dtype=float).copy()
        if pos.shape != (n,):
            raise ValueError(f"custom positions must have length {n}")
    else:
        raise ValueError(f"unknown initial distribution {distribution!r}")
    return ParticleState(positions=wrap_angle(pos), time=0.0, step=0)


class NoiseStream:
    """Standard normals for step s, particle i, reproducible from the seed alone."""

    def __init__(self, seed, n):
        self.seed = int(seed)
        self.n = n
        self._chunk_id = None
        self._chunk = None

    def _load(self, c):
        if c != self._chunk_id:
            ss = np.random.SeedSequence(self.seed, spawn_key=(_NOISE_TAG, c))
            self._chunk = np.random.default_rng(ss).standard_normal((NOISE_CHUNK, self.n))
            self._chunk_id = c
        return self._chunk

    def block(self, start, count):
        out = np.empty((count, self.n))
        filled = 0
        while filled < count:
            s = start + filled
            c, off = divmod(s, NOISE_CHUNK)
            take = min(count - filled, NOISE_CHUNK - off)
            out[filled : filled + take] = self._load(c)[off : off + take]
            filled += take
        return out


def _graph_operands(graph, force_sparse=None):
    sparse = graph.density < SPARSE_DENSITY if force_sparse is None else force_sparse
    if sparse:
        return "sparse", graph.csr()
    return "dense", (np.ascontiguousarray(graph.weights, dtype=float),)


def drift(positions, params, backend=None, sparse=None):
    """Mode-decomposed drift of every particle."""
    table = _kernels.kernels(backend)
    kind, ops = _graph_operands(params.graph, sparse)
    x = np.ascontiguousarray(positions, dtype=float)
    pot = params.potential
    ak = pot.a * pot.modes
    modes = pot.modes.astype(float)
    f = table["force_" + kind](x, *ops, ak, modes)
    return -params.scale * f


def _advance(x, params, noise, table, kind, ops):
    pot = params.potential
    ak = np.ascontiguousarray(pot.a * pot.modes, dtype=float)
    modes = pot.modes.astype(float)
    amp = params.sigma * np.sqrt(params.dt)
    table[kind](x, *ops, ak, modes, params.scale, amp, params.dt, noise)


def _check(state, params):
    if state.n != params.graph.n:
        raise ValueError(
            f"state has {state.n} particles but the graph has {params.graph.n} vertices"
        )
    stab = params.stability_number()
    if stab > 0.5:
        warnings.warn(
            f"explicit step may be unstable (stability number {stab:.3g} > 0.5)",
            RuntimeWarning,
            stacklevel=3,
        )


def step(state, params, backend=None):
    """One Euler-Maruyama step; noise row ``state.step`` of ``state.noise_seed``."""
    _check(state, params)
    table = _kernels.kernels(backend)
    kind, ops = _graph_operands(params.graph)
    noise = NoiseStream(state.noise_seed, state.n).block(state.step, 1)
    x = np.array(state.positions, dtype=float)
    _advance(x, params, noise, table, kind, ops)
    return replace(state, positions=x, time=(state.step + 1) * params.dt, step=state.step + 1)


def run(params, state0, noise_seed, backend=None, sparse=None, observer=None):
    """Integrate to ``params.T`` recording positions every ``record_stride`` steps.

    Snapshots are taken at t = 0, stride*dt, 2*stride*dt, ... and always at
    the final time T. With ``observer`` set, ``observer(t, x)`` is called at
    each snapshot instead of storing it, and ``positions`` holds only the
    final configuration.
    """
    _check(state0, params)
    table = _kernels.kernels(backend)
    kind, ops = _graph_operands(params.graph, sparse)
    noise = NoiseStream(noise_seed, state0.n)

    n_steps = params.n_steps
    stride = params.record_stride
    marks = list(range(0, n_steps, stride)) + [n_steps]
    if len(marks) > 1 and marks[-1] == marks[-2]:
        marks.pop()

    x = np.array(state0.positions, dtype=float)
    times = state0.time + np.asarray(marks, dtype=float) * params.dt
    snaps = None if observer else np.empty((len(marks), state0.n))

    def emit(idx):
        if observer:
            observer(times[idx], x)
        else:
            snaps[idx] = x

    emit(0)
    start = state0.step
    done = 0
    for idx in range(1, len(marks)):
        count = marks[idx] - done
        _advance(x, params, noise.block(start + done, count), table, kind, ops)
        done = marks[idx]
        emit(idx)

    if observer:
        snaps = x[None, :].copy()
    final = ParticleState(x, float(times[-1]), start + n_steps, int(noise_seed))
    return Trajectory(times=times, positions=snaps, final=final)


def dump_positions(traj, path):
    """Write snapshots: ``.npz`` (times, positions) or CSV rows ``t,x_0,...,x_{N-1}``."""
    path = str(path)
    if path.endswith(".npz"):
        np.savez(path, times=traj.times, positions=traj.positions)
        return
    times = traj.times if len(traj.times) == len(traj.positions) else traj.times[-1:]
    with open(path, "w", newline="\n") as fh:
        n = traj.positions.shape[1]
        fh.write("t," + ",".join(f"x{i}" for i in range(n)) + "\n")
        for t, row in zip(times, traj.positions):
            fh.write(f"{t:.12g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
