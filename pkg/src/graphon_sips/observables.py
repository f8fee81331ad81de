"""Order parameters, interaction energies and plateau detection for particle runs."""

from dataclasses import dataclass, field

import numpy as np

from .potential import TWO_PI


@dataclass
class EnergySeries:
    """Energy diagnostics sampled along a trajectory.

    ``U_values`` uses the all-to-all formula -1/2 sum |a_k| |r_k|^2 and
    ``E_graph_values`` the graph-weighted empirical interaction energy.
    """

    times: np.ndarray
    U_values: np.ndarray
    E_graph_values: np.ndarray = None
    r_magnitudes: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.U_values = np.asarray(self.U_values, dtype=float)
        if self.times.shape != self.U_values.shape:
            raise ValueError("times and U_values must have the same length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.E_graph_values is None:
            self.E_graph_values = np.full_like(self.U_values, np.nan)
        self.E_graph_values = np.asarray(self.E_graph_values, dtype=float)
        if self.r_magnitudes is not None:
            self.r_magnitudes = np.atleast_2d(np.asarray(self.r_magnitudes, dtype=float))

    def __len__(self):
        return len(self.times)

    @classmethod
    def from_snapshots(cls, times, positions, pot, graph=None):
        positions = np.atleast_2d(positions)
        r = np.abs(order_parameters(positions, pot.n))
        U = -0.5 * (r**2) @ np.abs(pot.a)
        if graph is None:
            E = None
        else:
            E = np.array([graph_interaction_energy(x, graph, pot) for x in positions])
        return cls(times, U, E, r)

    def to_csv(self, path):
        K = 0 if self.r_magnitudes is None else self.r_magnitudes.shape[1]
        cols = ["t", "U", "E_graph"] + [f"r{k}" for k in range(1, K + 1)]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self)):
                vals = [self.times[i], self.U_values[i], self.E_graph_values[i]]
                if K:
                    vals.extend(self.r_magnitudes[i])
                fh.write(",".join(f"{v:.12g}" for v in vals) + "\n")


def order_parameters(positions, K):
    """r_k = (1/N) sum_j exp(i k x_j) for k = 1..K.

    A 2-D input is treated as one configuration per row and gives an array
    of shape (rows, K).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    x = np.asarray(positions, dtype=float)
    if x.shape[-1] == 0:
        raise ValueError("positions must be nonempty")
    k = np.arange(1, K + 1)
    z = np.exp(1j * x[..., None] * k)
    return z.mean(axis=-2)


def energy_order_parameter(r, pot):
    """U = -1/2 sum_k |a_k| |r_k|^2."""
    r = np.asarray(r)
    if r.shape[-1] < pot.n:
        raise ValueError(f"need order parameters for modes 1..{pot.n}")
    return -0.5 * (np.abs(r[..., : pot.n]) ** 2) @ np.abs(pot.a)


def graph_interaction_energy(positions, graph, pot):
    """(1/(N^2 alpha_N)) sum_ij W_ij D(x_i - x_j), via the cosine addition formula."""
    x = np.asarray(positions, dtype=float)
    n = len(x)
    if graph.n != n:
        raise ValueError(f"{n} positions for a graph with {graph.n} vertices")
    kx = np.multiply.outer(x, pot.modes)
    c = np.cos(kx)
    s = np.sin(kx)
    W = graph.weights
    quad = np.einsum("ik,ik->k", c, W @ c) + np.einsum("ik,ik->k", s, W @ s)
    return float(-(pot.a @ quad) / (n * n * graph.alpha_n))


def aggregate_energy(series, t_tr):
    """(mean, min, max) of U over [t_tr, T], mean by the trapezoid rule.

    If t_tr falls between samples, U is linearly interpolated there and the
    interpolated value is included in the extrema.
    """
    t = series.times
    U = series.U_values
    if len(t) == 0 or not t_tr < t[-1]:
        raise ValueError(f"empty averaging window: t_tr={t_tr} >= final time")
    t_tr = max(float(t_tr), float(t[0]))
    keep = t > t_tr
    tw = np.concatenate([[t_tr], t[keep]])
    Uw = np.concatenate([[np.interp(t_tr, t, U)], U[keep]])
    mean = np.trapezoid(Uw, tw) / (tw[-1] - tw[0])
    lo, hi = float(Uw.min()), float(Uw.max())
    # guard the last ulp so mean stays inside [min, max]
    return float(min(max(mean, lo), hi)), lo, hi


def empirical_histogram(positions, bins=64):
    """Density on ``bins`` equal cells of [0, 2pi), returned with the bin centres."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    x = np.mod(np.asarray(positions, dtype=float), TWO_PI)
    idx = np.minimum((x * (bins / TWO_PI)).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    density = counts * (bins / (TWO_PI * len(x)))
    centers = (np.arange(bins) + 0.5) * (TWO_PI / bins)
    return density, centers


def count_peaks(positions, bins=32, factor=2.0):
    """Number of circular runs of bins whose density exceeds ``factor``/(2pi)."""
    density, _ = empirical_histogram(positions, bins)
    above = density > factor / TWO_PI
    if above.all():
        return 1
    if not above.any():
        return 0
    # count rising edges on the circle
    return int(np.count_nonzero(above & ~np.roll(above, 1)))


def _rolling(values, window):
    c1 = np.concatenate([[0.0], np.cumsum(values)])
    c2 = np.concatenate([[0.0], np.cumsum(values * values)])
    s1 = c1[window:] - c1[:-window]
    s2 = c2[window:] - c2[:-window]
    mean = s1 / window
    var = np.maximum(s2 / window - mean * mean, 0.0)
    return mean, np.sqrt(var)


@dataclass(frozen=True)
class Plateau:
    t_start: float
    t_end: float
    level: float
    i_start: int
    i_end: int


def find_plateaus(series, window=100, drop_threshold=0.2):
    """Maximal runs where the trailing rolling std of U is below drop_threshold/4.

    Neighbouring runs whose levels differ by less than ``drop_threshold``
    are merged, so noise spikes do not split one plateau into several.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    U = series.U_values
    if len(U) < window:
        return []
    mean, std = _rolling(U, window)
    quiet = std < drop_threshold / 4.0
    runs = []
    i = 0
    while i < len(quiet):
        if not quiet[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(quiet) and quiet[j + 1]:
            j += 1
        # rolling index r covers samples r .. r + window - 1
        runs.append([i, j + window - 1])
        i = j + 1

    plateaus = []
    for a, b in runs:
        level = float(U[a : b + 1].mean())
        if plateaus and abs(plateaus[-1][2] - level) < drop_threshold:
            pa, _, _ = plateaus[-1]
            plateaus[-1] = (pa, b, float(U[pa : b + 1].mean()))
        else:
            plateaus.append((a, b, level))
    t = series.times
    return [Plateau(float(t[a]), float(t[b]), lvl, a, b) for a, b, lvl in plateaus]


def detect_transitions(series, window=100, drop_threshold=0.2):
    """Drops of U by more than ``drop_threshold`` between consecutive plateaus.

    Returns a list of (t_start, t_end, U_before, U_after) where t_start is the
    end of the higher plateau and t_end the start of the lower one.
    """
    plats = find_plateaus(series, window, drop_threshold)
    out = []
    for p, q in zip(plats, plats[1:]):
        if p.level - q.level > drop_threshold:
            out.append((p.t_end, q.t_start, p.level, q.level))
    return out
