"""Graphon families, their discretisation, and W-random graph sampling."""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class GraphConfigError(ValueError):
    """Raised for invalid graphon parameters or sampling requests."""


@dataclass(frozen=True)
class GraphonSpec:
    """Base class of the analytic graphon families."""

    family = "abstract"

    def W(self, x, y):
        raise NotImplementedError

    def alpha_n(self, n):
        """Sparse scaling factor alpha_N (1 for dense families)."""
        return 1.0

    @property
    def dense(self):
        return True


@dataclass(frozen=True)
class ErdosRenyi(GraphonSpec):
    p: float = 0.5
    family = "ER"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise GraphConfigError(f"ER probability p={self.p} outside [0, 1]")

    def W(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.full(x.shape, self.p)[()]


@dataclass(frozen=True)
class SmallWorld(GraphonSpec):
    """Ring lattice of half-width ``h`` with rewiring probability ``p``."""

    p: float = 0.4
    h: float = 0.01
    family = "SW"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise GraphConfigError(f"SW rewiring probability p={self.p} outside [0, 1]")
        if not 0.0 < self.h <= 0.5:
            raise GraphConfigError(f"SW coupling range h={self.h} outside (0, 1/2]")

    @property
    def near(self):
        return 1.0 - self.p + 2.0 * self.p * self.h

    @property
    def far(self):
        return 2.0 * self.p * self.h

    def W(self, x, y):
        d = np.abs(np.asarray(x, float) - np.asarray(y, float))
        d = np.minimum(d, 1.0 - d)
        return np.where(d <= self.h, self.near, self.far)[()]

    @classmethod
    def from_ring(cls, p, r, n):
        """SW graphon of a ring where each node has ``r`` neighbours, h = r/(2n)."""
        return cls(p=p, h=r / (2.0 * n))


@dataclass(frozen=True)
class PowerLaw(GraphonSpec):
    """W(x, y) = (x y)^(-gamma), sampled with alpha_N = N^(-alpha)."""

    gamma: float = 0.3
    alpha: float = 0.4
    family = "PL"

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5:
            raise GraphConfigError(f"PL exponent gamma={self.gamma} outside (0, 1/2)")
        if not self.gamma < self.alpha < 1.0:
            raise GraphConfigError(
                f"PL sparsity alpha={self.alpha} must satisfy gamma < alpha < 1"
            )

    def W(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if np.any(x <= 0.0) or np.any(y <= 0.0):
            raise GraphConfigError("power-law graphon is singular at x = 0 or y = 0")
        return ((x * y) ** (-self.gamma))[()]

    def alpha_n(self, n):
        return float(n) ** (-self.alpha)

    @property
    def dense(self):
        return False


def make_graphon(family, **params):
    """Build a graphon from a family tag (``ER``, ``SW`` or ``PL``)."""
    fam = family.strip().upper()
    try:
        if fam in ("ER", "ERDOSRENYI", "ERDOS-RENYI"):
            return ErdosRenyi(p=params.get("p", 0.5))
        if fam in ("SW", "SMALLWORLD", "SMALL-WORLD"):
            return SmallWorld(p=params.get("p", 0.4), h=params.get("h", 0.01))
        if fam in ("PL", "POWERLAW", "POWER-LAW"):
            return PowerLaw(gamma=params.get("gamma", 0.3), alpha=params.get("alpha", 0.4))
    except TypeError as exc:
        raise GraphConfigError(str(exc)) from None
    raise GraphConfigError(f"unknown graph family {family!r}")


def eval_W(g, x, y):
    return g.W(x, y)


def _triangle_cdf(s, center, width):
    """CDF of y - x for (x, y) uniform on a square cell of side ``width``."""
    t = (s - center) / width
    t = np.clip(t, -1.0, 1.0)
    return np.where(t <= 0.0, 0.5 * (1.0 + t) ** 2, 1.0 - 0.5 * (1.0 - t) ** 2)


def _sw_near_fraction(offset, n, h):
    """Fraction of a cell pair at index offset ``j - i`` lying within ring distance h."""
    center = offset / n
    width = 1.0 / n
    frac = np.zeros_like(center)
    for k in (-1.0, 0.0, 1.0):
        frac += _triangle_cdf(k + h, center, width) - _triangle_cdf(k - h, center, width)
    return np.clip(frac, 0.0, 1.0)


def discretize(g, n):
    """Cell-averaged weight matrix W_N[i, j] = n^2 * integral of W over cell (i, j).

    ER is constant, SW is integrated exactly through the distribution of
    y - x over a cell, and PL uses the closed-form primitive of x^(-gamma).
    The diagonal is kept: this is the quadrature matrix of the integral
    operator, not an adjacency matrix.
    """
    if n < 2:
        raise GraphConfigError("discretize needs n >= 2")
    if isinstance(g, ErdosRenyi):
        return np.full((n, n), float(g.p))
    if isinstance(g, SmallWorld):
        offsets = np.arange(-(n - 1), n, dtype=float)
        frac = _sw_near_fraction(offsets, n, g.h)
        values = g.far + (g.near - g.far) * frac
        # offsets d and -d must give bitwise equal weights
        values = 0.5 * (values + values[::-1])
        i = np.arange(n)
        return values[(i[None, :] - i[:, None]) + (n - 1)]
    if isinstance(g, PowerLaw):
        edges = np.linspace(0.0, 1.0, n + 1)
        e = 1.0 - g.gamma
        v = n * np.diff(edges**e) / e
        return np.outer(v, v)
    raise GraphConfigError(f"cannot discretize {type(g).__name__}")


@dataclass
class WeightedGraph:
    """Symmetric weighted graph on ``n`` vertices with zero diagonal."""

    n: int
    weights: np.ndarray
    alpha_n: float = 1.0
    seed: int = 0
    family: str = ""
    _csr: object = field(default=None, repr=False, compare=False)

    @property
    def density(self):
        if self.n < 2:
            return 0.0
        return np.count_nonzero(self.weights) / (self.n * (self.n - 1))

    @property
    def degrees(self):
        return self.weights.sum(axis=1)

    def csr(self):
        """(indptr, indices, data) arrays of the weight matrix."""
        if self._csr is None:
            rows, cols = np.nonzero(self.weights)
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, rows + 1, 1)
            self._csr = (
                np.cumsum(indptr).astype(np.int64),
                cols.astype(np.int64),
                self.weights[rows, cols].astype(float),
            )
        return self._csr

    def edges(self):
        """Iterate over ``(i, j, weight)`` with i < j."""
        iu, ju = np.nonzero(np.triu(self.weights, k=1))
        for i, j in zip(iu, ju):
            yield int(i), int(j), float(self.weights[i, j])


def _row_generator(seed, i):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0, int(i))))


def sample_adjacency(g, n, seed=0, mode="bernoulli"):
    """Sample a graph from graphon ``g``.

    ``deterministic_weights`` returns the cell averages themselves (dense
    families only). ``bernoulli`` keeps edge {i, j} with probability
    min(1, alpha_N W_N[i, j]), each row drawn from its own stream keyed by
    (seed, i) so the result does not depend on evaluation order.
    """
    if n < 2:
        raise GraphConfigError("sample_adjacency needs n >= 2")
    wn = discretize(g, n)
    if mode in ("deterministic_weights", "deterministic", "weights"):
        if not g.dense:
            raise GraphConfigError(
                "deterministic_weights is only defined for dense families (ER, SW)"
            )
        weights = wn.copy()
        np.fill_diagonal(weights, 0.0)
        return WeightedGraph(n=n, weights=weights, alpha_n=1.0, seed=0, family=g.family)
    if mode != "bernoulli":
        raise GraphConfigError(f"unknown sampling mode {mode!r}")

    alpha_n = g.alpha_n(n)
    n_over = int(np.count_nonzero(wn > 1.0))
    if n_over:
        log.info("%d cell averages exceed 1; Bernoulli probabilities are clipped", n_over)
    prob = np.minimum(1.0, alpha_n * wn)

    adj = np.zeros((n, n))
    for i in range(n - 1):
        u = _row_generator(seed, i).random(n - i - 1)
        adj[i, i + 1 :] = u < prob[i, i + 1 :]
    adj = adj + adj.T
    return WeightedGraph(n=n, weights=adj, alpha_n=alpha_n, seed=int(seed), family=g.family)


def small_world_rewired(n, r, p, seed=0):
    """Watts-Strogatz style ring with ``r`` neighbours per node and rewiring.

    Each node k and each of its r/2 right-hand neighbours: with probability
    p the edge is replaced by an edge from k to a uniformly chosen node not
    already linked to k. The number of edges stays n*r/2.
    """
    if r % 2 or r <= 0 or r >= n:
        raise GraphConfigError("r must be a positive even number smaller than n")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n), dtype=bool)
    for k in range(n):
        for s in range(1, r // 2 + 1):
            j = (k + s) % n
            adj[k, j] = adj[j, k] = True
    for k in range(n):
        for s in range(1, r // 2 + 1):
            j = (k + s) % n
            if not adj[k, j] or rng.random() >= p:
                continue
            free = np.flatnonzero(~adj[k])
            free = free[free != k]
            if free.size == 0:
                continue
            new = rng.choice(free)
            adj[k, j] = adj[j, k] = False
            adj[k, new] = adj[new, k] = True
    return WeightedGraph(n=n, weights=adj.astype(float), alpha_n=1.0, seed=int(seed), family="SW")


def write_edge_list(graph, path):
    """Plain-text edge list, one ``i j weight`` line per edge (0-indexed, i < j)."""
    with open(path, "w", newline="\n") as fh:
        for i, j, w in graph.edges():
            fh.write(f"{i} {j} {w:.12g}\n")


def read_edge_list(path, n, alpha_n=1.0):
    weights = np.zeros((n, n))
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            i, j, w = line.split()
            weights[int(i), int(j)] = weights[int(j), int(i)] = float(w)
    return WeightedGraph(n=n, weights=weights, alpha_n=alpha_n)
