"""Phase-diagram sweeps over theta, graph realisations and noise realisations."""

import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import observables as obs
from .bifurcation import ThresholdError, primary_threshold
from .graphon import GraphConfigError, make_graphon, sample_adjacency
from .particle_sim import SimParams, init_state, run
from .potential import MultichromaticPotential

log = logging.getLogger(__name__)

CSV_HEADER = (
    "theta,theta_over_theta_c,graph_seed,noise_seed,U_mean,U_min,U_max,"
    "E_graph_mean,transition_count,final_peak_count"
)


class ConfigError(ValueError):
    """Invalid or unparsable sweep configuration."""


class SweepError(RuntimeError):
    """A single run failed; the message carries its (theta, seeds) coordinates."""


@dataclass(frozen=True)
class AnalysisConfig:
    window: int = 100
    drop_threshold: float = 0.2
    peak_bins: int = 32


@dataclass
class SweepConfig:
    theta_values: list
    graph: object
    potential: MultichromaticPotential
    n: int = 1000
    beta: float = 200.0
    dt: float = 0.01
    T: float = 1000.0
    t_tr: float = None
    record_stride: int = 10
    n_graph: int = 5
    n_noise: int = 3
    base_seed: int = 0
    sampling: str = "bernoulli"
    init: str = "uniform"
    workers: int = 1
    output_path: str = None
    graph_base_seed: int = None
    theta_c: float = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    pde: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t_tr is None:
            self.t_tr = 0.9 * self.T
        if self.theta_c is None:
            self.theta_c = _theta_c(self.potential, self.graph, self.beta)
        self.validate()

    def validate(self):
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        if not self.theta_values:
            bad("theta", "grid is empty")
        if any(not (math.isfinite(t) and t > 0) for t in self.theta_values):
            bad("theta", "values must be positive and finite")
        if self.n_graph < 1:
            bad("n_graph", "must be >= 1")
        if self.n_noise < 1:
            bad("n_noise", "must be >= 1")
        if self.n < 2:
            bad("N", "need at least two particles")
        if not self.dt > 0:
            bad("dt", f"must be positive, got {self.dt}")
        if not self.T >= self.dt:
            bad("T", f"horizon {self.T} shorter than dt")
        if not 0 <= self.t_tr < self.T:
            bad("t_tr", f"must lie in [0, T), got {self.t_tr}")
        if not self.beta > 0:
            bad("beta", "must be positive")
        if self.record_stride < 1:
            bad("record_stride", "must be >= 1")
        if self.workers < 1:
            bad("workers", "must be >= 1")
        if self.analysis.window < 2:
            bad("analysis.window", "must be >= 2")


@dataclass(frozen=True)
class PhaseDiagramRow:
    theta: float
    theta_over_theta_c: float
    graph_seed: int
    noise_seed: int
    U_mean: float
    U_min: float
    U_max: float
    E_graph_mean: float
    transition_count: int
    final_peak_count: int


@dataclass(frozen=True)
class EnsembleSummary:
    theta: float
    theta_over_theta_c: float
    U_mean: float
    U_min: float
    U_max: float
    E_graph_mean: float
    runs: int


# --- config -----------------------------------------------------------------


def _theta_c(pot, graph, beta):
    try:
        return float(primary_threshold(pot, graph, beta=beta).theta_c)
    except ThresholdError:
        # H-stable potential: no bifurcation, ratios are undefined
        return math.nan


_GRAPH_KEYS = {"family", "p", "h", "gamma", "alpha", "N", "n", "sampling", "mode", "seed"}


def _get(section, key, default, kind, where):
    val = section.get(key, default)
    if val is None:
        return None
    try:
        if kind is int and isinstance(val, float) and not val.is_integer():
            raise ValueError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {val!r}") from None


def config_from_dict(doc):
    """Build a validated SweepConfig from a parsed TOML document."""
    try:
        g = doc["graph"]
    except KeyError:
        raise ConfigError("missing [graph] section") from None
    unknown = set(g) - _GRAPH_KEYS
    if unknown:
        raise ConfigError(f"graph: unknown keys {sorted(unknown)}")
    if "family" not in g:
        raise ConfigError("graph.family: required")
    params = {k: g[k] for k in ("p", "h", "gamma", "alpha") if k in g}
    try:
        graph = make_graphon(str(g["family"]), **params)
    except GraphConfigError as exc:
        raise ConfigError(f"graph: {exc}") from None

    pot_sec = doc.get("potential", {})
    coeffs = pot_sec.get("coefficients", pot_sec.get("a"))
    if coeffs is None:
        raise ConfigError("potential.a: required")
    try:
        pot = MultichromaticPotential(tuple(float(c) for c in coeffs))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"potential.coefficients: {exc}") from None

    sim = doc.get("simulation", {})
    if "beta" in sim and "sigma" in sim:
        raise ConfigError("simulation: give either beta or sigma, not both")
    if "sigma" in sim:
        sigma = _get(sim, "sigma", None, float, "simulation")
        if not sigma > 0:
            raise ConfigError("simulation.sigma: must be positive")
        beta = 2.0 / sigma**2
    else:
        beta = _get(sim, "beta", 200.0, float, "simulation")
    if not beta > 0:
        raise ConfigError("simulation.beta: must be positive")
    T = _get(sim, "T", 1000.0, float, "simulation")
    n = _get(g, "N", g.get("n", 1000), int, "graph")

    sweep = doc.get("sweep", {})
    if "theta" in sweep and "theta_over_theta_c" in sweep:
        raise ConfigError("sweep: give either theta or theta_over_theta_c, not both")
    theta_c = _theta_c(pot, graph, beta)
    if "theta" in sweep:
        thetas = [float(t) for t in np.atleast_1d(sweep["theta"])]
    else:
        if not math.isfinite(theta_c):
            raise ConfigError("sweep.theta_over_theta_c: potential has no critical threshold")
        ratios = sweep.get("theta_over_theta_c", [0.5, 1.0, 1.5, 2.0])
        thetas = [float(r) * float(theta_c) for r in np.atleast_1d(ratios)]

    an = doc.get("analysis", {})
    analysis = AnalysisConfig(
        window=_get(an, "window", 100, int, "analysis"),
        drop_threshold=_get(an, "drop_threshold", 0.2, float, "analysis"),
        peak_bins=_get(an, "peak_bins", 32, int, "analysis"),
    )
    return SweepConfig(
        theta_values=thetas,
        graph=graph,
        potential=pot,
        n=n,
        beta=beta,
        dt=_get(sim, "dt", 0.01, float, "simulation"),
        T=T,
        t_tr=_get(sim, "t_tr", None, float, "simulation"),
        record_stride=_get(sim, "record_stride", 10, int, "simulation"),
        init=str(sim.get("init", "uniform")),
        sampling=str(g.get("mode", g.get("sampling", "bernoulli"))),
        graph_base_seed=_get(g, "seed", None, int, "graph"),
        n_graph=_get(sweep, "n_graph", 5, int, "sweep"),
        n_noise=_get(sweep, "n_noise", 3, int, "sweep"),
        base_seed=_get(sweep, "base_seed", 0, int, "sweep"),
        workers=_get(sweep, "workers", 1, int, "sweep"),
        output_path=sweep.get("output"),
        theta_c=theta_c,
        analysis=analysis,
        pde=dict(doc.get("pde", {})),
    )


def parse_config(path):
    """Read a TOML sweep configuration; defaults follow the reference protocol."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return config_from_dict(doc)


# --- seeds ------------------------------------------------------------------


def derive_seed(base_seed, *coords):
    """63-bit seed hashed from (base_seed, coords) through SeedSequence."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(c) for c in coords))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def graph_seed(base_seed, g_index):
    # shared by every theta so the phase diagram compares like with like
    return derive_seed(base_seed, 0, g_index)


def noise_seed(base_seed, t_index, g_index, n_index):
    return derive_seed(base_seed, 1, t_index, g_index, n_index)


# --- runs -------------------------------------------------------------------


@dataclass(frozen=True)
class Job:
    t_index: int
    theta: float
    theta_c: float
    graph_seed: int
    noise_seed: int
    cfg: SweepConfig


class _Recorder:
    def __init__(self, pot, graph, bins):
        self.pot = pot
        self.graph = graph
        self.bins = bins
        self.t, self.U, self.E, self.r, self.peaks = [], [], [], [], []

    def __call__(self, t, x):
        r = np.abs(obs.order_parameters(x, self.pot.n))
        self.t.append(t)
        self.U.append(-0.5 * float((r * r) @ np.abs(self.pot.a)))
        self.E.append(obs.graph_interaction_energy(x, self.graph, self.pot))
        self.r.append(r)
        self.peaks.append(obs.count_peaks(x, self.bins))

    def series(self):
        return obs.EnergySeries(self.t, self.U, self.E, np.array(self.r))


@dataclass
class RunResult:
    row: PhaseDiagramRow
    series: obs.EnergySeries
    peak_counts: np.ndarray
    final_positions: np.ndarray


def simulate_one(cfg, theta, g_seed, n_seed, theta_c=None):
    """One trajectory with streamed observables."""
    graph = sample_adjacency(cfg.graph, cfg.n, seed=g_seed, mode=cfg.sampling)
    params = SimParams(
        theta=theta, beta=cfg.beta, potential=cfg.potential, graph=graph,
        dt=cfg.dt, T=cfg.T, record_stride=cfg.record_stride,
    )
    state = init_state(cfg.n, seed=n_seed, distribution=cfg.init)
    rec = _Recorder(cfg.potential, graph, cfg.analysis.peak_bins)
    traj = run(params, state, n_seed, observer=rec)
    series = rec.series()
    U_mean, U_min, U_max = obs.aggregate_energy(series, cfg.t_tr)
    Eser = obs.EnergySeries(series.times, series.E_graph_values)
    E_mean = obs.aggregate_energy(Eser, cfg.t_tr)[0]
    a = cfg.analysis
    trans = obs.detect_transitions(series, a.window, a.drop_threshold)
    tc = cfg.theta_c if theta_c is None else theta_c
    row = PhaseDiagramRow(
        theta=float(theta),
        theta_over_theta_c=float(theta / tc),
        graph_seed=int(g_seed),
        noise_seed=int(n_seed),
        U_mean=U_mean,
        U_min=U_min,
        U_max=U_max,
        E_graph_mean=float(E_mean),
        transition_count=len(trans),
        final_peak_count=int(rec.peaks[-1]),
    )
    return RunResult(row, series, np.array(rec.peaks), traj.final.positions)


def _run_job(job):
    try:
        return simulate_one(job.cfg, job.theta, job.graph_seed, job.noise_seed, job.theta_c).row
    except Exception as exc:
        raise SweepError(
            f"run failed at theta={job.theta:.6g} (index {job.t_index}), graph_seed="
            f"{job.graph_seed}, noise_seed={job.noise_seed}: {type(exc).__name__}: {exc}"
        ) from exc


def jobs(cfg):
    """Immutable job descriptors in theta-major, graph, noise order."""
    out = []
    for ti, theta in enumerate(cfg.theta_values):
        for gi in range(cfg.n_graph):
            for ni in range(cfg.n_noise):
                gbase = cfg.base_seed if cfg.graph_base_seed is None else cfg.graph_base_seed
                out.append(Job(ti, theta, cfg.theta_c, graph_seed(gbase, gi),
                               noise_seed(cfg.base_seed, ti, gi, ni), cfg))
    return out


def summarize(rows):
    """Arithmetic ensemble means per theta, in first-appearance order."""
    groups = {}
    for r in rows:
        groups.setdefault(r.theta, []).append(r)
    out = []
    for theta, grp in groups.items():
        out.append(EnsembleSummary(
            theta=theta,
            theta_over_theta_c=grp[0].theta_over_theta_c,
            U_mean=float(np.mean([r.U_mean for r in grp])),
            U_min=float(np.mean([r.U_min for r in grp])),
            U_max=float(np.mean([r.U_max for r in grp])),
            E_graph_mean=float(np.mean([r.E_graph_mean for r in grp])),
            runs=len(grp),
        ))
    return out


def run_sweep(cfg, workers=None):
    """All rows (theta-major, then graph seed, then noise seed) and per-theta means.

    Workers receive immutable job descriptors; results come back in
    submission order, so the output does not depend on scheduling.
    """
    workers = cfg.workers if workers is None else workers
    todo = jobs(cfg)
    if workers <= 1 or len(todo) == 1:
        rows = [_run_job(j) for j in todo]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1, len(todo))) as ex:
            rows = list(ex.map(_run_job, todo))
    return rows, summarize(rows)


def disorder_baseline(pot, n):
    """-U of an incoherent state: |r_k|^2 ~ 1/N gives (1/(2N)) sum |a_k|."""
    return float(np.sum(np.abs(pot.a))) / (2.0 * n)


def detect_onset(summary, baseline, factor=5.0):
    """First theta whose ensemble -U_mean exceeds ``factor`` * baseline (None if never)."""
    for s in sorted(summary, key=lambda s: s.theta):
        if -s.U_mean > factor * baseline:
            return s.theta
    return None


# --- export -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def export(rows, path, format="csv"):
    """Write rows as CSV (fixed header, 12 significant digits) or JSON; ``-`` is stdout."""
    names = [f.name for f in fields(PhaseDiagramRow)]
    if format == "csv":
        lines = [CSV_HEADER] + [",".join(_fmt(getattr(r, n)) for n in names) for r in rows]
        text = "\n".join(lines) + "\n"
    elif format == "json":
        recs = [{n: float(_fmt(getattr(r, n))) if n not in _INT_FIELDS else int(getattr(r, n))
                 for n in names} for r in rows]
        text = json.dumps(recs, indent=1) + "\n"
    else:
        raise ValueError(f"unknown export format {format!r}")
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


_INT_FIELDS = {"graph_seed", "noise_seed", "transition_count", "final_peak_count"}


def load_rows(path):
    """Inverse of ``export`` for either format."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        recs = json.loads(text)
    else:
        lines = text.splitlines()
        head = lines[0].split(",")
        recs = [dict(zip(head, ln.split(","))) for ln in lines[1:] if ln]
    out = []
    for rec in recs:
        kw = {k: (int(v) if k in _INT_FIELDS else float(v)) for k, v in rec.items()}
        out.append(PhaseDiagramRow(**kw))
    return out


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
