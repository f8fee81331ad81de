"""Command line interface: ``graphon-sips <command> --config run.toml``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import bifurcation, harness, pde, spectral
from .graphon import GraphConfigError, discretize, sample_adjacency
from .particle_sim import SimParams, dump_positions, init_state, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (
    ArithmeticError,
    spectral.ConvergenceError,
    bifurcation.BranchConvergenceError,
    bifurcation.BracketingError,
    pde.FixedPointError,
    harness.SweepError,
)


def _load(args):
    cfg = harness.parse_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    return cfg


def _emit(text, out):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_thresholds(args):
    cfg = _load(args)
    rep = bifurcation.primary_threshold(cfg.potential, cfg.graph, beta=cfg.beta)
    result = {
        "theta_c": rep.theta_c,
        "mode": rep.mode,
        "eigen_index": rep.eigen_index,
        "candidates": [
            {"m": c.m, "l": c.l, "theta": c.theta, "simple": bool(c.simple)} for c in rep.candidates
        ],
    }
    a = cfg.potential.a
    if cfg.potential.n == 2 and 0 < a[0] < a[1]:
        sec = bifurcation.secondary_threshold(cfg.potential, cfg.graph, cfg.beta, sign=+1)
        result["theta_c2"] = None if sec is None else sec.theta_c2
    if args.format == "json":
        text = json.dumps(result, indent=1) + "\n"
    else:
        text = "quantity,value\n" + f"theta_c,{rep.theta_c:.12g}\nmode,{rep.mode}\n"
        if result.get("theta_c2") is not None:
            text += f"theta_c2,{result['theta_c2']:.12g}\n"
    _emit(text, args.out)


def cmd_simulate(args):
    cfg = _load(args)
    theta = cfg.theta_values[0]
    job = harness.jobs(cfg)[0]
    gseed, nseed = job.graph_seed, job.noise_seed
    if args.dump_positions:
        graph = sample_adjacency(cfg.graph, cfg.n, seed=gseed, mode=cfg.sampling)
        params = SimParams(theta, cfg.beta, cfg.potential, graph, cfg.dt, cfg.T, cfg.record_stride)
        traj = run(params, init_state(cfg.n, seed=nseed, distribution=cfg.init), nseed)
        dump_positions(traj, args.dump_positions)
    res = harness.simulate_one(cfg, theta, gseed, nseed)
    if args.out:
        res.series.to_csv(args.out)
    print(json.dumps(harness.asdict(res.row)))


def cmd_sweep(args):
    cfg = _load(args)
    rows, summary = harness.run_sweep(cfg)
    harness.export(rows, args.out or cfg.output_path or "-", args.format)
    for s in summary:
        logging.info("theta/theta_c=%.4g  U=%.6g  [%.6g, %.6g]",
                     s.theta_over_theta_c, s.U_mean, s.U_min, s.U_max)


def _pde_setup(cfg):
    p = cfg.pde
    m = int(p.get("m", 64))
    M = int(p.get("M", 16))
    if "theta" in p:
        theta = float(p["theta"])
    else:
        theta = float(p.get("theta_over_theta_c", 1.5)) * cfg.theta_c
    init = pde.MeanFieldState.perturbed(
        m, M, mode=int(p.get("init_mode", 1)), eps=float(p.get("init_eps", 0.05))
    )
    return p, theta, init, int(p.get("symmetry", 1))


def cmd_pde_evolve(args):
    cfg = _load(args)
    p, theta, init, sym = _pde_setup(cfg)
    traj = pde.evolve(init, theta, cfg.beta, cfg.potential, cfg.graph,
                      T=float(p.get("T", 100.0)), dt_pde=float(p.get("dt", 0.01)), symmetry=sym)
    if args.out:
        traj.to_csv(args.out)
    if args.dump_positions:
        traj.final.to_csv(args.dump_positions)
    print(json.dumps({"theta": theta, "t": traj.times[-1], "F": traj.F[-1],
                      "entropy_floor_hits": traj.clamped}))


def cmd_pde_stationary(args):
    cfg = _load(args)
    p, theta, init, sym = _pde_setup(cfg)
    st = pde.stationary_fixed_point(theta, cfg.beta, cfg.potential, cfg.graph, init,
                                    damping=float(p.get("damping", 0.5)), symmetry=sym)
    if args.out:
        st.to_csv(args.out)
    F = pde.free_energy(st, theta, cfg.beta, cfg.potential, cfg.graph)
    K = discretize(cfg.graph, st.m) / st.m
    R = {f"R{k}_mean": float(np.mean(K @ st.m_k(k))) for k in cfg.potential.modes}
    print(json.dumps({"theta": theta, "F": F, **R}))


def cmd_spectrum(args):
    cfg = _load(args)
    m = int(cfg.pde.get("spectrum_grid", 512))
    spec = spectral.graphon_spectrum(cfg.graph, m=m, k=args.k)
    if args.out:
        spec.to_csv(args.out)
    else:
        sys.stdout.write("index,eigenvalue\n")
        for i, lam in enumerate(spec.eigenvalues, start=1):
            sys.stdout.write(f"{i},{lam:.12g}\n")


COMMANDS = {
    "thresholds": cmd_thresholds,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "pde-evolve": cmd_pde_evolve,
    "pde-stationary": cmd_pde_stationary,
    "spectrum": cmd_spectrum,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="graphon-sips", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML configuration file")
        sp.add_argument("--seed", type=int, default=None, help="override sweep.base_seed")
        sp.add_argument("--out", default=None, help="output file (stdout if omitted)")
        sp.add_argument("--dump-positions", default=None,
                        help="write particle snapshots (.csv or .npz) or the PDE state")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "spectrum":
            sp.add_argument("-k", type=int, default=5, help="number of eigenpairs")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (harness.ConfigError, GraphConfigError, bifurcation.ThresholdError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
