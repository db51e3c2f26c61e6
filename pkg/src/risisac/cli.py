"""Command line entry point: ``risisac {crb,sense,rate,optimize,frame,sweep}``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness as hx
from . import optimize as opt
from . import sensing as sen
from . import sp_link as spl
from .config import load_config


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, default=0, help="run seed (unsigned 64-bit)")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    p.add_argument("--trials", type=int, default=None, help="trials / MC blocks / random samples")
    p.add_argument("--full", action="store_true", help="full-fidelity grids and trial counts")


def _cmd_crb(args, cfg):
    sc = cfg.scene(np.random.default_rng([args.seed, 0]), sensing=True)
    setup = sen.make_sensing_setup(sc, seed=cfg.sense_seed, physical_noise=cfg.physical_noise)
    rows = []
    for k in range(sc.n_ue):
        res = sen.crb(sc, setup, k)
        for name in ("crb_pos", "crb_phi", "crb_theta"):
            rows.append(hx.Row("crb", "", None, str(k), name, getattr(res, name)))
    return rows


def _cmd_sense(args, cfg):
    sc = cfg.scene(np.random.default_rng([args.seed, 0]), sensing=True)
    setup = sen.make_sensing_setup(sc, seed=cfg.sense_seed, physical_noise=cfg.physical_noise)
    dictionary = sen.ifft_dictionary(sc, setup, cfg.m_f)
    weighted = sen.weighted_phases(sc, setup)
    trials = args.trials or 100
    rows = []
    for k in range(sc.n_ue):
        rng = np.random.default_rng([args.seed, 1, k])
        err = []
        for _ in range(trials):
            y = sen.simulate_sensing(sc, setup, k, rng)
            try:
                e = sen.estimate(y, sc, setup, k, dictionary, weighted)
            except ValueError:
                continue
            err.append(np.sum((e.position[:2] - sc.ue_positions[k, :2]) ** 2))
        rows.append(hx.Row("sense", "", None, str(k), "rmse_pos", np.sqrt(np.mean(err)) if err else np.nan))
        rows.append(hx.Row("sense", "", None, str(k), "failures", trials - len(err)))
        rows.append(hx.Row("sense", "", None, str(k), "crb_pos", sen.crb(sc, setup, k).crb_pos))
    return rows


def _cmd_rate(args, cfg):
    sc = cfg.scene(np.random.default_rng([args.seed, 0]))
    sp = spl.SpConfig.from_scene(sc, cfg.eta, cfg.kappa_vector(sc.n_ue))
    phases = np.exp(1j * np.random.default_rng([args.seed, 1]).uniform(0, 2 * np.pi, sc.m_r))
    rep = spl.closed_form_rate(sc, phases, sp)
    blocks = args.trials or cfg.mc_blocks
    mc = spl.empirical_rate(sc, phases, sp, blocks, np.random.default_rng([args.seed, 2]))
    rp = spl.empirical_rate_rp(sc, phases, sp, blocks, np.random.default_rng([args.seed, 3]))
    rows = []
    for k in range(sc.n_ue):
        rows += [hx.Row("rate", "", None, str(k), "rate_closed_form", rep.rate[k]),
                 hx.Row("rate", "", None, str(k), "rate_mc", mc.rate[k], mc.rate_se[k]),
                 hx.Row("rate", "", None, str(k), "rate_mc_rp", rp.rate[k], rp.rate_se[k])]
    rows.append(hx.Row("rate", "", None, "all", "sum_rate_closed_form", rep.sum_rate))
    return rows


def _cmd_optimize(args, cfg):
    sc = cfg.scene(np.random.default_rng([args.seed, 0]))
    sp = spl.SpConfig.from_scene(sc, cfg.eta, cfg.kappa_vector(sc.n_ue))
    fit = spl.make_fitness(sc, sp)
    ga = opt.ga_optimize(sc, sp, params=opt.GaParams(seed=args.seed), fitness=fit)
    sa = opt.sa_optimize(sc, sp, params=opt.SaParams(seed=args.seed), fitness=fit)
    rb = opt.random_baseline(sc, sp, n_samples=args.trials or 1000, rng=np.random.default_rng([args.seed, 1]),
                             fitness=fit)
    rows = [hx.Row("optimize", "", None, "all", "sum_rate_ga", ga.fitness),
            hx.Row("optimize", "", None, "all", "sum_rate_sa", sa.fitness),
            hx.Row("optimize", "", None, "all", "sum_rate_random_mean", rb.mean, rb.stderr),
            hx.Row("optimize", "", None, "all", "sum_rate_random_max", rb.max)]
    rows += [hx.Row("optimize", "generation", g, "all", "ga_best", v) for g, v in enumerate(ga.trace)]
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="risisac", description="RIS-aided sensing and SP uplink simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("crb", "position CRB for the configured UEs"),
                           ("sense", "IFFT position estimates vs CRB"),
                           ("rate", "closed-form and Monte Carlo uplink rates"),
                           ("optimize", "GA / SA / random RIS phases"),
                           ("frame", "frame-protocol simulation with mobility"),
                           ("sweep", "run one of the reference experiments")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name == "sweep":
            p.add_argument("--experiment", required=True, choices=hx.EXPERIMENTS)
    args = parser.parse_args(argv)
    if args.seed < 0 or args.seed >= 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        cfg = load_config(args.config)
    except (OSError, KeyError, ValueError) as err:
        parser.error(f"bad config: {err}")

    if args.command in ("sweep", "frame"):
        exp = args.experiment if args.command == "sweep" else "frame-sim"
        grid = None if args.command == "sweep" else (cfg.n_intervals,)
        spec = hx.ExperimentSpec(exp, grid=grid, trials=args.trials, seed=args.seed, out=args.out,
                                 config=cfg, full=args.full)
        hx.run_experiment(spec)
        return 0

    handlers = {"crb": _cmd_crb, "sense": _cmd_sense, "rate": _cmd_rate, "optimize": _cmd_optimize}
    rows = handlers[args.command](args, cfg)
    extra = {} if args.trials is None else {"trials": args.trials}
    hx.write_outputs(rows, args.out, hx.manifest_text(args.command, args.seed, cfg, extra))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
