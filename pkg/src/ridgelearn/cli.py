"""Command-line front end.

Subcommands: ``generate`` an instance file, ``search`` for directions,
``recover`` profiles along given directions, ``run`` the full pipeline,
``reduce-run`` the unbounded pipeline, and ``report`` to re-render metrics
from a run directory.  Exit codes: 0 pass, 1 threshold fail, 2 configuration
error, 3 budget error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import jsonio
from .estimators import BudgetExceededError
from .harness import (ExperimentConfig, InstanceSpec, desk_recovery_config,
                      desk_search_config, generate_instance, run_experiment)
from .model import NoiseSpec, QueryOracle, SumOfFeaturesModel
from .recovery import (MonteCarloValueBackend, QuadratureValueBackend,
                       recover_ridge)
from .reduction import ReductionConfig

EXIT_PASS = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _parser():
    p = argparse.ArgumentParser(prog="ridgelearn",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample an instance file")
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--features", type=int, required=True)
    g.add_argument("--gamma", type=float, default=0.5)
    g.add_argument("--kinds", default="sine,gaussian-bump,tanh-like")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--out", required=True)

    for name in ("search", "run", "reduce-run"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="experiment config JSON")
        s.add_argument("--model", help="instance JSON (overrides config)")
        s.add_argument("--pinned", choices=("acceptance", "branching"))
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--oracle", choices=("mc", "quadrature"),
                       default="quadrature")
        s.add_argument("--out")
        s.add_argument("--threads", type=int, default=1)

    r = sub.add_parser("recover", help="recover profiles along directions")
    r.add_argument("--model", required=True)
    r.add_argument("--directions", required=True,
                   help="JSON list of unit vectors")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--oracle", choices=("mc", "quadrature"),
                   default="quadrature")
    r.add_argument("--out", required=True)

    q = sub.add_parser("report", help="re-render metrics from a run dir")
    q.add_argument("run_dir")
    return p


def _load_config(args, reduction=False):
    if args.config:
        cfg = ExperimentConfig.from_dict(jsonio.load_path(args.config))
    else:
        cfg = ExperimentConfig(seed=args.seed)
    if args.model:
        cfg.model_doc = jsonio.load_path(args.model)
        if "noise" in cfg.model_doc:
            cfg.noise = NoiseSpec.from_dict(cfg.model_doc["noise"])
    if getattr(args, "pinned", None):
        cfg.pinned_instance = args.pinned
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.oracle_backend = {"mc": "mc", "quadrature": "quadrature"}[args.oracle]
    cfg.threads = args.threads
    if args.out:
        cfg.out_dir = args.out
    if reduction and cfg.reduction is None:
        eps = max(cfg.noise.eps, 1e-12)
        cfg.reduction = ReductionConfig(eta=0.05, m_g=20000,
                                        alpha=max(eps ** 0.5, 1e-4),
                                        seed=cfg.seed)
    return cfg


def _cmd_generate(args):
    spec = InstanceSpec(dim=args.dim, n_features=args.features,
                        gamma=args.gamma,
                        kinds=tuple(args.kinds.split(",")))
    model = generate_instance(spec, np.random.default_rng(args.seed))
    noise = NoiseSpec("uniform-bounded" if args.eps > 0 else "none",
                      args.eps, args.seed)
    jsonio.dump_path(model.to_dict(noise=noise), args.out)
    print(f"wrote {args.out}: dim={model.dim} n={model.n_features} "
          f"gamma={model.gamma:.4f}")
    return EXIT_PASS


def _cmd_run(args, reduction=False):
    cfg = _load_config(args, reduction=reduction)
    report = run_experiment(cfg, out_dir=cfg.out_dir)
    print(jsonio.dumps(report.to_dict()))
    if report.failure_stage and report.failure_stage.startswith("budget"):
        return EXIT_BUDGET
    return EXIT_PASS if report.passed else EXIT_THRESHOLD


def _cmd_search(args):
    cfg = _load_config(args)
    rng = np.random.default_rng(cfg.seed)
    model = cfg.resolve_model(rng)
    from .backends import MonteCarloMassBackend, QuadratureMassBackend
    from .search import find_directions
    scfg = cfg.search or desk_search_config(model, cfg.oracle_backend)
    if cfg.oracle_backend == "quadrature":
        backend = QuadratureMassBackend(model, scfg.ell1, scfg.tau)
    else:
        oracle = QueryOracle(model, cfg.noise)
        backend = MonteCarloMassBackend(oracle, scfg.ell1, scfg.tau, 0.02,
                                        seed=cfg.seed * 1009 + 7,
                                        m_override=cfg.mc_scan_samples)
    found, stats = find_directions(backend, scfg, model.dim, rng,
                                   truth=model.directions())
    doc = {"directions": [c.u.tolist() for c in found],
           "scores": [c.mass_score for c in found],
           "cells_scanned": stats.cells_scanned,
           "oracle_calls": stats.oracle_calls}
    if args.out:
        jsonio.dump_path(doc, args.out)
    print(jsonio.dumps(doc))
    return EXIT_PASS


def _cmd_recover(args):
    doc = jsonio.load_path(args.model)
    model = SumOfFeaturesModel.from_dict(doc)
    noise = NoiseSpec.from_dict(doc["noise"]) if "noise" in doc \
        else NoiseSpec()
    dirs = [np.asarray(u, dtype=float)
            for u in jsonio.load_path(args.directions)]
    rcfg = desk_recovery_config(args.oracle)
    if args.oracle == "quadrature":
        vb = QuadratureValueBackend(model, rcfg.ell2,
                                    t_range=rcfg.t_max + 2.0)
    else:
        vb = MonteCarloValueBackend(QueryOracle(model, noise), rcfg.ell2,
                                    rcfg.tau, 0.05, seed=args.seed,
                                    m_override=230000)
    os.makedirs(args.out, exist_ok=True)
    for i, u in enumerate(dirs):
        ridge = recover_ridge(vb, u, rcfg)
        jsonio.dump_path(ridge.to_dict(),
                         os.path.join(args.out, f"ridge_{i:03d}.json"))
    print(f"wrote {len(dirs)} profiles to {args.out}")
    return EXIT_PASS


def _cmd_report(args):
    path = os.path.join(args.run_dir, "report.json")
    doc = jsonio.load_path(path)
    doc.pop("timings", None)
    print(jsonio.dumps(doc))
    return EXIT_PASS if doc.get("passed") else EXIT_THRESHOLD


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "search":
            return _cmd_search(args)
        if args.command == "recover":
            return _cmd_recover(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "reduce-run":
            return _cmd_run(args, reduction=True)
        if args.command == "report":
            return _cmd_report(args)
    except BudgetExceededError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
