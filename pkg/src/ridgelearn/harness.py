"""Experiment orchestration: instance generation, pipeline execution,
metrics, persistence, and named desk-scale presets."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import jsonio
from .backends import MonteCarloMassBackend, QuadratureMassBackend
from .estimators import BudgetExceededError
from .model import (Activation, NoiseSpec, QueryOracle, SumOfFeaturesModel,
                    min_pairwise_sine, validate_assumptions)
from .recovery import (AssembledModel, MonteCarloValueBackend,
                       QuadratureValueBackend, RecoveryConfig, assemble_model,
                       recover_ridge, refine_direction)
from .reduction import ReductionConfig, recover_unbounded
from .search import SearchConfig, find_directions

__all__ = [
    "InstanceSpec",
    "generate_instance",
    "MatchReport",
    "direction_error",
    "sup_error_estimate",
    "ExperimentConfig",
    "RunReport",
    "run_experiment",
    "acceptance_instance",
    "branching_instance",
    "desk_search_config",
    "desk_recovery_config",
]


# ---------------------------------------------------------------------------
# Instance generation
# ---------------------------------------------------------------------------

_DEFAULT_KINDS = ("sine", "gaussian-bump", "tanh-like", "cosine-bump")


@dataclass(frozen=True)
class InstanceSpec:
    dim: int
    n_features: int
    gamma: float
    kinds: tuple = _DEFAULT_KINDS
    coeff_lo: float = 0.1
    coeff_hi: float = 1.0

    def to_dict(self):
        return {"dim": self.dim, "n_features": self.n_features,
                "gamma": self.gamma, "kinds": list(self.kinds),
                "coeff_lo": self.coeff_lo, "coeff_hi": self.coeff_hi}

    @staticmethod
    def from_dict(doc):
        return InstanceSpec(doc["dim"], doc["n_features"], doc["gamma"],
                            tuple(doc.get("kinds", _DEFAULT_KINDS)),
                            doc.get("coeff_lo", 0.1),
                            doc.get("coeff_hi", 1.0))


def _default_activation(kind, rng):
    if kind == "sine":
        return Activation.sine(float(rng.uniform(0.8, 1.8)))
    if kind == "gaussian-bump":
        return Activation.gaussian_bump(float(rng.uniform(0.7, 1.4)))
    if kind == "tanh-like":
        return Activation.tanh_like(float(rng.uniform(0.8, 1.6)))
    if kind == "cosine-bump":
        return Activation.cosine_bump(float(rng.uniform(0.8, 1.6)))
    if kind == "relu-like":
        return Activation.relu_hinge(float(rng.uniform(-0.5, 0.5)))
    if kind == "absolute-value":
        return Activation.absolute_value()
    raise ValueError(f"no default parameters for activation kind {kind!r}")


def generate_instance(spec, rng, max_tries=10**5):
    """Rejection-sample unit directions until every pair has sine of angle at
    least the target, draw coefficients away from zero, assign activations
    cycling through the requested kinds."""
    if spec.n_features < 0 or spec.dim < 1:
        raise ValueError("need n >= 0 and dim >= 1")
    dirs = []
    tries = 0
    while len(dirs) < spec.n_features:
        if tries >= max_tries:
            raise RuntimeError(
                f"direction separation gamma={spec.gamma} infeasible: gave "
                f"up after {max_tries} samples")
        tries += 1
        v = rng.standard_normal(spec.dim)
        v /= np.linalg.norm(v)
        if all(min_pairwise_sine([v, w]) >= spec.gamma for w in dirs):
            dirs.append(v)
    feats = []
    for i, v in enumerate(dirs):
        mag = float(rng.uniform(spec.coeff_lo, spec.coeff_hi))
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        act = _default_activation(spec.kinds[i % len(spec.kinds)], rng)
        feats.append((sign * mag, v, act))
    model = SumOfFeaturesModel(spec.dim, feats, gamma=spec.gamma)
    report = validate_assumptions(model)
    if not report.passed:
        raise RuntimeError(f"generated instance fails validation:\n{report}")
    return model


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class MatchReport:
    pairs: list            # (recovered index, truth index, cost)
    missed: list           # truth indices with no match
    extraneous: list       # recovered indices with no match
    max_cost: float

    def to_dict(self):
        return {"pairs": [[int(i), int(j), float(c)] for i, j, c in self.pairs],
                "missed": [int(i) for i in self.missed],
                "extraneous": [int(i) for i in self.extraneous],
                "max_cost": self.max_cost}


def direction_error(recovered, truth):
    """Greedy minimum-cost matching under the sign-identified distance
    min(|u - v|, |u + v|): repeatedly bind the globally cheapest unmatched
    pair.  At genuine angular separation the matching is unambiguous."""
    rec = [np.asarray(u, dtype=float) for u in recovered]
    tru = [np.asarray(v, dtype=float) for v in truth]
    costs = np.array([[min(np.linalg.norm(u - v), np.linalg.norm(u + v))
                       for v in tru] for u in rec]) if rec and tru else \
        np.zeros((len(rec), len(tru)))
    pairs = []
    free_r = set(range(len(rec)))
    free_t = set(range(len(tru)))
    while free_r and free_t:
        best = None
        for i in free_r:
            for j in free_t:
                if best is None or costs[i, j] < best[2]:
                    best = (i, j, float(costs[i, j]))
        pairs.append(best)
        free_r.discard(best[0])
        free_t.discard(best[1])
    max_cost = max((c for _, _, c in pairs), default=0.0)
    return MatchReport(pairs=pairs, missed=sorted(free_t),
                       extraneous=sorted(free_r), max_cost=max_cost)


def sup_error_estimate(f, g, radius, n_points, rng):
    """Max of |f - g| over uniform samples of the radius ball (a lower bound
    on the true sup; reported as such)."""
    if n_points < 1:
        raise ValueError("need at least one sample")
    d = None
    for probe in (getattr(f, "dim", None), getattr(g, "dim", None)):
        if probe is not None:
            d = probe
            break
    if d is None:
        raise ValueError("cannot infer the ambient dimension")
    X = rng.standard_normal((n_points, d))
    X *= (radius * rng.uniform(size=n_points) ** (1.0 / d)
          / np.linalg.norm(X, axis=1))[:, None]
    fv = _eval_many(f, X)
    gv = _eval_many(g, X)
    return float(np.max(np.abs(fv - gv)))


def _eval_many(fn, X):
    if isinstance(fn, SumOfFeaturesModel):
        return fn.evaluate_many(X)
    out = fn(X)
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# Pinned desk-scale instances and presets
# ---------------------------------------------------------------------------

_PHI = (1 + math.sqrt(5)) / 2


def _icosahedral_axes(count, seed=20240817):
    raw = np.array([(1, _PHI, 0), (1, -_PHI, 0), (0, 1, _PHI), (0, 1, -_PHI),
                    (_PHI, 0, 1), (-_PHI, 0, 1)], dtype=float)[:count]
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    return raw @ q.T


def acceptance_instance():
    """The pinned overcomplete d=3, n=5 instance: three oscillatory features
    plus a low-amplitude bump and saturator, directions on five icosahedral
    axes (pairwise sine 0.894)."""
    dirs = _icosahedral_axes(5)
    feats = [
        (0.95, dirs[0], Activation.sine(1.5)),
        (-0.85, dirs[1], Activation.sine(1.5)),
        (0.80, dirs[2], Activation.sine(1.5)),
        (0.12, dirs[3], Activation.gaussian_bump(1.0)),
        (-0.10, dirs[4], Activation.tanh_like(1.0)),
    ]
    return SumOfFeaturesModel(3, feats)


def branching_instance():
    """d=3, n=4 mixed instance for instrumented branching runs."""
    dirs = _icosahedral_axes(4, seed=771)
    feats = [
        (0.9, dirs[0], Activation.sine(1.5)),
        (-0.8, dirs[1], Activation.sine(1.2)),
        (0.6, dirs[2], Activation.gaussian_bump(1.0)),
        (0.5, dirs[3], Activation.tanh_like(1.2)),
    ]
    return SumOfFeaturesModel(3, feats)


def linear_plus_cosine_activation():
    """z + cos(z) - 1: 2-Lipschitz, vanishes at 0, unbounded; its derivative
    1 - sin(z) is in the trig family, so smoothed-derivative reference
    models stay closed form."""
    return Activation.from_callable(
        lambda z: z + np.cos(z) - 1.0, lipschitz=2.0, bounded=False,
        name="linear-plus-cosine",
        derivative_profile=[("const", 0.0, 1.0), ("sin", 1.0, -1.0)])


def reduction_instance():
    """d=3 pair for the unbounded pipeline: one unbounded 2-Lipschitz
    feature plus one bounded oscillatory feature."""
    dirs = _icosahedral_axes(2, seed=5115)
    feats = [
        (0.9, dirs[0], linear_plus_cosine_activation()),
        (-0.8, dirs[1], Activation.sine(1.0)),
    ]
    return SumOfFeaturesModel(3, feats)


def linear_instance(slope_vec):
    """Purely linear target c . x as a single unbounded ridge feature."""
    w = np.asarray(slope_vec, dtype=float)
    c = float(np.linalg.norm(w))
    ident = Activation.piecewise_linear([(-1.0, -c), (1.0, c)])
    return SumOfFeaturesModel(w.size, [(1.0, w / c, ident)])


def reduction_search_config(gamma):
    """Inner-search preset for smoothed-derivative models (oscillatory
    content at unit frequency)."""
    return SearchConfig.tuned(
        ell=192.0, dim=3, gamma=gamma, tau=2e-4 * (math.pi * 192.0**2) ** 1.5,
        r_min=0.38, r_max=1.15, outer_step=0.0156, t_max=1.25,
        separation=0.3, theta_sep=0.45, basis_retries=400)


def reduction_recovery_config():
    return RecoveryConfig(ell2=64.0, delta_t=1.0 / 96, tau=0.0, radius=1.0,
                          t_min=0.06, t_max=1.6, refine_ladder=(24.0, 64.0))


def desk_search_config(model, backend="quadrature", tau=None):
    """Tuned search parameters for the d=3 desk instances.

    The reference backend runs a wide high-resolution search; the query
    backend runs a coarser search over the oscillatory band where its noise
    floor can see."""
    gamma = model.gamma
    if backend == "quadrature":
        ell1 = 192.0
        if tau is None:
            tau = 0.054
        return SearchConfig.tuned(
            ell=ell1, dim=model.dim, gamma=gamma, tau=tau,
            r_min=0.38, r_max=2.35, outer_step=0.0156, t_max=2.4,
            separation=0.3, theta_sep=0.3, basis_retries=200)
    ell1 = 64.0
    if tau is None:
        tau = 0.0057 * (math.pi * ell1 * ell1) ** 1.5
    return SearchConfig.tuned(
        ell=ell1, dim=model.dim, gamma=gamma, tau=tau,
        r_min=0.38, r_max=1.65, outer_step=0.0297, t_max=1.55, t_step=0.022,
        separation=0.3, theta_sep=0.3, basis_retries=200)


def desk_recovery_config(backend="quadrature"):
    if backend == "quadrature":
        return RecoveryConfig(ell2=64.0, delta_t=1.0 / 96, tau=0.0,
                              radius=1.0, t_min=0.06, t_max=4.5,
                              refine_ladder=(24.0, 64.0))
    return RecoveryConfig(ell2=64.0, delta_t=1.0 / 64, tau=1.0, radius=1.0,
                          t_min=0.06, t_max=3.2, refine_ladder=(16.0, 64.0))


# ---------------------------------------------------------------------------
# Experiment configuration and report
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    seed: int
    oracle_backend: str = "quadrature"        # "quadrature" | "mc"
    instance: InstanceSpec = None             # generated instance ...
    model_doc: dict = None                    # ... or an inline model
    pinned_instance: str = None               # ... or a named pinned one
    noise: NoiseSpec = NoiseSpec()
    search: SearchConfig = None
    recovery: RecoveryConfig = None
    reduction: ReductionConfig = None         # set for the unbounded pipeline
    mc_scan_samples: int = 2_000_000
    mc_value_samples: int = 230_000
    mc_refine_samples: int = 100_000
    metrics_radius: float = 1.0
    metrics_points: int = 1000
    direction_tol: float = 0.05
    sup_tol: float = 0.1
    require_all_directions: bool = True
    threads: int = 1
    out_dir: str = None
    write_model: bool = True                  # test mode: persist the truth

    def resolve_model(self, rng):
        named = {"acceptance": acceptance_instance,
                 "branching": branching_instance}
        if self.pinned_instance is not None:
            return named[self.pinned_instance]()
        if self.model_doc is not None:
            return SumOfFeaturesModel.from_dict(self.model_doc)
        if self.instance is not None:
            return generate_instance(self.instance, rng)
        raise ValueError("no instance specified")

    def to_dict(self):
        doc = {
            "seed": self.seed,
            "oracle_backend": self.oracle_backend,
            "noise": self.noise.to_dict(),
            "mc_scan_samples": self.mc_scan_samples,
            "mc_value_samples": self.mc_value_samples,
            "mc_refine_samples": self.mc_refine_samples,
            "metrics": {"radius": self.metrics_radius,
                        "points": self.metrics_points,
                        "direction_tol": self.direction_tol,
                        "sup_tol": self.sup_tol,
                        "require_all_directions":
                            self.require_all_directions},
            "threads": self.threads,
        }
        if self.pinned_instance:
            doc["pinned_instance"] = self.pinned_instance
        if self.instance:
            doc["instance"] = self.instance.to_dict()
        if self.model_doc:
            doc["model"] = self.model_doc
        if self.search is not None:
            doc["search"] = _search_to_dict(self.search)
        if self.recovery is not None:
            doc["recovery"] = _recovery_to_dict(self.recovery)
        if self.reduction is not None:
            doc["reduction"] = _reduction_to_dict(self.reduction)
        return doc

    @staticmethod
    def from_dict(doc):
        cfg = ExperimentConfig(seed=doc["seed"])
        cfg.oracle_backend = doc.get("oracle_backend", "quadrature")
        cfg.noise = NoiseSpec.from_dict(doc["noise"]) if "noise" in doc \
            else NoiseSpec()
        cfg.pinned_instance = doc.get("pinned_instance")
        if "instance" in doc:
            cfg.instance = InstanceSpec.from_dict(doc["instance"])
        cfg.model_doc = doc.get("model")
        if "search" in doc:
            cfg.search = _search_from_dict(doc["search"])
        if "recovery" in doc:
            cfg.recovery = _recovery_from_dict(doc["recovery"])
        if "reduction" in doc:
            cfg.reduction = _reduction_from_dict(doc["reduction"])
        met = doc.get("metrics", {})
        cfg.metrics_radius = met.get("radius", 1.0)
        cfg.metrics_points = met.get("points", 1000)
        cfg.direction_tol = met.get("direction_tol", 0.05)
        cfg.sup_tol = met.get("sup_tol", 0.1)
        cfg.require_all_directions = met.get("require_all_directions", True)
        cfg.mc_scan_samples = doc.get("mc_scan_samples", 2_000_000)
        cfg.mc_value_samples = doc.get("mc_value_samples", 230_000)
        cfg.mc_refine_samples = doc.get("mc_refine_samples", 100_000)
        cfg.threads = doc.get("threads", 1)
        return cfg


def _search_to_dict(s):
    doc = {k: getattr(s, k) for k in
           ("ell1", "c1", "c2", "tau", "r_min", "r_max", "outer_step",
            "t_max", "t_step", "separation", "prune_gamma",
            "heavy_multiplier", "prefilter_margin", "theta_sep",
            "basis_retries", "preset")}
    if s.basis is not None:
        doc["basis"] = s.basis.tolist()
    return doc


def _search_from_dict(doc):
    basis = np.asarray(doc["basis"], dtype=float) if "basis" in doc else None
    return SearchConfig(
        ell1=doc["ell1"], c1=doc["c1"], c2=doc["c2"], tau=doc["tau"],
        r_min=doc["r_min"], r_max=doc["r_max"], outer_step=doc["outer_step"],
        t_max=doc["t_max"], t_step=doc["t_step"],
        separation=doc["separation"], prune_gamma=doc["prune_gamma"],
        heavy_multiplier=doc.get("heavy_multiplier", 5.0),
        prefilter_margin=doc.get("prefilter_margin"),
        theta_sep=doc.get("theta_sep", 0.0),
        basis_retries=doc.get("basis_retries", 10),
        basis=basis, preset=doc.get("preset", "tuned"))


def _recovery_to_dict(r):
    return {k: getattr(r, k) for k in
            ("ell2", "delta_t", "tau", "radius", "t_min", "t_max",
             "table_radius", "refine")} | \
        {"refine_ladder": list(r.refine_ladder)}


def _recovery_from_dict(doc):
    return RecoveryConfig(
        ell2=doc["ell2"], delta_t=doc["delta_t"], tau=doc["tau"],
        radius=doc["radius"], t_min=doc.get("t_min"),
        t_max=doc.get("t_max"), table_radius=doc.get("table_radius"),
        refine=doc.get("refine", True),
        refine_ladder=tuple(doc["refine_ladder"])
        if "refine_ladder" in doc else None)


def _reduction_to_dict(r):
    doc = {"eta": r.eta, "m_g": r.m_g, "seed": r.seed,
           "anchor_m": r.anchor_m}
    if r.alpha is not None:
        doc["alpha"] = r.alpha
    if r.derivative_eps is not None:
        doc["derivative_eps"] = r.derivative_eps
    if r.probes is not None:
        doc["probes"] = np.asarray(r.probes).tolist()
    return doc


def _reduction_from_dict(doc):
    return ReductionConfig(
        eta=doc["eta"], m_g=doc["m_g"], alpha=doc.get("alpha"),
        probes=(np.asarray(doc["probes"], dtype=float)
                if "probes" in doc else None),
        derivative_eps=doc.get("derivative_eps"),
        seed=doc.get("seed", 0), anchor_m=doc.get("anchor_m"))


@dataclass
class RunReport:
    passed: bool = False
    failure_stage: str = None
    directions: list = field(default_factory=list)
    match: dict = None
    sup_error: float = None
    oracle_queries: dict = field(default_factory=dict)
    mass_oracle_calls: int = 0
    stats: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    config_echo: dict = field(default_factory=dict)

    def to_dict(self, with_timings=True):
        doc = {
            "passed": self.passed,
            "failure_stage": self.failure_stage,
            "directions": [list(map(float, u)) for u in self.directions],
            "match": self.match,
            "sup_error": self.sup_error,
            "oracle_queries": self.oracle_queries,
            "mass_oracle_calls": self.mass_oracle_calls,
            "stats": self.stats,
            "config": self.config_echo,
        }
        if with_timings:
            doc["timings"] = self.timings
        return doc


# ---------------------------------------------------------------------------
# The pipeline
# ---------------------------------------------------------------------------

def run_experiment(config, out_dir=None):
    """Generate (or load) the instance, run the search, polish and recover
    each direction, assemble, and score against the ground truth.

    Returns a RunReport; persists artifacts when an output directory is
    given.  Stage failures are recorded with their stage tag rather than
    raised, except for configuration errors.
    """
    out_dir = out_dir or config.out_dir
    report = RunReport(config_echo=config.to_dict())
    rng = np.random.default_rng(config.seed)
    t_all = time.time()

    model = config.resolve_model(rng)
    truth = model.directions()
    oracle = QueryOracle(model, config.noise)
    search_cfg = config.search or desk_search_config(
        model, config.oracle_backend)
    recovery_cfg = config.recovery or desk_recovery_config(
        config.oracle_backend)
    traces = []
    ridges = []

    try:
        if config.reduction is not None:
            return _run_reduction(config, model, oracle, search_cfg,
                                  recovery_cfg, rng, report, out_dir, t_all)

        q0 = oracle.query_count
        t0 = time.time()
        if config.oracle_backend == "quadrature":
            backend = QuadratureMassBackend(model, search_cfg.ell1,
                                            search_cfg.tau)
        else:
            backend = MonteCarloMassBackend(
                oracle, search_cfg.ell1, search_cfg.tau, 0.02,
                seed=config.seed * 1009 + 7,
                m_override=config.mc_scan_samples)
        found, stats = find_directions(backend, search_cfg, model.dim, rng,
                                       truth=truth,
                                       trace=traces.append)
        report.timings["search"] = time.time() - t0
        report.oracle_queries["search"] = oracle.query_count - q0
        report.mass_oracle_calls = stats.oracle_calls
        report.stats["search"] = {
            "cells_total": stats.cells_total,
            "cells_scanned": stats.cells_scanned,
            "raw_candidates": stats.raw_candidates,
            "max_branching": {str(k): v
                              for k, v in stats.max_branching.items()},
            "basis_resamples": stats.basis_resamples,
        }

        q0 = oracle.query_count
        t0 = time.time()
        directions = []
        for cand in found:
            u = cand.u
            if recovery_cfg.refine:
                factory = _value_factory(config, model, oracle)
                u = refine_direction(
                    factory, u, recovery_cfg.refine_ladder,
                    probe_lo=max(recovery_cfg.t_min, 0.05),
                    probe_hi=min(recovery_cfg.t_max, 2.5))
            directions.append(u)
        report.timings["refine"] = time.time() - t0
        report.oracle_queries["refine"] = oracle.query_count - q0
        report.directions = directions

        q0 = oracle.query_count
        t0 = time.time()
        if config.oracle_backend == "quadrature":
            vb = QuadratureValueBackend(model, recovery_cfg.ell2,
                                        t_range=recovery_cfg.t_max + 2.0)
        else:
            vb = MonteCarloValueBackend(
                oracle, recovery_cfg.ell2, recovery_cfg.tau, 0.05,
                seed=config.seed * 733 + 5, threads=config.threads,
                m_override=config.mc_value_samples)
        ridges = [recover_ridge(vb, u, recovery_cfg) for u in directions]
        assembled = assemble_model(ridges, dim=model.dim)
        report.timings["recover"] = time.time() - t0
        report.oracle_queries["recover"] = oracle.query_count - q0

        _score(report, config, model, assembled, truth)
    except BudgetExceededError as exc:
        report.failure_stage = f"budget: {exc}"
        report.passed = False
    report.timings["total"] = time.time() - t_all
    if out_dir:
        _persist(out_dir, config, model, report, traces, ridges)
    return report


def _value_factory(config, model, oracle):
    if config.oracle_backend == "quadrature":
        return lambda ell: QuadratureValueBackend(model, ell)
    return lambda ell: MonteCarloValueBackend(
        oracle, ell, 1.0, 0.05, seed=config.seed * 389 + 11,
        threads=config.threads, m_override=config.mc_refine_samples)


def _score(report, config, model, assembled, truth):
    match = direction_error(report.directions, truth)
    report.match = match.to_dict()
    rng_m = np.random.default_rng(config.seed + 2**20)
    report.sup_error = sup_error_estimate(
        model, assembled, config.metrics_radius, config.metrics_points,
        rng_m)
    matched_ok = (match.max_cost <= config.direction_tol
                  and not match.extraneous
                  and (not match.missed or not config.require_all_directions))
    report.passed = bool(matched_ok and report.sup_error <= config.sup_tol)
    if not matched_ok:
        report.failure_stage = "direction-threshold"
    elif report.sup_error > config.sup_tol:
        report.failure_stage = "sup-threshold"


def _run_reduction(config, model, oracle, search_cfg, recovery_cfg, rng,
                   report, out_dir, t_all):
    t0 = time.time()
    result = recover_unbounded(
        oracle, config.reduction, search_cfg, recovery_cfg, rng,
        truth_model=(model if config.oracle_backend == "quadrature"
                     else None))
    report.timings["reduction"] = time.time() - t0
    report.oracle_queries["reduction"] = oracle.query_count
    report.directions = [r.u for r in result.ridges]
    report.stats["reduction"] = result.diagnostics
    report.stats["affine"] = {"const": result.const,
                              "slope": result.slope.tolist()}
    _score(report, config, model, result, model.directions())
    report.timings["total"] = time.time() - t_all
    if out_dir:
        _persist(out_dir, config, model, report, [], result.ridges)
    return report


def _persist(out_dir, config, model, report, traces, ridges):
    os.makedirs(out_dir, exist_ok=True)
    jsonio.dump_path(config.to_dict(), os.path.join(out_dir, "config.json"))
    if config.write_model:
        jsonio.dump_path(model.to_dict(noise=config.noise),
                         os.path.join(out_dir, "model.json"))
    jsonio.dump_path([list(map(float, u)) for u in report.directions],
                     os.path.join(out_dir, "directions.json"))
    ridge_dir = os.path.join(out_dir, "ridges")
    os.makedirs(ridge_dir, exist_ok=True)
    for i, r in enumerate(ridges):
        jsonio.dump_path(r.to_dict(),
                         os.path.join(ridge_dir, f"ridge_{i:03d}.json"))
    jsonio.dump_path(report.to_dict(),
                     os.path.join(out_dir, "report.json"))
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    with open(os.path.join(trace_dir, "search.jsonl"), "w") as fh:
        for rec in traces:
            fh.write(jsonio.dumps(rec, indent=0).replace("\n", " "))
            fh.write("\n")
