"""Monte-Carlo drivers: static sweeps, mobile trajectory trials and MANET runs."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import crlb as _crlb
from .errors import ConfigError, DegenerateGeometryError, OptimizationError
from .hierarchy import UnleveledNodeError, assign_levels, dynamic_anchor_set, neighbor_set
from .ichan import IchanConfig
from .localize import AnchorBelief, LocalizeProblem, Method, locate_level1, locate_many
from .mobility import MobilityParams, step_many
from .model import (STREAM_MEASURE, STREAM_MOBILITY, STREAM_SOLVER, Scenario, substream,
                    synthesize_measurements)
from .pso import SwarmConfig

log = logging.getLogger(__name__)

SOLVER_ERRORS = (DegenerateGeometryError, OptimizationError, np.linalg.LinAlgError,
                 UnleveledNodeError)

DEFAULT_METHODS = (Method.TWO_STEP_STATIC, Method.TWO_STEP_DYNAMIC, Method.DIRECT_PSO,
                   Method.CWLLS, Method.LLS)


# metrics --------------------------------------------------------------------

def rmse(estimates, truth):
    est = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if len(est) == 0:
        raise ValueError("rmse of an empty estimate list")
    return float(np.sqrt(np.mean(np.sum((est - np.asarray(truth, dtype=float)) ** 2, axis=1))))


def level2_avg_rmse(per_node_rmse, level_map):
    """Mean RMSE over level-2 nodes; None when the instant has no level-2 node."""
    vals = [v for n, v in per_node_rmse.items() if level_map.levels.get(n) == 2]
    if not vals:
        return None
    return float(np.mean(vals))


def empirical_cdf(values):
    v = np.sort(np.asarray(values, dtype=float))
    return [(float(x), (i + 1) / len(v)) for i, x in enumerate(v)]


def to_db(rmse_m):
    return 10 * math.log10(rmse_m) if rmse_m > 0 else float("-inf")


@dataclass
class MetricsRow:
    method: str
    sigma_m: float
    v_mean_mps: float | None
    eta: float | None
    time_s: float | None
    rmse_m: float
    rmse_db: float
    crlb_sqrt_m: float
    median_m: float
    p90_m: float
    failure_rate: float
    cdf: list = field(default_factory=list, repr=False)


def summarize(method, errors, crlbs, n_total, sigma, v_mean=None, eta=None, time_s=None,
              spread=None):
    """One report row from per-estimate errors.

    ``spread`` overrides the population used for median/p90/CDF (the MANET
    summary uses per-instant averages there).
    """
    errors = np.asarray(errors, dtype=float)
    pop = errors if spread is None else np.asarray(spread, dtype=float)
    nan = float("nan")
    r = float(np.sqrt(np.mean(errors**2))) if len(errors) else nan
    return MetricsRow(
        method=str(method.value if isinstance(method, Method) else method),
        sigma_m=float(sigma),
        v_mean_mps=v_mean,
        eta=eta,
        time_s=time_s,
        rmse_m=r,
        rmse_db=to_db(r) if len(errors) else nan,
        crlb_sqrt_m=float(np.sqrt(np.mean(crlbs))) if len(crlbs) else nan,
        median_m=float(np.median(pop)) if len(pop) else nan,
        p90_m=float(np.percentile(pop, 90)) if len(pop) else nan,
        failure_rate=(1.0 - len(errors) / n_total) if n_total else 0.0,
        cdf=empirical_cdf(pop) if len(pop) else [],
    )


@dataclass
class MetricsReport:
    kind: str
    rows: list = field(default_factory=list)
    # auxiliary tables keyed by name, each a list of flat dicts
    tables: dict = field(default_factory=dict)

    @property
    def failure_rate(self):
        rates = [r.failure_rate for r in self.rows if r.time_s is None or self.kind != "manet"]
        return max(rates) if rates else 0.0

    def row(self, method, **match):
        method = Method(method).value
        for r in self.rows:
            if r.method == method and all(getattr(r, k) == v for k, v in match.items()):
                return r
        raise KeyError((method, match))


# configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    mobility: MobilityParams | None = None
    duration: float = 20.0
    trials: int = 100
    sigma_sweep: tuple = (5.0,)
    eta: float = 0.1
    eta_sweep: tuple = ()
    methods: tuple = DEFAULT_METHODS
    targets: tuple | None = None
    pso: SwarmConfig = field(default_factory=SwarmConfig)
    ichan: IchanConfig = field(default_factory=IchanConfig)
    search_radius_anchor: float | None = None
    search_radius_target: float | None = None
    workers: int = 1
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma_sweep", tuple(float(s) for s in self.sigma_sweep))
        object.__setattr__(self, "eta_sweep", tuple(float(e) for e in self.eta_sweep))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if int(self.trials) < 1:
            raise ConfigError("trials", f"must be >= 1, got {self.trials}")
        if not self.sigma_sweep:
            raise ConfigError("sigma_sweep", "must not be empty")
        if any(not s >= 0 for s in self.sigma_sweep):
            raise ConfigError("sigma_sweep", "every sigma must be >= 0")
        if not self.eta >= 0 or any(not e >= 0 for e in self.eta_sweep):
            raise ConfigError("eta", "must be >= 0")
        if not self.methods:
            raise ConfigError("methods", "must not be empty")
        if not self.duration > 0:
            raise ConfigError("mobility.duration", "must be > 0")
        if int(self.workers) < 1:
            raise ConfigError("workers", "must be >= 1")

    @property
    def root_seed(self):
        return self.scenario.seed if self.seed is None else int(self.seed)

    @property
    def etas(self):
        return self.eta_sweep or (self.eta,)


def solver_seed(root, *keys):
    return int(substream(root, *keys, STREAM_SOLVER).integers(2**62))


# one instant ----------------------------------------------------------------------

@dataclass
class InstantResult:
    level_map: object
    estimates: dict            # method -> {node: Estimate}
    failed: dict               # method -> set of nodes
    level1: dict               # node -> Estimate (shared by all methods)


def _problem(scenario, ms, level_map, node, anchor_pos, crlbs, sigma, cfg, seed):
    das = dynamic_anchor_set(scenario, level_map, node)
    beliefs = [AnchorBelief(a, anchor_pos[a], crlbs[a]) for a in das.anchors]
    ranges = [ms.range(node, a) for a in das.anchors]
    heard = neighbor_set(scenario, node)
    silent = [p for j, p in sorted(anchor_pos.items()) if j not in heard and j != node]
    return LocalizeProblem(beliefs, ranges, sigma,
                           search_radius_anchor=cfg.search_radius_anchor,
                           search_radius_target=cfg.search_radius_target,
                           pso=cfg.pso.with_seed(seed), ichan=cfg.ichan,
                           out_of_range=silent, comm_radius=scenario.comm_radius,
                           area=cfg.mobility.bounds if cfg.mobility is not None else None)


def localize_instant(scenario, ms, level_map, cfg, methods, seed_keys, prev=None, v_mean=0.0,
                     dt=1.0, eta=0.0, max_level=None, anchor_crlbs=None, reuse=None):
    """Localize every leveled blind node, lowest level first.

    Level-1 nodes are solved once by the base-anchor MLE and shared by all
    methods; higher levels are solved per method on that method's own
    lower-level estimates.  ``prev`` maps node -> previous estimate for the
    dynamic method.  ``reuse`` is an earlier result for the same
    measurements whose level-1 solutions are taken as is.
    """
    methods = tuple(Method(m) for m in methods)
    sigma = max(scenario.noise.sigma, 1e-12)
    crlbs = anchor_crlbs if anchor_crlbs is not None else {}
    pos = dict(ms.observed_anchor_pos)
    ids = sorted(level_map.levels)
    rank = {n: i for i, n in enumerate(ids)}
    top = level_map.max_level if max_level is None else min(max_level, level_map.max_level)

    def crlb_of(a):
        if a not in crlbs:
            crlbs[a] = _crlb.anchor_crlb_for_localization(scenario, level_map, a)
        return crlbs[a]

    level1, failed1 = {}, set()
    if reuse is not None:
        level1 = dict(reuse.level1)
        failed1 = {n for n in level_map.nodes_at(1) if n not in level1}
    for node in level_map.nodes_at(1) if reuse is None else ():
        try:
            das = dynamic_anchor_set(scenario, level_map, node)
            for a in das.anchors:
                crlb_of(a)
            prob = _problem(scenario, ms, level_map, node, pos, crlbs, sigma, cfg,
                            solver_seed(*seed_keys, rank[node]))
            level1[node] = locate_level1(prob)
        except SOLVER_ERRORS as exc:
            log.debug("level-1 node %s failed: %s", node, exc)
            failed1.add(node)

    estimates = {m: dict(level1) for m in methods}
    failed = {m: set(failed1) for m in methods}
    known = {m: {**pos, **{n: e.pos for n, e in level1.items()}} for m in methods}
    for k in range(2, top + 1):
        for node in level_map.nodes_at(k):
            das = dynamic_anchor_set(scenario, level_map, node)
            # methods whose anchor estimates coincide share one problem
            groups = {}
            for m in methods:
                if any(a not in known[m] for a in das.anchors):
                    failed[m].add(node)
                    continue
                key = tuple(map(tuple, (known[m][a] for a in das.anchors)))
                groups.setdefault(key, []).append(m)
            for group in groups.values():
                m0 = group[0]
                try:
                    for a in das.anchors:
                        crlb_of(a)
                    visible = {j: p for j, p in known[m0].items() if level_map.levels.get(j, k) < k}
                    prob = _problem(scenario, ms, level_map, node, visible, crlbs, sigma, cfg,
                                    solver_seed(*seed_keys, rank[node]))
                    p_prev = None if prev is None else prev.get(node)
                    out = locate_many(prob, group, p_prev, v_mean, dt, eta)
                except SOLVER_ERRORS as exc:
                    log.debug("node %s failed for %s: %s", node, group, exc)
                    for m in group:
                        failed[m].add(node)
                    continue
                for m in group:
                    estimates[m][node] = out[m]
                    known[m][node] = out[m].pos
    return InstantResult(level_map, estimates, failed, level1)


def _default_targets(level_map):
    top = level_map.max_level
    return tuple(level_map.nodes_at(top)) if top >= 1 else ()


# static sweep ---------------------------------------------------------------------

def _static_trial(args):
    cfg, level_map, trial, targets = args
    root = cfg.root_seed
    out = []
    for si, sigma in enumerate(cfg.sigma_sweep):
        sc = cfg.scenario.with_noise(sigma=sigma)
        ms = synthesize_measurements(sc, substream(root, trial, STREAM_MEASURE))
        res = localize_instant(sc, ms, level_map, cfg, cfg.methods, (root, trial, si))
        truth = sc.positions()
        errs = {m.value: {t: float(np.hypot(*(res.estimates[m][t].pos - truth[t])))
                          for t in targets if t in res.estimates[m]} for m in cfg.methods}
        refresh = []
        two = res.estimates.get(Method.TWO_STEP_STATIC, {})
        for t in targets:
            if t in two:
                for aid, s_new, _ in two[t].updated_anchors:
                    if aid in res.level1:
                        refresh.append((t, aid, float(np.hypot(*(res.level1[aid].pos - truth[aid]))),
                                        float(np.hypot(*(s_new - truth[aid])))))
        out.append((sigma, errs, refresh))
    return out


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_static_sweep(cfg):
    """Repeated independent trials on a fixed geometry for every sigma.

    Measurement noise is paired across sigma and method: trial ``i`` draws
    the same standard normals for every cell, scaled by the cell's sigma.
    """
    if cfg.mobility is not None:
        raise ConfigError("mobility", "static sweep takes no mobility block")
    level_map = assign_levels(cfg.scenario)
    targets = tuple(cfg.targets) if cfg.targets else _default_targets(level_map)
    if not targets:
        raise ConfigError("targets", "scenario has no localizable blind node")
    for t in targets:
        if t not in level_map.levels or level_map.levels[t] < 1:
            raise ConfigError("targets", f"node {t!r} is not localizable")
    jobs = [(cfg, level_map, i, targets) for i in range(int(cfg.trials))]
    per_trial = _map(_static_trial, jobs, int(cfg.workers))

    report = MetricsReport("static")
    refresh_rows = []
    for si, sigma in enumerate(cfg.sigma_sweep):
        sc = cfg.scenario.with_noise(sigma=sigma)
        bound = [_target_crlb(sc, level_map, t) for t in targets]
        for m in cfg.methods:
            errs = [e for tr in per_trial for e in tr[si][1][m.value].values()]
            report.rows.append(summarize(m, errs, bound, len(targets) * len(per_trial), sigma))
        refresh = [r for tr in per_trial for r in tr[si][2]]
        for (t, aid) in sorted({(t, a) for t, a, _, _ in refresh}):
            e0 = [x for tt, a, x, _ in refresh if (tt, a) == (t, aid)]
            e1 = [y for tt, a, _, y in refresh if (tt, a) == (t, aid)]
            refresh_rows.append({
                "sigma_m": sigma, "target": t, "anchor": aid, "trials": len(e0),
                "rmse_initial_m": float(np.sqrt(np.mean(np.square(e0)))),
                "rmse_refreshed_m": float(np.sqrt(np.mean(np.square(e1)))),
                "crlb_sqrt_initial_m": math.sqrt(_crlb.anchor_crlb_for_localization(sc, level_map, aid)),
                "crlb_sqrt_updated_m": math.sqrt(_crlb.updated_crlb(sc, level_map, aid, t)),
            })
    report.tables["anchor_refresh"] = refresh_rows
    return report


def _target_crlb(scenario, level_map, node):
    sigma, delta = scenario.noise.sigma, scenario.noise.delta
    if sigma <= 0:
        return 0.0
    if delta <= 0:
        # exact anchors: the limit is reached long before the conditioning guard trips
        scenario = scenario.with_noise(delta=1e-4 * sigma)
    try:
        return _crlb.crlb_of_target(_crlb.build_fim(scenario, level_map, node))
    except DegenerateGeometryError:
        return float("nan")


# mobile trajectories ---------------------------------------------------------------

def _mobile_trial(args):
    cfg, trial, targets = args
    root, mob = cfg.root_seed, cfg.mobility
    base = cfg.scenario
    ids = base.ids
    n_steps = int(round(cfg.duration / mob.dt))
    plain = tuple(m for m in cfg.methods if m is not Method.TWO_STEP_DYNAMIC)
    use_dyn = Method.TWO_STEP_DYNAMIC in cfg.methods
    out = []
    for si, sigma in enumerate(cfg.sigma_sweep):
        P = np.array([base.node(i).pos for i in ids])
        move_rng = substream(root, trial, STREAM_MOBILITY)
        sc = base.with_noise(sigma=sigma)
        prev = {eta: None for eta in cfg.etas}
        errs = defaultdict(list)
        bound = []
        for j in range(n_steps + 1):
            if j > 0:
                P = step_many(P, mob, move_rng)
            scj = sc.with_positions(dict(zip(ids, P)))
            lm = assign_levels(scj)
            ms = synthesize_measurements(scj, substream(root, trial, STREAM_MEASURE, j))
            keys = (root, trial, si, j)
            truth = scj.positions()
            first = cfg.etas[0]
            methods = plain + ((Method.TWO_STEP_DYNAMIC,) if use_dyn else ())
            res = localize_instant(scj, ms, lm, cfg, methods, keys, prev=prev[first],
                                   v_mean=mob.v_mean, dt=mob.dt, eta=first)
            runs = {first: res}
            if use_dyn:
                for eta in cfg.etas[1:]:
                    runs[eta] = localize_instant(scj, ms, lm, cfg, (Method.TWO_STEP_DYNAMIC,), keys,
                                                 prev=prev[eta], v_mean=mob.v_mean, dt=mob.dt,
                                                 eta=eta, reuse=res)
                for eta, r in runs.items():
                    mine = {n: e.pos for n, e in r.estimates[Method.TWO_STEP_DYNAMIC].items()}
                    prev[eta] = {**(prev[eta] or {}), **mine}
            if j == 0:
                continue  # the first instant has no history; it only seeds the dynamic method
            bound += [_target_crlb(scj, lm, t) for t in targets if lm.levels.get(t, 0) >= 1]
            for m in plain:
                e = [float(np.hypot(*(res.estimates[m][t].pos - truth[t])))
                     for t in targets if t in res.estimates[m]]
                for eta in cfg.etas:
                    errs[(m.value, eta)] += e
            if use_dyn:
                for eta, r in runs.items():
                    est = r.estimates[Method.TWO_STEP_DYNAMIC]
                    errs[(Method.TWO_STEP_DYNAMIC.value, eta)] += [
                        float(np.hypot(*(est[t].pos - truth[t]))) for t in targets if t in est]
        out.append((sigma, dict(errs), bound, n_steps * len(targets)))
    return out


def run_mobile_sweep(cfg):
    """Trajectory trials on a fixed starting layout with every node moving.

    Each trial moves all nodes for ``duration / dt`` steps.  At every instant
    the dynamic method is penalized against its own estimate from the
    previous instant (the first instant is solved statically and only seeds
    it); the other methods are memoryless.  Errors of the targets are pooled
    over all instants after the first.
    """
    if cfg.mobility is None:
        raise ConfigError("mobility", "mobile sweep needs a mobility block")
    lm = assign_levels(cfg.scenario)
    targets = tuple(cfg.targets) if cfg.targets else _default_targets(lm)
    if not targets:
        raise ConfigError("targets", "scenario has no localizable blind node")
    jobs = [(cfg, i, targets) for i in range(int(cfg.trials))]
    per_trial = _map(_mobile_trial, jobs, int(cfg.workers))
    report = MetricsReport("mobile")
    for si, sigma in enumerate(cfg.sigma_sweep):
        bound = [b for tr in per_trial for b in tr[si][2]]
        n_total = sum(tr[si][3] for tr in per_trial)
        for eta in cfg.etas:
            for m in cfg.methods:
                errs = [e for tr in per_trial for e in tr[si][1].get((m.value, eta), [])]
                report.rows.append(summarize(m, errs, bound, n_total, sigma,
                                             v_mean=cfg.mobility.v_mean, eta=eta))
    return report


# MANET time series ----------------------------------------------------------------

def _manet_run(args):
    cfg, run = args
    root, mob = cfg.root_seed, cfg.mobility
    sc = cfg.scenario
    ids = sc.ids
    P = np.array([sc.node(i).pos for i in ids])
    move_rng = substream(root, run, STREAM_MOBILITY)
    n_steps = int(round(cfg.duration / mob.dt))
    sigma = sc.noise.sigma
    prev = None
    instants = []
    for j in range(n_steps + 1):
        if j > 0:
            P = step_many(P, mob, move_rng)
        scj = sc.with_positions(dict(zip(ids, P)))
        lm = assign_levels(scj)
        ms = synthesize_measurements(scj, substream(root, run, STREAM_MEASURE, j))
        res = localize_instant(scj, ms, lm, cfg, cfg.methods, (root, run, j), prev=prev,
                               v_mean=mob.v_mean, dt=mob.dt, eta=cfg.eta, max_level=2)
        truth = scj.positions()
        level2 = lm.nodes_at(2)
        errs = {m.value: {n: float(np.hypot(*(res.estimates[m][n].pos - truth[n])))
                          for n in level2 if n in res.estimates[m]} for m in cfg.methods}
        bound = [_target_crlb(scj, lm, n) for n in level2]
        instants.append((round(j * mob.dt, 9), len(level2), errs, bound))
        if Method.TWO_STEP_DYNAMIC in res.estimates:
            mine = {n: e.pos for n, e in res.estimates[Method.TWO_STEP_DYNAMIC].items()}
            # nodes not solved now keep their older estimate
            prev = {**(prev or {}), **mine}
    return instants


def run_manet(cfg):
    """Full time series: move, re-level, localize level 1 then level 2, score level 2.

    Each row holds one (method, instant); ``rmse_m`` there is the mean
    level-2 error at the instant.  One summary row per method (empty time)
    carries the median and 90th percentile of those per-instant means.
    """
    if cfg.mobility is None:
        raise ConfigError("mobility", "MANET run needs a mobility block")
    sigma = cfg.scenario.noise.sigma
    runs = _map(_manet_run, [(cfg, r) for r in range(int(cfg.trials))], int(cfg.workers))
    report = MetricsReport("manet")
    v = cfg.mobility.v_mean
    summary = {m.value: ([], [], [], 0) for m in cfg.methods}
    for instants in runs:
        for time_s, n2, errs, bound in instants:
            for m in cfg.methods:
                e = list(errs[m.value].values())
                if n2 == 0:
                    continue
                eps = float(np.mean(e)) if e else float("nan")
                row = summarize(m, e, bound, n2, sigma, v_mean=v, eta=cfg.eta, time_s=time_s)
                row.rmse_m = eps
                row.rmse_db = to_db(eps) if e else float("nan")
                row.crlb_sqrt_m = float(np.mean(np.sqrt(bound))) if bound else float("nan")
                report.rows.append(row)
                allerr, allb, eps_list, tot = summary[m.value]
                allerr.extend(e)
                allb.extend(bound)
                if e:
                    eps_list.append(eps)
                summary[m.value] = (allerr, allb, eps_list, tot + n2)
    for m in cfg.methods:
        allerr, allb, eps_list, tot = summary[m.value]
        report.rows.append(summarize(m, allerr, allb, tot, sigma, v_mean=v, eta=cfg.eta,
                                     spread=eps_list))
    return report


def run(cfg):
    """Pick the experiment implied by the config."""
    if cfg.mobility is None:
        return run_static_sweep(cfg)
    return run_manet(cfg)


def with_sigma(cfg, sigma):
    return replace(cfg, scenario=cfg.scenario.with_noise(sigma=sigma))
