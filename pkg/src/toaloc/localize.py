"""Position estimators for one target node given its dynamic anchors."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import crlb as _crlb
from .errors import DegenerateGeometryError
from .ichan import IchanConfig, first_wls, ichan_solve
from .pso import BallRegion, SwarmConfig, minimize

CRLB_FLOOR = 1e-9


class Method(str, Enum):
    LEVEL1_MLE = "level1"
    TWO_STEP_STATIC = "two-step"
    TWO_STEP_DYNAMIC = "dynamic"
    DIRECT_PSO = "pso"
    LLS = "lls"
    CWLLS = "cwlls"
    ICHAN = "ichan"


@dataclass(frozen=True)
class AnchorBelief:
    id: str
    observed_pos: np.ndarray
    crlb: float

    def __post_init__(self):
        object.__setattr__(self, "observed_pos", np.asarray(self.observed_pos, dtype=float))
        object.__setattr__(self, "crlb", max(float(self.crlb), CRLB_FLOOR))


@dataclass(frozen=True)
class LocalizeProblem:
    anchors: tuple
    ranges: np.ndarray
    sigma: float
    search_radius_anchor: float | None = None
    search_radius_target: float | None = None
    pso: SwarmConfig = field(default_factory=SwarmConfig)
    ichan: IchanConfig = field(default_factory=IchanConfig)
    # located nodes the target has no link to, and the link radius; used only
    # to reject a coarse start that would have been in range of them
    out_of_range: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    comm_radius: float | None = None
    # deployment rectangle (x0, y0, x1, y1) the target is known to lie in
    area: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "ranges", np.asarray(self.ranges, dtype=float))
        object.__setattr__(self, "out_of_range",
                           np.asarray(self.out_of_range, dtype=float).reshape(-1, 2))
        if len(self.anchors) != len(self.ranges):
            raise ValueError("one range per anchor is required")
        if len(self.anchors) < 3:
            raise ValueError("at least 3 anchors are required")

    @property
    def anchor_pos(self):
        return np.array([a.observed_pos for a in self.anchors])

    @property
    def crlbs(self):
        return np.array([a.crlb for a in self.anchors])

    def anchor_radii(self):
        if self.search_radius_anchor is not None:
            return np.full(len(self.anchors), float(self.search_radius_anchor))
        return 3.0 * np.sqrt(self.crlbs)


@dataclass(frozen=True)
class Estimate:
    pos: np.ndarray
    crlb: float
    method: Method
    updated_anchors: tuple = ()

    def to_dict(self):
        return {
            "pos": [float(self.pos[0]), float(self.pos[1])],
            "crlb": float(self.crlb),
            "method": self.method.value,
            "updated_anchors": [
                {"id": i, "pos": [float(p[0]), float(p[1])], "crlb": float(c)}
                for i, p, c in self.updated_anchors
            ],
        }


@dataclass(frozen=True)
class MobilityPenalty:
    prev_estimate: np.ndarray
    step_length: float
    eta: float


def objective_fn(ranges, sigma, centers, weights, penalty=None):
    """Vectorized ML cost with its constants bound; see :func:`objective`."""
    ranges = np.asarray(ranges, dtype=float)
    centers = np.asarray(centers, dtype=float)
    C = centers[:, 0] + 1j * centers[:, 1]
    inv_w = 1.0 / np.asarray(weights, dtype=float)
    inv_s2 = 1.0 / sigma**2
    use_pen = penalty is not None and penalty.eta > 0
    if use_pen:
        prev = complex(*penalty.prev_estimate)

    def f(X):
        Z = np.ascontiguousarray(X, dtype=float).view(complex)[..., 0]
        s = Z[..., 1:]
        res = ranges - np.abs(Z[..., :1] - s)
        off = C - s
        cost = (res * res).sum(axis=-1) * inv_s2 + ((off.real ** 2 + off.imag ** 2) * inv_w).sum(axis=-1)
        if use_pen:
            cost = cost + penalty.eta * (np.abs(Z[..., 0] - prev) - penalty.step_length) ** 2
        return cost

    return f


def objective(X, ranges, sigma, centers, weights, penalty=None):
    """Weighted ML cost at stacked points X of shape (..., N+1, 2).

    Block 0 is the target, blocks 1..N the anchors.  ``weights`` are the
    anchor variances; ``penalty`` adds eta * (|p - p_prev| - step)^2.
    """
    return objective_fn(ranges, sigma, centers, weights, penalty)(X)


def objective_gradient(X, ranges, sigma, centers, weights, penalty=None):
    """Analytic gradient of :func:`objective` for a single point X (N+1, 2)."""
    X = np.asarray(X, dtype=float)
    p, s = X[0], X[1:]
    diff = p - s
    d = np.hypot(diff[:, 0], diff[:, 1])
    u = diff / d[:, None]
    coef = -2 * (ranges - d)[:, None] / sigma**2
    grad = np.zeros_like(X)
    grad[0] = np.sum(coef * u, axis=0)
    grad[1:] = -coef * u + 2 * (s - centers) / weights[:, None]
    if penalty is not None and penalty.eta > 0:
        off = p - penalty.prev_estimate
        moved = np.hypot(*off)
        grad[0] += 2 * penalty.eta * (moved - penalty.step_length) * off / moved
    return grad


@dataclass(frozen=True)
class _Start:
    coarse: np.ndarray
    regions: list


def _range_cost(p, anchors, ranges):
    return float(np.sum((ranges - np.hypot(*(p - anchors).T)) ** 2))


def _gauss_newton(p, anchors, ranges, steps=25, tol=1e-6):
    for _ in range(steps):
        diff = p - anchors
        d = np.maximum(np.hypot(*diff.T), 1e-9)
        J = diff / d[:, None]
        step, *_ = np.linalg.lstsq(J, ranges - d, rcond=None)
        p = p + step
        if np.hypot(*step) < tol:
            break
    return p


def mirror_candidate(p, anchors):
    """Reflection of ``p`` across the principal axis of the anchor cloud."""
    c = anchors.mean(axis=0)
    _, _, Vt = np.linalg.svd(anchors - c)
    axis = Vt[0]
    off = p - c
    return c + 2 * np.dot(off, axis) * axis - off


def _violations(p, problem):
    """Count of side constraints a candidate breaks.

    A located node the target cannot hear must be out of link range, and
    the target must lie in the deployment area (both with a 3 sigma margin).
    """
    margin = 3 * problem.sigma
    n = 0
    if problem.comm_radius is not None and len(problem.out_of_range):
        d = np.hypot(*(problem.out_of_range - p).T)
        n += int(np.sum(d < problem.comm_radius - margin))
    if problem.area is not None:
        x0, y0, x1, y1 = problem.area
        n += int(not (x0 - margin <= p[0] <= x1 + margin and y0 - margin <= p[1] <= y1 + margin))
    return n


def _ring(anchors, ranges, k=6):
    c = anchors.mean(axis=0)
    ang = 2 * np.pi * np.arange(k) / k
    return c + np.mean(ranges) * np.column_stack([np.cos(ang), np.sin(ang)])


def coarse_estimate(problem):
    """Start point for the swarm.

    Gauss-Newton on the ranges (anchors held fixed) is run from the iChan
    estimate, its mirror image across the anchor axis and a ring of points
    around the anchors, so both branches of a weak geometry are found.
    Candidates breaking fewer side constraints win (silent located nodes,
    deployment area); the lower range cost decides the rest.
    """
    A, r = problem.anchor_pos, problem.ranges
    p0 = ichan_solve(A, r, problem.ichan).pos
    starts = [p0, mirror_candidate(p0, A), *_ring(A, r)]
    cands = [_gauss_newton(s, A, r) for s in starts]
    cands = [c for c in cands if np.all(np.isfinite(c))] or [p0]
    return min(cands, key=lambda c: (_violations(c, problem), _range_cost(c, A, r)))


def _start(problem):
    coarse = coarse_estimate(problem)
    r_p = problem.search_radius_target
    if r_p is None:
        try:
            spread = np.sqrt(_crlb.local_crlb(coarse, problem.anchor_pos, problem.crlbs, problem.sigma))
        except DegenerateGeometryError:
            spread = 0.0
        r_p = 3.0 * max(problem.sigma, spread)
    regions = [BallRegion(coarse, max(r_p, 1e-9))]
    regions += [BallRegion(c, max(r, 1e-9))
                for c, r in zip(problem.anchor_pos, problem.anchor_radii())]
    return _Start(coarse, regions)


def _solve(problem, start, centers, weights, seed, penalty=None, init=None):
    f = objective_fn(problem.ranges, problem.sigma, centers, weights, penalty)
    best, value = minimize(f, start.regions, problem.pso.with_seed(seed), init=init)
    return best, value


def _first_step(problem):
    start = _start(problem)
    seed_point = np.vstack([start.coarse[None], problem.anchor_pos])
    best, value = _solve(problem, start, problem.anchor_pos, problem.crlbs, problem.pso.seed,
                         init=seed_point)
    return start, best, value


def _estimate(pos, problem, method, updated=()):
    try:
        bound = _crlb.local_crlb(pos, problem.anchor_pos, problem.crlbs, problem.sigma)
    except DegenerateGeometryError:
        bound = float("nan")
    return Estimate(np.asarray(pos, dtype=float), bound, method, tuple(updated))


def locate_level1(problem):
    """Joint ML over the target and its (base) anchors, solved by PSO."""
    _, best, _ = _first_step(problem)
    return _estimate(best[0], problem, Method.LEVEL1_MLE)


def direct_pso(problem):
    _, best, _ = _first_step(problem)
    return _estimate(best[0], problem, Method.DIRECT_PSO)


def _second_step(problem, start, best1, penalty, method):
    refreshed = best1[1:]
    new_crlbs = np.maximum(
        _crlb.refreshed_crlbs(best1[0], refreshed, problem.crlbs, problem.sigma), CRLB_FLOOR)
    best2, _ = _solve(problem, start, refreshed, new_crlbs, problem.pso.seed + 1,
                      penalty=penalty, init=best1)
    updated = [(a.id, s, c) for a, s, c in zip(problem.anchors, refreshed, new_crlbs)]
    return _estimate(best2[0], problem, method, updated)


def _two_step(problem, penalty, method):
    start, best1, _ = _first_step(problem)
    return _second_step(problem, start, best1, penalty, method)


def two_step_static(problem):
    """Two-step CRLB-weighted localization.

    Step one jointly refines target and anchors around the iChan estimate;
    step two re-solves against the refined anchors with their reduced CRLBs,
    warm-started from the step-one solution.
    """
    return _two_step(problem, None, Method.TWO_STEP_STATIC)


def two_step_dynamic(problem, prev_estimate, v_mean, dt, eta):
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    penalty = MobilityPenalty(np.asarray(prev_estimate, dtype=float), v_mean * dt, eta)
    return _two_step(problem, penalty, Method.TWO_STEP_DYNAMIC)


def lls_baseline(anchors, ranges):
    return first_wls(anchors, ranges, np.ones(len(ranges)))[:2]


def cwlls_baseline(anchors, ranges, config=IchanConfig()):
    return ichan_solve(anchors, ranges, replace(config, max_iter=1)).pos


def _closed_form(problem, method):
    A, r = problem.anchor_pos, problem.ranges
    if method is Method.LLS:
        pos = lls_baseline(A, r)
    elif method is Method.CWLLS:
        pos = cwlls_baseline(A, r, problem.ichan)
    else:
        pos = ichan_solve(A, r, problem.ichan).pos
    return _estimate(pos, problem, method)


def locate(problem, method, prev_estimate=None, v_mean=0.0, dt=1.0, eta=0.0):
    """Dispatch by method name; dynamic falls back to static without a prior estimate."""
    method = Method(method)
    return locate_many(problem, [method], prev_estimate, v_mean, dt, eta)[method]


def locate_many(problem, methods, prev_estimate=None, v_mean=0.0, dt=1.0, eta=0.0):
    """Run several methods on one problem, sharing the swarm search they have in common.

    The direct swarm estimate is step one of both two-step variants, so it is
    computed once.  Results equal those of separate :func:`locate` calls.
    """
    methods = [Method(m) for m in methods]
    out = {}
    swarm = {Method.LEVEL1_MLE, Method.DIRECT_PSO, Method.TWO_STEP_STATIC, Method.TWO_STEP_DYNAMIC}
    if swarm.intersection(methods):
        start, best1, _ = _first_step(problem)
    for m in methods:
        if m in (Method.LEVEL1_MLE, Method.DIRECT_PSO):
            out[m] = _estimate(best1[0], problem, m)
        elif m is Method.TWO_STEP_STATIC or (m is Method.TWO_STEP_DYNAMIC and prev_estimate is None):
            if Method.TWO_STEP_STATIC not in out:
                out[Method.TWO_STEP_STATIC] = _second_step(problem, start, best1, None,
                                                           Method.TWO_STEP_STATIC)
            out[m] = replace(out[Method.TWO_STEP_STATIC], method=m)
        elif m is Method.TWO_STEP_DYNAMIC:
            if dt <= 0:
                raise ValueError("dt must be > 0")
            if eta < 0:
                raise ValueError("eta must be >= 0")
            penalty = MobilityPenalty(np.asarray(prev_estimate, dtype=float), v_mean * dt, eta)
            out[m] = _second_step(problem, start, best1, penalty, m)
        else:
            out[m] = _closed_form(problem, m)
    return {m: out[m] for m in methods}
