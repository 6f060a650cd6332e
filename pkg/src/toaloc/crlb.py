"""Fisher information and Cramer-Rao bounds for cascaded TOA localization.

The parameter vector stacks the target position first, then every node of
a lower level (highest level first, ids ascending within a level).  Node
``j`` at rank ``r`` in :attr:`ParamIndex.ordering` owns entries ``2r`` and
``2r + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .hierarchy import dynamic_anchor_set

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ParamIndex:
    ordering: tuple

    @property
    def dim(self):
        return 2 * len(self.ordering)

    def rank(self, node_id):
        return self.ordering.index(node_id)

    def slice(self, node_id):
        r = self.rank(node_id)
        return slice(2 * r, 2 * r + 2)


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray
    index: ParamIndex


def param_index(level_map, target):
    k = level_map.level(target)
    below = sorted((i for i, lv in level_map.levels.items() if lv < k),
                   key=lambda i: (-level_map.levels[i], i))
    return ParamIndex((target, *below))


def likelihood_links(scenario, level_map, target):
    """Range links entering the likelihood of ``target``'s parameter vector.

    These are the target's links to its dynamic anchors plus, for every
    non-base node in the parameter vector, its links to its own dynamic
    anchors.  Each link appears once, ordered (higher-level node, anchor).
    """
    index = param_index(level_map, target)
    links = [(target, a) for a in dynamic_anchor_set(scenario, level_map, target).anchors]
    for node in index.ordering[1:]:
        if level_map.level(node) >= 1:
            links.extend((node, a) for a in dynamic_anchor_set(scenario, level_map, node).anchors)
    return links


def _unit(a, b):
    diff = a - b
    d = np.hypot(*diff)
    if d == 0.0:
        raise DegenerateGeometryError("zero distance between linked nodes")
    return diff / d


def build_fim(scenario, level_map, target):
    sigma, delta = scenario.noise.sigma, scenario.noise.delta
    if sigma <= 0:
        raise ValueError("FIM needs sigma > 0")
    if delta <= 0:
        raise ValueError("FIM needs delta > 0")
    index = param_index(level_map, target)
    rank = {j: r for r, j in enumerate(index.ordering)}
    pos = scenario.positions()
    F = np.zeros((index.dim, index.dim))
    for a, b in likelihood_links(scenario, level_map, target):
        u = _unit(pos[a], pos[b])
        J = np.outer(u, u) / sigma**2
        ia, ib = 2 * rank[a], 2 * rank[b]
        F[ia:ia + 2, ia:ia + 2] += J
        F[ib:ib + 2, ib:ib + 2] += J
        F[ia:ia + 2, ib:ib + 2] -= J
        F[ib:ib + 2, ia:ia + 2] -= J
    for node in index.ordering[1:]:
        if level_map.level(node) == 0:
            i = 2 * rank[node]
            F[i, i] += 1.0 / delta**2
            F[i + 1, i + 1] += 1.0 / delta**2
    return FisherMatrix(F, index)


def _inverse(F):
    F = np.asarray(F, dtype=float)
    w, V = np.linalg.eigh(F)
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        raise DegenerateGeometryError(
            f"singular Fisher information (eigenvalues {w[0]:.3g}..{w[-1]:.3g}); "
            "anchor geometry is degenerate")
    return (V / w) @ V.T


def target_covariance(fim):
    """2x2 lower bound on the covariance of the target position."""
    F = fim.entries if isinstance(fim, FisherMatrix) else fim
    return _inverse(F)[:2, :2]


def crlb_of_target(fim):
    return float(np.trace(target_covariance(fim)))


def anchor_covariance(scenario, level_map, anchor):
    if level_map.level(anchor) == 0:
        return scenario.noise.delta**2 * np.eye(2)
    return target_covariance(build_fim(scenario, level_map, anchor))


def anchor_crlb_for_localization(scenario, level_map, anchor):
    """Scalar anchor uncertainty fed to the localizer: delta^2 for base anchors."""
    if level_map.level(anchor) == 0:
        return scenario.noise.delta**2
    return crlb_of_target(build_fim(scenario, level_map, anchor))


def _link_geometry(target_pos, anchor_pos, sigma):
    target_pos = np.asarray(target_pos, dtype=float)
    U = np.array([_unit(target_pos, a) for a in np.asarray(anchor_pos, dtype=float)])
    Hp = U / sigma
    info = Hp.T @ Hp
    w = np.linalg.eigvalsh(info)
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        raise DegenerateGeometryError("target position unidentifiable from its anchors")
    return U, Hp, info


def refresh_anchor_covariances(target_pos, anchor_pos, anchor_covs, sigma):
    """Anchor covariances after the anchors have also ranged a target.

    Information form: independent anchor priors, no prior on the target,
    plus the target-anchor links.  The target is marginalized out and the
    anchor block is inverted in Woodbury form, which stays well conditioned
    when some priors are far tighter than the ranging noise.
    Returns the 2x2 marginal covariance of every anchor.
    """
    U, Hp, info = _link_geometry(target_pos, anchor_pos, sigma)
    n = len(U)
    Hs = np.zeros((n, 2 * n))
    for i in range(n):
        Hs[i, 2 * i:2 * i + 2] = -U[i] / sigma
    P = np.eye(n) - Hp @ np.linalg.solve(info, Hp.T)
    L = P @ Hs
    S = np.zeros((2 * n, 2 * n))
    for i, c in enumerate(anchor_covs):
        S[2 * i:2 * i + 2, 2 * i:2 * i + 2] = c
    SL = S @ L.T
    C = S - SL @ np.linalg.solve(np.eye(n) + L @ SL, SL.T)
    return [C[2 * i:2 * i + 2, 2 * i:2 * i + 2] for i in range(n)]


def refreshed_crlbs(target_pos, anchor_pos, anchor_crlbs, sigma, anchor_covs=None):
    """Scale each scalar anchor CRLB by the trace ratio of its refreshed covariance.

    Without explicit covariances every anchor is modelled isotropic with
    per-coordinate variance equal to its scalar CRLB, the same uncertainty
    model the localization objective assumes.
    """
    crlbs = np.asarray(anchor_crlbs, dtype=float)
    if anchor_covs is None:
        anchor_covs = [c * np.eye(2) for c in crlbs]
    updated = refresh_anchor_covariances(target_pos, anchor_pos, anchor_covs, sigma)
    return np.array([c * np.trace(u) / np.trace(cov)
                     for c, u, cov in zip(crlbs, updated, anchor_covs)])


def updated_crlb(scenario, level_map, anchor, target):
    das = dynamic_anchor_set(scenario, level_map, target)
    if anchor not in das.anchors:
        raise ValueError(f"{anchor!r} is not a dynamic anchor of {target!r}")
    pos = scenario.positions()
    covs = [anchor_covariance(scenario, level_map, a) for a in das.anchors]
    crlbs = [anchor_crlb_for_localization(scenario, level_map, a) for a in das.anchors]
    out = refreshed_crlbs(pos[target], [pos[a] for a in das.anchors], crlbs,
                          scenario.noise.sigma, anchor_covs=covs)
    return float(out[das.anchors.index(anchor)])


def local_crlb(target_pos, anchor_pos, anchor_crlbs, sigma):
    """Target CRLB from its own links with isotropic anchor priors.

    Marginalizing each anchor inflates its link variance to
    sigma^2 + crlb_i along the line of sight.
    """
    U, _, _ = _link_geometry(target_pos, anchor_pos, sigma)
    weights = 1.0 / (sigma**2 + np.asarray(anchor_crlbs, dtype=float))
    return float(np.trace(_inverse((U.T * weights) @ U)))
