"""Localization levels and dynamic anchor sets over the communication graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnleveledNodeError(ValueError):
    pass


@dataclass(frozen=True)
class LevelMap:
    levels: dict
    unlocalizable: frozenset

    def level(self, node_id):
        return self.levels[node_id]

    def nodes_at(self, level):
        return sorted(i for i, k in self.levels.items() if k == level)

    def nodes_below(self, level):
        return sorted(i for i, k in self.levels.items() if k < level)

    @property
    def max_level(self):
        return max(self.levels.values())

    def to_dict(self):
        return {
            "levels": dict(sorted(self.levels.items())),
            "unlocalizable": sorted(self.unlocalizable),
        }


@dataclass(frozen=True)
class DynamicAnchorSet:
    target: str
    anchors: tuple

    @property
    def count(self):
        return len(self.anchors)


def _adjacency(scenario):
    ids = scenario.ids
    pos = np.array([[n.x, n.y] for n in scenario.nodes])
    dist = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
    adj = dist <= scenario.comm_radius
    np.fill_diagonal(adj, False)
    return {ids[i]: {ids[j] for j in np.flatnonzero(adj[i])} for i in range(len(ids))}


def neighbor_set(scenario, node):
    scenario.node(node)  # raises KeyError for unknown ids
    return _adjacency(scenario)[node]


def assign_levels(scenario):
    """Level 0 for base anchors, then the lowest level k each blind node qualifies for.

    A node qualifies for level k when it has at least dimension+1 neighbors
    already at levels below k, one of them at exactly k-1.
    """
    adj = _adjacency(scenario)
    need = scenario.dimension + 1
    levels = {n.id: 0 for n in scenario.nodes if n.is_base}
    pending = sorted(n.id for n in scenario.nodes if not n.is_base)
    k = 1
    while pending:
        assigned = []
        for nid in pending:
            lower = [levels[j] for j in adj[nid] if j in levels]
            if len(lower) >= need and (k - 1) in lower:
                assigned.append(nid)
        if not assigned:
            break
        # assigned in one sweep so same-iteration peers never anchor each other
        for nid in assigned:
            levels[nid] = k
        pending = [nid for nid in pending if nid not in levels]
        k += 1
    return LevelMap(levels, frozenset(pending))


def dynamic_anchor_set(scenario, level_map, target):
    if target not in level_map.levels or level_map.levels[target] < 1:
        raise UnleveledNodeError(f"node {target!r} has no level >= 1")
    k = level_map.levels[target]
    nbrs = [j for j in neighbor_set(scenario, target)
            if j in level_map.levels and level_map.levels[j] < k]
    nbrs.sort(key=lambda j: (level_map.levels[j], j))
    return DynamicAnchorSet(target, tuple(nbrs))
