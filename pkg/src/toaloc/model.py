"""Scenario types and synthesis of noisy TOA observations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConfigError


class Role(str, Enum):
    BASE = "base"
    BLIND = "blind"


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float
    role: Role = Role.BLIND

    @property
    def pos(self):
        return np.array([self.x, self.y])

    @property
    def is_base(self):
        return self.role is Role.BASE


@dataclass(frozen=True)
class NoiseParams:
    sigma: float
    delta: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigError("sigma", f"must be >= 0, got {self.sigma}")
        if not self.delta >= 0:
            raise ConfigError("delta", f"must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class Scenario:
    nodes: tuple
    comm_radius: float
    noise: NoiseParams
    seed: int = 0
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.comm_radius > 0:
            raise ConfigError("comm_radius", f"must be > 0, got {self.comm_radius}")
        if self.dimension != 2:
            raise ConfigError("dimension", "only 2-D scenarios are supported")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("nodes", "node ids must be unique")
        for n in self.nodes:
            if not (math.isfinite(n.x) and math.isfinite(n.y)):
                raise ConfigError("nodes", f"non-finite coordinates for node {n.id!r}")
        if sum(n.is_base for n in self.nodes) < self.dimension + 1:
            raise ConfigError("nodes", f"need at least {self.dimension + 1} base anchors")

    @property
    def ids(self):
        return [n.id for n in self.nodes]

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"unknown node id {node_id!r}")

    def positions(self):
        """Mapping id -> true position array."""
        return {n.id: n.pos for n in self.nodes}

    def with_noise(self, sigma=None, delta=None):
        noise = NoiseParams(
            self.noise.sigma if sigma is None else sigma,
            self.noise.delta if delta is None else delta,
        )
        return Scenario(self.nodes, self.comm_radius, noise, self.seed, self.dimension)

    def with_positions(self, positions):
        nodes = [Node(n.id, float(positions[n.id][0]), float(positions[n.id][1]), n.role)
                 for n in self.nodes]
        return Scenario(nodes, self.comm_radius, self.noise, self.seed, self.dimension)

    def to_dict(self):
        return {
            "comm_radius": self.comm_radius,
            "sigma": self.noise.sigma,
            "delta": self.noise.delta,
            "seed": self.seed,
            "nodes": [{"id": n.id, "x": n.x, "y": n.y, "role": n.role.value} for n in self.nodes],
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("comm_radius", "nodes"):
            if key not in d:
                raise ConfigError(key, "missing required field")
        nodes = []
        for i, nd in enumerate(d["nodes"]):
            try:
                role = Role(nd.get("role", "blind"))
            except ValueError:
                raise ConfigError(f"nodes[{i}].role", "must be 'base' or 'blind'") from None
            try:
                nodes.append(Node(str(nd["id"]), float(nd["x"]), float(nd["y"]), role))
            except KeyError as exc:
                raise ConfigError(f"nodes[{i}].{exc.args[0]}", "missing required field") from None
        noise = NoiseParams(float(d.get("sigma", 5.0)), float(d.get("delta", 3.0)))
        return cls(tuple(nodes), float(d["comm_radius"]), noise, int(d.get("seed", 0)))


def load_scenario(path):
    return Scenario.from_dict(json.loads(Path(path).read_text()))


def pair_key(a, b):
    """Canonical key for an unordered node pair."""
    return (a, b) if a <= b else (b, a)


@dataclass
class MeasurementSet:
    observed_anchor_pos: dict
    ranges: dict
    # per-link sigma reserved; unused by the estimators
    link_sigma: dict = field(default_factory=dict)

    def range(self, a, b):
        return self.ranges[pair_key(a, b)]

    def has_link(self, a, b):
        return pair_key(a, b) in self.ranges

    def to_dict(self):
        return {
            "observed_anchor_pos": {k: [float(v[0]), float(v[1])]
                                    for k, v in sorted(self.observed_anchor_pos.items())},
            "ranges": [[a, b, float(r)] for (a, b), r in sorted(self.ranges.items())],
        }


# Random streams -------------------------------------------------------------

# sub-stream purposes; values are part of the reproducibility contract
STREAM_MEASURE = 1
STREAM_MOBILITY = 2
STREAM_SOLVER = 3


def substream(root_seed, *keys):
    """Independent generator for (root seed, trial, purpose, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed) & (2**64 - 1), *map(int, keys)]))


def perturb_anchor(pos, delta, rng):
    if delta < 0:
        raise ValueError("delta must be >= 0")
    pos = np.asarray(pos, dtype=float)
    return pos + delta * rng.standard_normal(2)


def observe_distance(p, s, sigma, rng):
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    d = float(np.hypot(*(np.asarray(p, float) - np.asarray(s, float))))
    return d + sigma * float(rng.standard_normal())


def true_links(scenario):
    """Unordered node pairs within communication radius, in sorted key order."""
    pos = scenario.positions()
    links = []
    for a, b in combinations(sorted(scenario.ids), 2):
        if np.hypot(*(pos[a] - pos[b])) <= scenario.comm_radius:
            links.append((a, b))
    return links


def synthesize_measurements(scenario, rng):
    pos = scenario.positions()
    sigma, delta = scenario.noise.sigma, scenario.noise.delta
    anchors = {}
    for n in sorted(scenario.nodes, key=lambda n: n.id):
        if n.is_base:
            anchors[n.id] = perturb_anchor(n.pos, delta, rng)
    ranges = {}
    for a, b in true_links(scenario):
        ranges[(a, b)] = observe_distance(pos[a], pos[b], sigma, rng)
    return MeasurementSet(anchors, ranges)
