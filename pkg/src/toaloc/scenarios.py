"""Bundled scenarios: the fixed nine-node layout and a seeded 50-node network."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .errors import ConfigError
from .model import Node, NoiseParams, Role, Scenario

BUNDLED = ("static9", "manet50")


def static9():
    """Four noisy bases, four level-1 nodes and one level-2 target ``t``."""
    text = resources.files("toaloc.data").joinpath("static9.json").read_text()
    return Scenario.from_dict(json.loads(text))


def generate_network(n_nodes=50, n_bases=4, area=1000.0, base_region=250.0,
                     comm_radius=500.0, sigma=5.0, delta=3.0, seed=0):
    """Uniform blind nodes over an area x area square, bases inside one corner.

    Bases are drawn uniformly in the [0, base_region]^2 corner so that the
    hop count grows across the arena and level-2 nodes appear.
    """
    if n_bases < 3:
        raise ConfigError("generate.n_bases", "need at least 3 base anchors")
    if n_nodes <= n_bases:
        raise ConfigError("generate.n_nodes", "must exceed n_bases")
    if not 0 < base_region <= area:
        raise ConfigError("generate.base_region", "must be in (0, area]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6E6574]))
    bases = rng.uniform(0.0, base_region, (n_bases, 2))
    blind = rng.uniform(0.0, area, (n_nodes - n_bases, 2))
    nodes = [Node(f"b{i + 1}", float(x), float(y), Role.BASE) for i, (x, y) in enumerate(bases)]
    nodes += [Node(f"n{i + 1:02d}", float(x), float(y), Role.BLIND) for i, (x, y) in enumerate(blind)]
    return Scenario(tuple(nodes), comm_radius, NoiseParams(sigma, delta), int(seed))


def bundled(name, **kw):
    if name == "static9":
        return static9()
    if name == "manet50":
        return generate_network(**kw)
    raise ConfigError("scenario", f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
