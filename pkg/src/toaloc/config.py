"""Config files merged with command-line overrides, validated field by field."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .ichan import IchanConfig
from .localize import Method
from .mobility import MobilityParams
from .model import Scenario
from .pso import SwarmConfig
from .scenarios import BUNDLED, generate_network, static9
from .sim import DEFAULT_METHODS, SimConfig

# documented defaults; the CLI help text is generated from this table
DEFAULTS = {
    "sigma": 5.0,
    "delta": 3.0,
    "seed": 0,
    "trials": 100,
    "eta": 0.1,
    "methods": [m.value for m in DEFAULT_METHODS],
    "workers": 1,
    "mobility.v_n_max": 0.0,
    "mobility.dt": 1.0,
    "mobility.duration": 20.0,
    "mobility.bounds": [0.0, 0.0, 1000.0, 1000.0],
    "pso.particles": SwarmConfig.particles,
    "pso.iterations": SwarmConfig.iterations,
    "pso.inertia": SwarmConfig.inertia,
    "pso.cognitive": SwarmConfig.cognitive,
    "pso.social": SwarmConfig.social,
    "ichan.max_iter": IchanConfig.max_iter,
    "ichan.eps": IchanConfig.eps,
    "generate.n_nodes": 50,
    "generate.n_bases": 4,
    "generate.area": 1000.0,
    "generate.base_region": 250.0,
    "generate.comm_radius": 500.0,
}

TOP_KEYS = {"scenario", "nodes", "comm_radius", "sigma", "delta", "seed", "dimension",
            "generate", "mobility", "trials", "sigma_sweep", "eta", "eta_sweep", "methods",
            "targets", "pso", "ichan", "search_radius_anchor", "search_radius_target",
            "workers"}
SUB_KEYS = {
    "mobility": {"v_mean", "v_n_max", "dt", "duration", "bounds"},
    "pso": {"particles", "iterations", "inertia", "cognitive", "social"},
    "ichan": {"max_iter", "eps"},
    "generate": {"n_nodes", "n_bases", "area", "base_region", "comm_radius"},
}


class ConfigErrors(ConfigError):
    """Several field-level problems at once; ``errors`` holds (field, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        ValueError.__init__(self, "; ".join(f"{f}: {m}" for f, m in self.errors))
        self.field = self.errors[0][0]


@dataclass(frozen=True)
class CliConfig:
    scenario: Scenario
    sim: SimConfig
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sigma(self):
        return self.scenario.noise.sigma

    @property
    def delta(self):
        return self.scenario.noise.delta

    @property
    def seed(self):
        return self.sim.root_seed


def read_source(source):
    """Config dict from a bundled name or a JSON file path."""
    if source is None:
        return {}
    if source in BUNDLED:
        return {"scenario": source}
    path = Path(source)
    if not path.exists():
        raise ConfigError("config", f"file not found: {source}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {source}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


def _num(errors, name, value, cond, what, cast=float):
    try:
        v = cast(value)
    except (TypeError, ValueError):
        errors.append((name, f"must be a number, got {value!r}"))
        return None
    if not cond(v):
        errors.append((name, f"must be {what}, got {v}"))
        return None
    return v


def merge(data, overrides):
    """Apply dotted-key overrides (``pso.particles`` etc.) on a copy of ``data``."""
    out = json.loads(json.dumps(data))
    for key, value in overrides.items():
        if value is None:
            continue
        head, _, tail = key.partition(".")
        if tail:
            out.setdefault(head, {})
            out[head][tail] = value
        else:
            out[key] = value
    return out


def parse_and_validate(data, overrides=None, require_mobility=False):
    """Validate a merged config dict and build the typed configuration.

    Raises :class:`ConfigErrors` listing every offending field.
    """
    d = merge(data, overrides or {})
    errors = []
    for k in sorted(set(d) - TOP_KEYS):
        errors.append((k, "unknown field"))
    for sect, keys in SUB_KEYS.items():
        if sect in d:
            if not isinstance(d[sect], dict):
                errors.append((sect, "must be an object"))
                continue
            for k in sorted(set(d[sect]) - keys):
                errors.append((f"{sect}.{k}", "unknown field"))

    sigma = _num(errors, "sigma", d.get("sigma", DEFAULTS["sigma"]), lambda v: v >= 0, ">= 0")
    delta = _num(errors, "delta", d.get("delta", DEFAULTS["delta"]), lambda v: v >= 0, ">= 0")
    seed = _num(errors, "seed", d.get("seed", DEFAULTS["seed"]), lambda v: v >= 0, ">= 0", int)
    trials = _num(errors, "trials", d.get("trials", DEFAULTS["trials"]), lambda v: v >= 1, ">= 1", int)
    eta = _num(errors, "eta", d.get("eta", DEFAULTS["eta"]), lambda v: v >= 0, ">= 0")
    workers = _num(errors, "workers", d.get("workers", DEFAULTS["workers"]), lambda v: v >= 1, ">= 1", int)
    sweep = d.get("sigma_sweep")
    if sweep is None:
        sweep = [sigma] if sigma is not None else []
    elif not isinstance(sweep, list) or not sweep:
        errors.append(("sigma_sweep", "must be a nonempty list"))
        sweep = []
    else:
        if sigma is None and sweep == [d.get("sigma")]:
            sweep = []  # already reported under "sigma"
        else:
            sweep = [_num(errors, "sigma_sweep", s, lambda v: v >= 0, ">= 0") for s in sweep]
    eta_sweep = d.get("eta_sweep", [])
    if not isinstance(eta_sweep, list):
        errors.append(("eta_sweep", "must be a list"))
        eta_sweep = []
    else:
        eta_sweep = [_num(errors, "eta_sweep", e, lambda v: v >= 0, ">= 0") for e in eta_sweep]
    methods = d.get("methods", DEFAULTS["methods"])
    try:
        methods = [Method(m) for m in methods]
        if not methods:
            errors.append(("methods", "must not be empty"))
    except (ValueError, TypeError):
        errors.append(("methods", f"each must be one of {[m.value for m in Method]}"))
        methods = list(DEFAULT_METHODS)
    radii = {}
    for k in ("search_radius_anchor", "search_radius_target"):
        if d.get(k) is not None:
            radii[k] = _num(errors, k, d[k], lambda v: v > 0, "> 0")

    pso_d = d.get("pso", {}) if isinstance(d.get("pso", {}), dict) else {}
    pso_vals = {}
    for k, cast, cond, what in (("particles", int, lambda v: v >= 2, ">= 2"),
                                ("iterations", int, lambda v: v >= 1, ">= 1"),
                                ("inertia", float, lambda v: 0 < v < 1, "in (0, 1)"),
                                ("cognitive", float, lambda v: v > 0, "> 0"),
                                ("social", float, lambda v: v > 0, "> 0")):
        pso_vals[k] = _num(errors, f"pso.{k}", pso_d.get(k, DEFAULTS[f"pso.{k}"]), cond, what, cast)
    ichan_d = d.get("ichan", {}) if isinstance(d.get("ichan", {}), dict) else {}
    max_iter = _num(errors, "ichan.max_iter", ichan_d.get("max_iter", DEFAULTS["ichan.max_iter"]),
                    lambda v: v >= 1, ">= 1", int)
    eps = _num(errors, "ichan.eps", ichan_d.get("eps", DEFAULTS["ichan.eps"]), lambda v: v > 0, "> 0")

    mobility, duration = None, DEFAULTS["mobility.duration"]
    mob_d = d.get("mobility")
    if mob_d is not None and isinstance(mob_d, dict):
        if "v_mean" not in mob_d:
            errors.append(("mobility.v_mean", "missing required field"))
        else:
            duration = _num(errors, "mobility.duration", mob_d.get("duration", duration),
                            lambda v: v > 0, "> 0")
            try:
                mobility = MobilityParams(
                    float(mob_d["v_mean"]), float(mob_d.get("v_n_max", DEFAULTS["mobility.v_n_max"])),
                    float(mob_d.get("dt", DEFAULTS["mobility.dt"])),
                    tuple(mob_d.get("bounds", DEFAULTS["mobility.bounds"])))
            except ConfigError as exc:
                errors.append((exc.field, str(exc).split(": ", 1)[-1]))
            except (TypeError, ValueError) as exc:
                errors.append(("mobility", str(exc)))
    if require_mobility and mobility is None and not any(f.startswith("mobility") for f, _ in errors):
        errors.append(("mobility", "this command needs a mobility block"))

    scenario = None
    if sigma is not None and delta is not None and seed is not None:
        try:
            scenario = _scenario(d, sigma, delta, seed)
        except ConfigError as exc:
            errors.append((exc.field, str(exc).split(": ", 1)[-1]))
    targets = d.get("targets")
    if targets is not None and scenario is not None:
        unknown = [t for t in targets if t not in scenario.ids]
        if unknown:
            errors.append(("targets", f"unknown node ids {unknown}"))
    if errors:
        raise ConfigErrors(errors)

    sim = SimConfig(
        scenario=scenario, mobility=mobility, duration=duration, trials=trials,
        sigma_sweep=tuple(sweep), eta=eta, eta_sweep=tuple(eta_sweep), methods=tuple(methods),
        targets=tuple(targets) if targets else None,
        pso=SwarmConfig(**pso_vals), ichan=IchanConfig(max_iter, eps),
        workers=workers, seed=seed, **radii)
    return CliConfig(scenario, sim, raw=d)


def _scenario(d, sigma, delta, seed):
    name = d.get("scenario")
    if name is not None and name not in BUNDLED:
        raise ConfigError("scenario", f"unknown bundled scenario {name!r}; choose from {list(BUNDLED)}")
    if name == "static9":
        return static9().with_noise(sigma=sigma, delta=delta)
    if name == "manet50" or "generate" in d:
        g = d.get("generate", {})
        kw = {k: g.get(k, DEFAULTS[f"generate.{k}"]) for k in SUB_KEYS["generate"]}
        return generate_network(n_nodes=int(kw["n_nodes"]), n_bases=int(kw["n_bases"]),
                                area=float(kw["area"]), base_region=float(kw["base_region"]),
                                comm_radius=float(kw["comm_radius"]), sigma=sigma, delta=delta,
                                seed=seed)
    if "nodes" not in d:
        raise ConfigError("scenario", "missing: give 'nodes', 'generate' or a bundled 'scenario' name")
    sd = {k: d[k] for k in ("nodes", "comm_radius") if k in d}
    sd.update(sigma=sigma, delta=delta, seed=seed)
    return Scenario.from_dict(sd)


def load(source, overrides=None, require_mobility=False):
    cfg = parse_and_validate(read_source(source), overrides, require_mobility)
    return CliConfig(cfg.scenario, cfg.sim, source=str(source or ""), raw=cfg.raw)
