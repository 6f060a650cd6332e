"""Random-direction mobility with a mean speed plus a uniform random speed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class MobilityParams:
    v_mean: float
    v_n_max: float
    dt: float
    bounds: tuple = (0.0, 0.0, 1000.0, 1000.0)  # x0, y0, x1, y1

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        if not self.v_mean >= 0:
            raise ConfigError("mobility.v_mean", f"must be >= 0, got {self.v_mean}")
        if not self.v_n_max >= 0:
            raise ConfigError("mobility.v_n_max", f"must be >= 0, got {self.v_n_max}")
        if not self.dt > 0:
            raise ConfigError("mobility.dt", f"must be > 0, got {self.dt}")
        if len(self.bounds) != 4:
            raise ConfigError("mobility.bounds", "expected [x0, y0, x1, y1]")
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("mobility.bounds", "need x1 > x0 and y1 > y0")

    @property
    def step_length(self):
        """Expected-speed displacement used by the motion penalty."""
        return self.v_mean * self.dt

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(float(d["v_mean"]), float(d.get("v_n_max", 0.0)), float(d.get("dt", 1.0)),
                       tuple(d.get("bounds", (0.0, 0.0, 1000.0, 1000.0))))
        except KeyError as exc:
            raise ConfigError(f"mobility.{exc.args[0]}", "missing required field") from None


def reflect(x, lo, hi):
    """Fold coordinates back into [lo, hi] by mirror reflection at the walls."""
    span = hi - lo
    y = np.mod(np.asarray(x, dtype=float) - lo, 2 * span)
    return lo + np.where(y > span, 2 * span - y, y)


def step_many(P, params, rng, v_n=None, theta=None):
    """Advance every row of P (k, 2) by one sampling interval.

    Speed is v_mean + U[0, v_n_max], heading is uniform and drawn afresh
    each call.  Steps leaving the arena are reflected specularly.
    """
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    k = len(P)
    if v_n is None:
        v_n = rng.uniform(0.0, params.v_n_max, k) if params.v_n_max > 0 else np.zeros(k)
    if theta is None:
        theta = rng.uniform(0.0, 2 * np.pi, k)
    speed = params.v_mean + np.broadcast_to(np.asarray(v_n, dtype=float), (k,))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (k,))
    moved = P + (speed * params.dt)[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    x0, y0, x1, y1 = params.bounds
    return np.column_stack([reflect(moved[:, 0], x0, x1), reflect(moved[:, 1], y0, y1)])


def step(pos, params, rng, v_n=None, theta=None):
    return step_many(np.asarray(pos, dtype=float)[None], params, rng, v_n, theta)[0]
