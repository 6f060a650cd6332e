"""Particle swarm minimizer over a product of discs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OptimizationError


@dataclass(frozen=True)
class BallRegion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ConfigError("radius", f"must be > 0, got {self.radius}")


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 60
    iterations: int = 300
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 0

    def __post_init__(self):
        if self.particles < 2:
            raise ConfigError("pso.particles", "must be >= 2")
        if self.iterations < 1:
            raise ConfigError("pso.iterations", "must be >= 1")
        if not 0 < self.inertia < 1:
            raise ConfigError("pso.inertia", "must be in (0, 1)")
        if not (self.cognitive > 0 and self.social > 0):
            raise ConfigError("pso.cognitive/social", "must be > 0")

    def with_seed(self, seed):
        return SwarmConfig(self.particles, self.iterations, self.inertia,
                           self.cognitive, self.social, int(seed))


def _as_complex(X):
    """(..., n, 2) float array viewed as (..., n) complex, no copy when contiguous."""
    X = np.ascontiguousarray(X, dtype=float)
    return X.view(complex)[..., 0]


def _as_real(Z):
    return Z[..., None].view(float)


def _shrink(off, limit):
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.minimum(1.0, limit / np.abs(off))
    return off * scale


def project(X, centers, radii):
    """Pull every (x, y) block of X back into its disc.  X: (..., n, 2)."""
    C = _as_complex(centers)
    return _as_real(C + _shrink(_as_complex(X) - C, radii))


def _evaluate(objective, Z):
    with np.errstate(all="ignore"):
        f = np.asarray(objective(_as_real(Z)), dtype=float)
    return np.where(np.isfinite(f), f, np.inf)


def minimize(objective, regions, config=SwarmConfig(), init=None, callback=None):
    """Minimize ``objective`` over the product of ``regions``.

    ``objective`` is vectorized: it receives an array of shape
    (particles, len(regions), 2) and returns one value per particle.
    ``init`` optionally seeds particles with known points (shape (k, n, 2)
    or (n, 2)); they are projected into the regions first.
    ``callback(iteration, best_value)`` is called once per iteration.

    Returns ``(best_point, best_value)`` with best_point of shape (n, 2).
    """
    if not regions:
        raise ValueError("at least one region is required")
    rng = np.random.default_rng(config.seed)
    centers = np.array([r.center for r in regions])
    C = _as_complex(centers)
    radii = np.array([r.radius for r in regions], dtype=float)
    P, n = config.particles, len(regions)

    # particles live in complex form: one complex number per (x, y) block
    rad = radii * np.sqrt(rng.random((P, n)))
    ang = rng.uniform(0, 2 * np.pi, (P, n))
    Z = C + rad * np.exp(1j * ang)
    if init is not None:
        init = np.asarray(init, dtype=float).reshape(-1, n, 2)[:P]
        Z[:len(init)] = _as_complex(project(init, centers, radii))
    vmax = 2 * radii
    V0 = rng.uniform(-1, 1, (P, n, 2)) * radii[:, None]
    V = _shrink(_as_complex(V0), vmax)

    f = _evaluate(objective, Z)
    pbest, pval = Z.copy(), f.copy()
    g = int(np.argmin(pval))
    gbest, gval = pbest[g].copy(), pval[g]
    w, c1, c2 = config.inertia, config.cognitive, config.social
    for it in range(config.iterations):
        r1, r2 = rng.random((2, P, n))
        V = _shrink(w * V + c1 * r1 * (pbest - Z) + c2 * r2 * (gbest - Z), vmax)
        Z = C + _shrink(Z + V - C, radii)
        f = _evaluate(objective, Z)
        better = f < pval
        pbest[better] = Z[better]
        pval[better] = f[better]
        g = int(np.argmin(pval))
        if pval[g] < gval:
            gbest, gval = pbest[g].copy(), pval[g]
        if callback is not None:
            callback(it, gval)
    if not np.isfinite(gval):
        raise OptimizationError("objective was non-finite at every sampled point")
    return _as_real(gbest).copy(), float(gval)
