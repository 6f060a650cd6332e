"""Iterative Chan estimator: two-stage WLS with residual-driven weight refresh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateGeometryError

Q_FLOOR = 1e-6


@dataclass(frozen=True)
class IchanConfig:
    max_iter: int = 20
    eps: float = 1e-3

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ConfigError("ichan.max_iter", "must be >= 1")
        if not self.eps > 0:
            raise ConfigError("ichan.eps", "must be > 0")


@dataclass(frozen=True)
class IchanResult:
    pos: np.ndarray
    iterations: int
    converged: bool
    residual_rms: float


def _diag(Q, n):
    Q = np.asarray(Q, dtype=float)
    return np.diag(Q).copy() if Q.ndim == 2 else np.broadcast_to(Q, (n,)).copy()


def first_wls(anchors, ranges, Q, return_cov=False):
    """Solve h = G z_m in the weighted LS sense, z_m = (x, y, x^2 + y^2).

    ``Q`` is the (diagonal) error covariance, given as a matrix or as its
    diagonal.
    """
    anchors = np.asarray(anchors, dtype=float)
    r = np.asarray(ranges, dtype=float)
    n = len(anchors)
    if n < 3:
        raise DegenerateGeometryError("need at least 3 anchors")
    G = np.column_stack([-2 * anchors, np.ones(n)])
    h = r**2 - np.sum(anchors**2, axis=1)
    w = 1.0 / np.sqrt(_diag(Q, n))
    A = G * w[:, None]
    # rank test on column-normalized G so coordinate scale does not matter
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0) or not np.all(np.isfinite(A)):
        raise DegenerateGeometryError("anchors are collinear")
    sv = np.linalg.svd(A / norms, compute_uv=False)
    if sv[-1] < 1e-9 * sv[0]:
        raise DegenerateGeometryError("anchors are collinear")
    z, *_ = np.linalg.lstsq(A, h * w, rcond=None)
    if return_cov:
        return z, np.linalg.inv(A.T @ A)
    return z


def second_wls(z_m, cov_zm):
    """Refine (x, y) from z_m using the x^2 + y^2 coupling.

    Returns (z_p, z) with z_p the estimate of (x^2, y^2) and z the signed
    square root; signs come from z_m.
    """
    z_m = np.asarray(z_m, dtype=float)
    Bp = np.diag([z_m[0], z_m[1], 0.5])
    Psi = 4 * Bp @ np.asarray(cov_zm, dtype=float) @ Bp
    Gp = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    hp = np.array([z_m[0]**2, z_m[1]**2, z_m[2]])
    try:
        Wi = np.linalg.inv(Psi)
        z_p = np.linalg.solve(Gp.T @ Wi @ Gp, Gp.T @ Wi @ hp)
    except np.linalg.LinAlgError:
        raise DegenerateGeometryError("second WLS weight matrix is singular") from None
    if z_p[0] < 0 and z_p[1] < 0:
        raise DegenerateGeometryError("second WLS produced negative squared coordinates")
    z = np.sign(z_m[:2]) * np.sqrt(np.maximum(z_p, 0.0))
    return z_p, z


def update_q(z, anchors, ranges, q_floor=Q_FLOOR):
    xi = np.asarray(ranges, float) - np.hypot(*(np.asarray(anchors, float) - z).T)
    return np.maximum(xi**2, q_floor)


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _two_stage(anchors_local, r, Q):
    """One first+second WLS pass in a centroid frame; returns local (x, y)."""
    psi = 4 * np.maximum(r**2, Q_FLOOR) * Q
    z_m, cov = first_wls(anchors_local, r, psi, return_cov=True)
    rho = np.hypot(z_m[0], z_m[1])
    if rho < 1e-9 * (1.0 + np.abs(anchors_local).max()):
        return z_m[:2]
    # put the first-stage estimate on the diagonal so B' stays well away from 0
    R = _rotation(np.pi / 4 - np.arctan2(z_m[1], z_m[0]))
    M = np.eye(3)
    M[:2, :2] = R
    try:
        _, z = second_wls(M @ z_m, M @ cov @ M.T)
    except DegenerateGeometryError:
        return z_m[:2]
    return R.T @ z


def ichan_solve(anchors, ranges, config=IchanConfig()):
    anchors = np.asarray(anchors, dtype=float)
    r = np.asarray(ranges, dtype=float)
    centroid = anchors.mean(axis=0)
    local = anchors - centroid
    Q = np.ones(len(r))
    prev = None
    converged = False
    it = 0
    for it in range(1, int(config.max_iter) + 1):
        z = _two_stage(local, r, Q)
        Q = update_q(z, local, r)
        if prev is not None and np.hypot(*(z - prev)) <= config.eps:
            converged = True
            break
        prev = z
    xi = r - np.hypot(*(local - z).T)
    return IchanResult(z + centroid, it, converged, float(np.sqrt(np.mean(xi**2))))


def ichan_estimate(anchors, ranges, config=IchanConfig()):
    """Iterated two-stage Chan estimate of the target position.

    Each pass weights the first WLS with 4 B Q B (B = diag of observed
    ranges), refines with the second WLS and refreshes Q from the squared
    range residuals.  Stops after ``config.max_iter`` passes or when the
    estimate moves less than ``config.eps``.  Computed in a centroid frame
    rotated per pass, so the result is translation and rotation equivariant.
    If the second WLS breaks down the first-stage (x, y) is used for that pass.
    """
    return ichan_solve(anchors, ranges, config).pos
