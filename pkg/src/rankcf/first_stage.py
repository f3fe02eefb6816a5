"""Reduced-form regression of the endogenous regressor on ``Z``.

Two estimators of ``pi(Z)``: ordinary least squares and a Gaussian-kernel
local linear smoother (additive backfitting when ``Z`` has more than one
non-constant column). Both return the residuals ``V_{i,n} = D_i - pi_n(Z_i)``
that feed the rank-based control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import BandwidthTooSmallError, DomainError, ShapeError, SingularDesignError

OLS = "ols"
LOCAL_LINEAR = "local-linear"

LOCAL_DESIGN_RTOL = 1e-10
BACKFIT_MAX_SWEEPS = 50
BACKFIT_TOL = 1e-8


@dataclass(frozen=True)
class FirstStageFit:
    kind: str
    fitted: np.ndarray
    residuals: np.ndarray
    coefficients: np.ndarray | None = None
    bandwidth: np.ndarray | None = None


def _check_shapes(z, d):
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float).ravel()
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != d.shape[0]:
        raise ShapeError(f"rows(Z)={z.shape[0]} but len(d)={d.shape[0]}")
    return z, d


def fit_ols(z, d) -> FirstStageFit:
    """Least-squares fit of ``d`` on the columns of ``z``."""
    z, d = _check_shapes(z, d)
    s = np.linalg.svd(z, compute_uv=False)
    cond = np.inf if s[-1] == 0 else s[0] / s[-1]
    tol = s[0] * max(z.shape) * np.finfo(float).eps
    if s[-1] <= tol:
        raise SingularDesignError(
            f"first-stage design is rank deficient (condition number {cond:.3g})", cond
        )
    coef, *_ = np.linalg.lstsq(z, d, rcond=None)
    fitted = z @ coef
    return FirstStageFit(kind=OLS, fitted=fitted, residuals=d - fitted, coefficients=coef)


def rule_of_thumb_bandwidth(x) -> float:
    """Silverman's ``1.06 sd(x) n^{-1/5}``."""
    x = np.asarray(x, dtype=float)
    return 1.06 * np.std(x, ddof=1) * x.size ** (-0.2)


def local_linear_smooth(x, y, bandwidth, points=None):
    """Gaussian-kernel local linear regression of ``y`` on scalar ``x``.

    Returns the local intercepts at ``points`` (the sample itself by default).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if points is None:
        # symmetric kernel matrix: evaluate each pair once
        points = x
        w = squareform(np.exp(-0.5 * pdist(x[:, None] / bandwidth, "sqeuclidean")))
        np.fill_diagonal(w, 1.0)
    else:
        points = np.asarray(points, dtype=float)
        w = None
    u = points[None, :] - x[:, None]  # (n, m)
    if w is None:
        w = np.exp(-0.5 * np.square(u / bandwidth))
    wu = w * u
    s0 = w.sum(axis=0)
    s1 = wu.sum(axis=0)
    s2 = np.einsum("ij,ij->j", wu, u)
    denom = s0 * s2 - s1 * s1
    # A local line needs two points with non-negligible weight; an isolated
    # tail point still qualifies, a vanishing bandwidth does not.
    if np.any(~(denom > LOCAL_DESIGN_RTOL * s0 * s2)) or np.any(~(s2 > 0)):
        raise BandwidthTooSmallError(
            f"local design is singular at some evaluation point (bandwidth {bandwidth:.3g})"
        )
    t0 = y @ w
    t1 = y @ wu
    return (s2 * t0 - s1 * t1) / denom


def _non_constant_columns(z):
    return [j for j in range(z.shape[1]) if np.ptp(z[:, j]) > 0]


def fit_local_linear(z, d, bandwidth=None) -> FirstStageFit:
    """Local linear first stage; ``bandwidth`` is a scalar or one per smoothed column."""
    z, d = _check_shapes(z, d)
    cols = _non_constant_columns(z)
    if not cols:
        raise DomainError("local linear first stage needs a non-constant regressor")
    if bandwidth is None:
        h = np.array([rule_of_thumb_bandwidth(z[:, j]) for j in cols])
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (len(cols),)).copy()
    if np.any(~(h > 0)):
        raise DomainError("bandwidth must be positive")

    if len(cols) == 1:
        fitted = local_linear_smooth(z[:, cols[0]], d, h[0])
    else:
        fitted = _backfit(z[:, cols], d, h)
    return FirstStageFit(kind=LOCAL_LINEAR, fitted=fitted, residuals=d - fitted, bandwidth=h)


def _backfit(x, d, h):
    n, q = x.shape
    level = d.mean()
    parts = np.zeros((n, q))
    for _ in range(BACKFIT_MAX_SWEEPS):
        change = 0.0
        for j in range(q):
            partial = d - level - parts.sum(axis=1) + parts[:, j]
            new = local_linear_smooth(x[:, j], partial, h[j])
            new -= new.mean()
            change = max(change, np.max(np.abs(new - parts[:, j])))
            parts[:, j] = new
        if change < BACKFIT_TOL:
            break
    return level + parts.sum(axis=1)


def fit(z, d, kind=OLS, bandwidth=None) -> FirstStageFit:
    if kind == OLS:
        return fit_ols(z, d)
    if kind == LOCAL_LINEAR:
        return fit_local_linear(z, d, bandwidth)
    raise DomainError(f"unknown first-stage kind {kind!r}")
