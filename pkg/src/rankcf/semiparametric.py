"""Unknown-link estimation with a Nadaraya-Watson link.

The link ``F`` is replaced by a leave-one-out kernel regression of ``Y`` on
the current index, and the trimmed quasi-likelihood is maximized over the
coefficients with one exogenous slope pinned to 1. The local-constant link
absorbs the location, so there is no intercept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import liml
from .data import Dataset
from .exceptions import BandwidthTooSmallError, DegenerateTrimError, DomainError, NumericalError
from .liml import FitResult, Theta

F_CLAMP = 1e-6
FD_STEP = 1e-5
MAX_ITER = 200
FTOL = 1e-9


@dataclass(frozen=True)
class SemiparamSpec:
    """Options for the semiparametric fit.

    ``bandwidth=None`` recomputes Silverman's rule on the index at every
    evaluation. ``normalization_index`` is a position in the full coefficient
    vector ``(alpha, beta, rho)``; ``None`` pins the first non-constant
    exogenous slope.
    """

    bandwidth: float | None = None
    trim_quantiles: tuple[float, float] = (0.01, 0.99)
    normalization_index: int | None = None

    def __post_init__(self):
        lo, hi = self.trim_quantiles
        if not 0.0 <= lo < hi <= 1.0:
            raise DomainError(f"trim quantiles must satisfy 0 <= low < high <= 1, got {self.trim_quantiles}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")


def silverman(w) -> float:
    return 1.06 * np.std(w, ddof=1) * w.size ** (-0.2)


def nw_link(index_values, y, bandwidth, eval_points=None) -> np.ndarray:
    """Gaussian Nadaraya-Watson regression of ``y`` on ``index_values``.

    With ``eval_points=None`` the estimate is evaluated at the sample points,
    leaving each observation out of its own fit. Outputs are clamped to
    ``[1e-6, 1 - 1e-6]``.
    """
    w = np.asarray(index_values, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if w.size != y.size:
        raise DomainError("index and outcome lengths differ")
    if not bandwidth > 0:
        raise DomainError("bandwidth must be positive")
    loo = eval_points is None
    t = w if loo else np.atleast_1d(np.asarray(eval_points, dtype=float))
    k = np.exp(-0.5 * np.square((t[:, None] - w[None, :]) / bandwidth))
    if loo:
        np.fill_diagonal(k, 0.0)
    den = k.sum(axis=1)
    if np.any(~(den > 0)):
        raise BandwidthTooSmallError(f"kernel weights vanish at some point (bandwidth {bandwidth:.3g})")
    return np.clip(k @ y / den, F_CLAMP, 1.0 - F_CLAMP)


def trim_mask(index_values, trim_quantiles) -> np.ndarray:
    """Observations whose index lies inside the given empirical quantile range."""
    w = np.asarray(index_values, dtype=float)
    lo, hi = np.quantile(w, trim_quantiles)
    return (w >= lo) & (w <= hi)


def _central_gradient(f, x, step=FD_STEP):
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


class _Problem:
    """Index layout: ``w = regs @ coef`` with ``coef[pinned] = 1``."""

    def __init__(self, data, eta, spec):
        cmat = liml.control_matrix(eta, data.n)
        self.q = cmat.shape[1]
        self.w_full = np.hstack([data.z, data.d, cmat])
        self.k, self.p = data.k, data.p
        const = np.array([np.ptp(self.w_full[:, j]) == 0 for j in range(self.w_full.shape[1])])
        const[self.k:] = False
        self.const = const
        slopes = [j for j in range(self.k) if not const[j]]
        if spec.normalization_index is None:
            if not slopes:
                raise DomainError("normalization needs a non-constant exogenous regressor")
            self.pinned = slopes[0]
        else:
            self.pinned = int(spec.normalization_index)
            if not 0 <= self.pinned < self.w_full.shape[1] or const[self.pinned]:
                raise DomainError("normalization_index must point at a non-constant coefficient")
        self.free = np.array([j for j in range(self.w_full.shape[1]) if j != self.pinned and not const[j]])
        self.base = self.w_full[:, self.pinned]
        self.x_free = self.w_full[:, self.free]

    def index(self, free_coef):
        return self.base + self.x_free @ free_coef

    def full(self, free_coef):
        coef = np.zeros(self.w_full.shape[1])
        coef[self.pinned] = 1.0
        coef[self.free] = free_coef
        return coef


def quasi_loglik(w, y, tau, bandwidth=None) -> float:
    """Trimmed quasi-likelihood ``n^{-1} sum tau_i (y ln F_n + (1 - y) ln(1 - F_n))``."""
    h = silverman(w) if bandwidth is None else bandwidth
    f = nw_link(w, y, h)
    return float(np.sum(tau * (y * np.log(f) + (1.0 - y) * np.log1p(-f))) / y.size)


def fit_semiparam(data: Dataset, eta=None, spec: SemiparamSpec | None = None, *, start=None) -> FitResult:
    """Maximize the trimmed quasi-likelihood with a kernel-estimated link.

    ``start`` is a full coefficient vector; by default the probit fit on the
    same design is rescaled so that the pinned coefficient equals 1. The
    trimming set is fixed at the starting index.
    """
    data.require_estimable()
    spec = spec or SemiparamSpec()
    prob = _Problem(data, eta, spec)
    if start is None:
        probit = liml.fit(data, eta, "probit")
        start = probit.params
    start = np.asarray(start, dtype=float)
    scale = start[prob.pinned]
    if not abs(scale) > 1e-8 or not np.all(np.isfinite(start)):
        raise NumericalError("starting values cannot be normalized on the pinned coefficient")
    x0 = start[prob.free] / scale

    tau = trim_mask(prob.index(x0), spec.trim_quantiles)
    if not tau.any():
        raise DegenerateTrimError("trimming removed every observation")
    y = data.y

    def objective(c):
        return -quasi_loglik(prob.index(c), y, tau, spec.bandwidth)

    res = optimize.minimize(
        objective,
        x0,
        jac=lambda c: _central_gradient(objective, c),
        method="L-BFGS-B",
        options={"maxiter": MAX_ITER, "ftol": FTOL, "gtol": 1e-10},
    )
    coef = prob.full(res.x)
    w = prob.index(res.x)
    h = silverman(w) if spec.bandwidth is None else spec.bandwidth
    grad = _central_gradient(objective, res.x)
    theta = Theta.from_vector(coef, data.k, data.p, prob.q)
    names = liml.coefficient_names(data, prob.q)
    details = {
        "pinned": names[prob.pinned],
        "free": [names[j] for j in prob.free],
        "bandwidth": float(h),
        "trim_quantiles": list(spec.trim_quantiles),
        "n_trimmed_in": int(tau.sum()),
        "optimizer_message": str(res.message),
    }
    return FitResult(
        theta=theta,
        loglik=-float(res.fun),
        score_norm=float(np.linalg.norm(grad)),
        hessian=None,
        fisher_cov=None,
        iterations=int(res.nit),
        converged=bool(res.success),
        design_condition=liml.scaled_condition_number(prob.w_full[:, ~prob.const]),
        link="np",
        n=data.n,
        names=names,
        method="semiparametric",
        details=details,
    )


def asf_nonparam(theta: Theta, data: Dataset, eta, x, spec: SemiparamSpec | None = None) -> float:
    """Average of the estimated link over the sample controls at covariate value ``x``."""
    spec = spec or SemiparamSpec()
    cmat = liml.control_matrix(eta, data.n)
    gamma = theta.gamma
    rho = theta.rho
    x = np.asarray(x, dtype=float).ravel()
    if x.size != gamma.size or rho.size != cmat.shape[1]:
        raise DomainError("x or theta does not match the data layout")
    w = np.hstack([data.z, data.d]) @ gamma + cmat @ rho
    h = silverman(w) if spec.bandwidth is None else spec.bandwidth
    t = x @ gamma + cmat @ rho
    return float(np.mean(nw_link(w, data.y, h, eval_points=t)))
