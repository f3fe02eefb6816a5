"""Limited-information maximum likelihood with a generated control.

The binary response model is augmented with the control ``eta`` so that the
index is ``w = X'gamma + rho eta`` and the per-observation log-likelihood is
``y ln F(w) + (1 - y) ln(1 - F(w))``. Score and Hessian are
``mean(W psi)`` and ``mean(W W' psi_dot)`` with ``W = (X', eta)'``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import control as cf
from .data import Dataset
from .exceptions import CollinearityError, DomainError, NumericalError, ShapeError, UnsupportedOperationError
from .links import get_link

logger = logging.getLogger(__name__)

SCORE_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30
COND_LIMIT = 1e8


@dataclass(frozen=True)
class Theta:
    """Coefficients ordered like ``W``: exogenous ``alpha``, endogenous ``beta``, controls ``rho``."""

    alpha: np.ndarray
    beta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "rho"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    @classmethod
    def from_vector(cls, vec, k, p, q=None):
        """Split a ``(k + p + q)`` vector; ``q`` defaults to whatever is left."""
        vec = np.asarray(vec, dtype=float).ravel()
        q = vec.size - k - p if q is None else q
        if q < 0 or vec.size != k + p + q:
            raise ShapeError(f"vector of length {vec.size} does not split into ({k}, {p}, {q})")
        return cls(vec[:k], vec[k:k + p], vec[k + p:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta, self.rho])

    @property
    def gamma(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])


@dataclass(frozen=True)
class FitResult:
    theta: Theta
    loglik: float
    score_norm: float
    hessian: np.ndarray | None
    fisher_cov: np.ndarray | None
    iterations: int
    converged: bool
    design_condition: float
    link: str
    n: int
    names: tuple[str, ...]
    method: str = "liml"
    details: dict = field(default_factory=dict)

    @property
    def params(self) -> np.ndarray:
        return self.theta.to_vector()

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "method": self.method,
            "link": self.link,
            "n": self.n,
            "names": list(self.names),
            "theta": dict(zip(self.names, self.params.tolist())),
            "loglik": self.loglik,
            "score_norm": self.score_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "design_condition": self.design_condition,
            "hessian": arr(self.hessian),
            "fisher_cov": arr(self.fisher_cov),
            "details": self.details,
        }


def control_matrix(eta, n: int) -> np.ndarray:
    """Stack controls into an ``(n, q)`` matrix.

    Accepts ``None``, a :class:`~rankcf.control.ControlFunction`, an array, or
    a sequence of either (one control per endogenous regressor).
    """
    if eta is None:
        return np.empty((n, 0))
    if isinstance(eta, cf.ControlFunction):
        cols = [eta.values]
    elif isinstance(eta, np.ndarray):
        cols = [eta] if eta.ndim == 1 else list(eta.T)
    else:
        cols = [e.values if isinstance(e, cf.ControlFunction) else np.asarray(e, dtype=float) for e in eta]
    mat = np.column_stack([np.asarray(c, dtype=float).ravel() for c in cols]) if cols else np.empty((n, 0))
    if mat.shape[0] != n:
        raise ShapeError(f"control has {mat.shape[0]} rows, data has {n}")
    if not np.all(np.isfinite(mat)):
        raise DomainError("control values must be finite")
    return mat


def design(data: Dataset, eta=None) -> np.ndarray:
    """Augmented regressor matrix ``W = (Z, D, eta)``."""
    return np.hstack([data.z, data.d, control_matrix(eta, data.n)])


def coefficient_names(data: Dataset, q: int) -> tuple[str, ...]:
    rho = ("rho",) if q == 1 else tuple(f"rho_{j + 1}" for j in range(q))
    return tuple(data.z_names) + tuple(data.d_names) + rho


def scaled_condition_number(w: np.ndarray) -> float:
    """Condition number of ``w`` after scaling every column to unit length."""
    norms = np.linalg.norm(w, axis=0)
    if np.any(norms == 0):
        return np.inf
    s = np.linalg.svd(w / norms, compute_uv=False)
    return np.inf if s[-1] == 0 else float(s[0] / s[-1])


def _theta_vector(theta) -> np.ndarray:
    return theta.to_vector() if isinstance(theta, Theta) else np.asarray(theta, dtype=float).ravel()


def _index(theta, w_mat):
    vec = _theta_vector(theta)
    if vec.size != w_mat.shape[1]:
        raise ShapeError(f"theta has {vec.size} entries, design has {w_mat.shape[1]} columns")
    return w_mat @ vec


def psi(theta, y, x, eta_i, link="probit"):
    """Generalized residual at ``w = x'gamma + rho eta_i``."""
    vec = _theta_vector(theta)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    eta_i = np.atleast_2d(np.asarray(eta_i, dtype=float)).reshape(x.shape[0], -1)
    w = np.hstack([x, eta_i]) @ vec
    out = get_link(link).psi(np.asarray(y, dtype=float), w)
    return out[0] if out.size == 1 else out


def psi_dot(theta, y, x, eta_i, link="probit"):
    """Derivative of :func:`psi` with respect to the index."""
    vec = _theta_vector(theta)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    eta_i = np.atleast_2d(np.asarray(eta_i, dtype=float)).reshape(x.shape[0], -1)
    w = np.hstack([x, eta_i]) @ vec
    out = get_link(link).psi_dot(np.asarray(y, dtype=float), w)
    return out[0] if out.size == 1 else out


def _loglik_w(link, y, w):
    return float(np.mean(y * link.logcdf(w) + (1.0 - y) * link.logsf(w)))


def loglik(theta, data: Dataset, eta=None, link="probit") -> float:
    """Mean log-likelihood over the sample."""
    link = get_link(link)
    return _loglik_w(link, data.y, _index(theta, design(data, eta)))


def score(theta, data: Dataset, eta=None, link="probit") -> np.ndarray:
    """Mean score ``n^{-1} sum W_i psi_i``."""
    link = get_link(link)
    w_mat = design(data, eta)
    return w_mat.T @ link.psi(data.y, _index(theta, w_mat)) / data.n


def hessian(theta, data: Dataset, eta=None, link="probit") -> np.ndarray:
    """Mean Hessian ``n^{-1} sum W_i W_i' psi_dot_i`` (the Jacobian of :func:`score`)."""
    link = get_link(link)
    w_mat = design(data, eta)
    pd = link.psi_dot(data.y, _index(theta, w_mat))
    return (w_mat.T * pd) @ w_mat / data.n


def _newton(w_mat, y, link, start, tol, max_iter, max_halvings):
    """Safeguarded Newton-Raphson on the mean log-likelihood."""
    n = y.size
    theta = start.copy()
    ll = _loglik_w(link, y, w_mat @ theta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = w_mat @ theta
        g = w_mat.T @ link.psi(y, w) / n
        if np.linalg.norm(g) < tol:
            converged = True
            it -= 1
            break
        h = (w_mat.T * link.psi_dot(y, w)) @ w_mat / n
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, -g, rcond=None)[0]
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = theta + t * step
            ll_new = _loglik_w(link, y, w_mat @ cand)
            if np.isfinite(ll_new) and ll_new >= ll:
                break
            t *= 0.5
        else:
            # no ascent along the Newton direction: either at the optimum up to
            # rounding or stuck; the final score check decides which
            break
        theta, ll = cand, ll_new
    w = w_mat @ theta
    g = w_mat.T @ link.psi(y, w) / n
    gnorm = float(np.linalg.norm(g))
    converged = gnorm < tol
    return theta, ll, gnorm, it, converged


def fit(
    data: Dataset,
    eta=None,
    link="probit",
    *,
    start=None,
    tol: float = SCORE_TOL,
    max_iter: int = MAX_ITER,
    max_halvings: int = MAX_HALVINGS,
    cond_limit: float = COND_LIMIT,
    on_collinear: str = "raise",
) -> FitResult:
    """Maximize the control-augmented likelihood.

    ``eta=None`` gives the plain probit/logit fit that ignores endogeneity.
    Control columns that are identically zero carry no information and are
    left out of the optimization (their coefficient is reported as 0).
    With ``on_collinear="drop"`` a collinear design falls back to the fit
    without controls and reports the control coefficients as NaN, the way
    aliased coefficients are dropped by most regression software; the default
    raises :class:`CollinearityError`.
    """
    data.require_estimable()
    link = get_link(link)
    cmat = control_matrix(eta, data.n)
    q = cmat.shape[1]
    x = data.x
    names = coefficient_names(data, q)
    active = np.array([np.any(cmat[:, j] != 0) for j in range(q)], dtype=bool)
    w_mat = np.hstack([x, cmat[:, active]])
    cond = scaled_condition_number(w_mat)
    if not cond <= cond_limit:
        if on_collinear == "drop" and q > 0:
            res = fit(data, None, link, tol=tol, max_iter=max_iter, max_halvings=max_halvings, cond_limit=cond_limit)
            theta = Theta(res.theta.alpha, res.theta.beta, np.full(q, np.nan))
            details = dict(res.details, dropped_controls=True, collinear_condition=cond)
            return FitResult(theta, res.loglik, res.score_norm, res.hessian, res.fisher_cov, res.iterations,
                             res.converged, cond, link.name, data.n, names, details=details)
        raise CollinearityError(
            f"augmented design is collinear (scaled condition number {cond:.3g} > {cond_limit:g})", cond
        )

    m = w_mat.shape[1]
    if start is not None:
        theta0 = _theta_vector(start)
        if theta0.size == x.shape[1] + q:
            theta0 = np.concatenate([theta0[: x.shape[1]], theta0[x.shape[1]:][active]])
        if theta0.size != m:
            raise ShapeError(f"start has {theta0.size} entries, expected {m}")
    elif active.any():
        # consistent under exogeneity and inside the concave region
        ml = _newton(x, data.y, link, np.zeros(x.shape[1]), tol, max_iter, max_halvings)[0]
        theta0 = np.concatenate([ml, np.zeros(int(active.sum()))])
    else:
        theta0 = np.zeros(m)

    est, ll, gnorm, iters, converged = _newton(w_mat, data.y, link, theta0, tol, max_iter, max_halvings)
    if not converged:
        logger.debug("Newton did not converge: |score|=%.3g after %d iterations", gnorm, iters)

    w = w_mat @ est
    h_act = (w_mat.T * link.psi_dot(data.y, w)) @ w_mat / data.n
    full = np.zeros(x.shape[1] + q)
    full[: x.shape[1]] = est[: x.shape[1]]
    full[x.shape[1]:][active] = est[x.shape[1]:]
    idx = np.concatenate([np.arange(x.shape[1]), x.shape[1] + np.flatnonzero(active)])
    hess = np.zeros((full.size, full.size))
    hess[np.ix_(idx, idx)] = h_act
    cov = np.full_like(hess, np.nan)
    try:
        cov_act = -np.linalg.inv(h_act) / data.n
        cov[np.ix_(idx, idx)] = cov_act
        cov[~np.isin(np.arange(full.size), idx), :] = 0.0
        cov[:, ~np.isin(np.arange(full.size), idx)] = 0.0
    except np.linalg.LinAlgError:
        pass
    theta = Theta.from_vector(full, data.k, data.p, q)
    return FitResult(theta, ll, gnorm, hess, cov, iters, converged, cond, link.name, data.n, names)


def asf_parametric(theta, x, link="probit") -> float:
    """Probit average structural function ``Phi((alpha'z + beta d) / sqrt(1 + rho^2))``.

    ``x = (z', d)'`` includes the constant. Only the probit link and a single
    control are supported.
    """
    link = get_link(link)
    if link.name != "probit":
        raise UnsupportedOperationError("the closed-form ASF is only available for the probit link")
    x = np.asarray(x, dtype=float).ravel()
    gamma = theta.gamma
    if x.size != gamma.size:
        raise ShapeError(f"x has {x.size} entries, expected {gamma.size}")
    rho = theta.rho[np.isfinite(theta.rho)]
    if rho.size > 1:
        raise UnsupportedOperationError("closed-form ASF needs a single control")
    rho2 = float(rho[0] ** 2) if rho.size else 0.0
    return float(special.ndtr(x @ gamma / np.sqrt(1.0 + rho2)))


def profile_loglik_lambda(data: Dataset, residuals, link="probit", lambda_grid=(0.0,)):
    """Refit over a grid of skew parameters and return ``[(lambda, loglik), ...]``.

    ``residuals`` are first-stage residuals, one column per endogenous
    regressor. Fits that fail numerically contribute NaN.
    """
    grid = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if grid.size == 0:
        raise DomainError("lambda grid is empty")
    if np.any(np.abs(grid) >= 1.0):
        raise DomainError("lambda grid must lie inside (-1, 1)")
    res = np.asarray(residuals, dtype=float)
    res = res[:, None] if res.ndim == 1 else res
    out = []
    for lam in grid:
        family = cf.QuantileFamily.skew(lam)
        controls = [cf.build(res[:, j], family) for j in range(res.shape[1])]
        try:
            ll = fit(data, controls, link).loglik
        except NumericalError:
            ll = np.nan
        out.append((float(lam), float(ll)))
    return out
