"""Pairs bootstrap, delta-method ASF standard errors and t-statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .data import Dataset
from .exceptions import DomainError, RankCFError, ShapeError, UnreliableBootstrapError
from .liml import FitResult, Theta

logger = logging.getLogger(__name__)

MAX_FAILED_SHARE = 0.2
BLOWUP = 100.0


@dataclass(frozen=True)
class CovarianceEstimate:
    """Covariance of ``sqrt(n) (theta_n - theta_0)``.

    ``sigma / n`` is the covariance of the estimate itself; standard errors
    are ``sqrt(diag(sigma) / n)``.
    """

    sigma: np.ndarray
    n: int
    b_used: int = 0
    b_failed: int = 0
    method: str = "bootstrap"

    @property
    def cov(self) -> np.ndarray:
        return self.sigma / self.n

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.sigma), 0.0, None) / self.n)

    @classmethod
    def from_fisher(cls, fit: FitResult) -> CovarianceEstimate:
        """Observed-information covariance, valid under the no-endogeneity null."""
        if fit.fisher_cov is None:
            raise DomainError("fit carries no Fisher covariance")
        return cls(sigma=fit.fisher_cov * fit.n, n=fit.n, method="fisher")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "sigma": self.sigma.tolist(),
            "n": self.n,
            "b_used": self.b_used,
            "b_failed": self.b_failed,
        }


def _as_vector(out):
    """Estimator output to a parameter vector; ``None`` marks a failed replication."""
    if out is None:
        return None
    if isinstance(out, FitResult):
        if not out.converged:
            return None
        out = out.params
    vec = np.asarray(out, dtype=float).ravel()
    if not np.all(np.isfinite(vec)) or np.any(np.abs(vec) > BLOWUP):
        return None
    return vec


def bootstrap_seed_sequence(seed, b):
    return np.random.SeedSequence([int(seed), int(b)])


def pairs_bootstrap(
    data: Dataset,
    estimator: Callable[[Dataset], object],
    B: int,
    seed: int,
    *,
    theta_hat=None,
    max_failed_share: float = MAX_FAILED_SHARE,
) -> CovarianceEstimate:
    """``Sigma_{n,B} = n / B sum_b (theta_b - theta_n)(theta_b - theta_n)'``.

    ``estimator`` maps a dataset to a parameter vector (or a
    :class:`FitResult`) and must re-run the whole pipeline, first stage and
    ranks included. Replications that raise a package error, fail to converge,
    or produce non-finite or exploding (> 100) estimates are dropped and
    counted; more than ``max_failed_share`` of them raises
    :class:`UnreliableBootstrapError`. Replication ``b`` draws its indices from
    its own seed derived from ``(seed, b)``, so the result does not depend on
    evaluation order.
    """
    if B < 2:
        raise DomainError("need at least two bootstrap replications")
    n = data.n
    if theta_hat is None:
        theta_hat = _as_vector(estimator(data))
        if theta_hat is None:
            raise UnreliableBootstrapError("estimate on the original sample failed", 0, 0)
    theta_hat = np.asarray(theta_hat, dtype=float).ravel()
    dev_sum = np.zeros((theta_hat.size, theta_hat.size))
    used = failed = 0
    for b in range(B):
        rng = np.random.default_rng(bootstrap_seed_sequence(seed, b))
        idx = rng.integers(0, n, size=n)
        try:
            vec = _as_vector(estimator(data.take(idx)))
        except RankCFError as exc:
            logger.debug("bootstrap replication %d failed: %s", b, exc)
            vec = None
        if vec is None:
            failed += 1
            continue
        if vec.size != theta_hat.size:
            raise ShapeError("estimator returned vectors of varying length")
        dev = vec - theta_hat
        dev_sum += np.outer(dev, dev)
        used += 1
    if failed > max_failed_share * B or used < 2:
        raise UnreliableBootstrapError(
            f"{failed} of {B} bootstrap replications failed", used, failed
        )
    sigma = n / used * dev_sum
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceEstimate(sigma=sigma, n=n, b_used=used, b_failed=failed)


def asf_gradient(theta: Theta, x) -> np.ndarray:
    """Gradient of the probit ASF with respect to ``(alpha, beta, rho)``."""
    x = np.asarray(x, dtype=float).ravel()
    gamma = theta.gamma
    if x.size != gamma.size:
        raise ShapeError(f"x has {x.size} entries, expected {gamma.size}")
    if theta.rho.size > 1:
        raise DomainError("closed-form ASF gradient needs at most one control")
    rho = float(theta.rho[0]) if theta.rho.size else 0.0
    s2 = 1.0 + rho * rho
    c = x @ gamma / np.sqrt(s2)
    dens = np.exp(-0.5 * c * c) / np.sqrt(2.0 * np.pi)
    grad = dens * x / np.sqrt(s2)
    if theta.rho.size:
        grad = np.append(grad, -dens * c * rho / s2)
    return grad


def delta_method_asf(theta: Theta, sigma: CovarianceEstimate, x) -> tuple[float, float]:
    """ASF estimate and its delta-method standard error ``sqrt(g' Sigma g / n)``."""
    grad = asf_gradient(theta, x)
    if sigma.sigma.shape != (grad.size, grad.size):
        raise ShapeError("covariance does not match the parameter vector")
    eig_min = np.min(np.linalg.eigvalsh(sigma.sigma)) if grad.size else 0.0
    scale = max(1.0, float(np.max(np.abs(sigma.sigma))))
    if eig_min < -1e-10 * scale:
        raise DomainError("covariance is not positive semidefinite")
    rho = float(theta.rho[0]) if theta.rho.size else 0.0
    c = np.asarray(x, dtype=float) @ theta.gamma / np.sqrt(1.0 + rho * rho)
    var = float(grad @ sigma.sigma @ grad) / sigma.n
    return float(special.ndtr(c)), float(np.sqrt(max(var, 0.0)))


class TStats(NamedTuple):
    t: np.ndarray
    se: np.ndarray
    degenerate: np.ndarray  # zero standard error


def t_statistics(theta, cov, null_values) -> TStats:
    """``(theta_j - theta0_j) / se_j``.

    ``cov`` is a :class:`CovarianceEstimate` or a covariance matrix of the
    estimate itself (already divided by ``n``). A zero standard error yields
    an infinite (or NaN for a zero numerator) statistic and is flagged.
    """
    est = theta.to_vector() if isinstance(theta, Theta) else np.asarray(theta, dtype=float).ravel()
    null = np.broadcast_to(np.asarray(null_values, dtype=float), est.shape)
    if isinstance(cov, CovarianceEstimate):
        se = cov.se
    else:
        se = np.sqrt(np.clip(np.diag(np.asarray(cov, dtype=float)), 0.0, None))
    if se.shape != est.shape:
        raise ShapeError("covariance does not match the parameter vector")
    diff = est - null
    degenerate = se == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = diff / se
    return TStats(t=t, se=se, degenerate=degenerate)
