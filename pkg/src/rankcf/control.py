"""Rank-based control functions.

First-stage residuals are mapped to relative ranks ``rank / (n + 1)`` and then
through a quantile function. With the standard normal quantile these are the
classical normal scores; the two-piece skew-normal family relaxes normality
of the latent source of endogeneity, and the identity family returns the
residuals themselves (the Dong-style control).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .exceptions import DomainError, UnsupportedOperationError

STD_NORMAL = "normal"
SKEW_NORMAL = "skew"
IDENTITY = "identity"

# Acklam's rational approximation, relative error ~1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT2PI = np.sqrt(2.0 * np.pi)


def _lower_half_quantile(p):
    """Phi^{-1}(p) for p in (0, 0.5], rational approximation plus one Halley step."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = num / den
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    # Halley refinement against an erfc-based cdf; in the lower half erfc keeps
    # full relative precision, so the residual is accurate even for tiny p.
    e = 0.5 * special.erfc(-x / np.sqrt(2.0)) - p
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_quantile(u):
    """Standard normal quantile function, vectorised.

    Absolute error is below 1e-10 on (1e-12, 1 - 1e-12). Inputs outside the
    open unit interval raise :class:`DomainError`.
    """
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise DomainError("quantile argument must lie strictly inside (0, 1)")
    out = np.empty_like(u)
    lower = u <= 0.5
    if np.any(lower):
        out[lower] = _lower_half_quantile(u[lower])
    if np.any(~lower):
        # 1 - u is exact for u > 0.5
        out[~lower] = -_lower_half_quantile(1.0 - u[~lower])
    return out[0] if scalar else out


@dataclass(frozen=True)
class QuantileFamily:
    """Quantile family ``H^{-1}`` used to turn ranks into control values."""

    kind: str = STD_NORMAL
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in (STD_NORMAL, SKEW_NORMAL, IDENTITY):
            raise DomainError(f"unknown quantile family {self.kind!r}")
        if self.kind == SKEW_NORMAL and not -1.0 < self.lam < 1.0:
            raise DomainError("skew parameter must lie in (-1, 1)")

    @classmethod
    def normal(cls):
        return cls(STD_NORMAL)

    @classmethod
    def skew(cls, lam):
        return cls(SKEW_NORMAL, float(lam))

    @classmethod
    def identity(cls):
        return cls(IDENTITY)

    @classmethod
    def parse(cls, text: str) -> QuantileFamily:
        """Parse ``normal``, ``identity`` or ``skew:<lambda>``."""
        text = text.strip().lower()
        if text == STD_NORMAL:
            return cls.normal()
        if text == IDENTITY:
            return cls.identity()
        if text.startswith("skew:"):
            try:
                lam = float(text.split(":", 1)[1])
            except ValueError as exc:
                raise DomainError(f"bad skew parameter in {text!r}") from exc
            return cls.skew(lam)
        raise DomainError(f"unknown control family {text!r}")

    def label(self) -> str:
        return f"skew:{self.lam:g}" if self.kind == SKEW_NORMAL else self.kind


@dataclass(frozen=True)
class ControlFunction:
    """Relative ranks of the residuals and the transformed control values."""

    ranks: np.ndarray
    values: np.ndarray
    family: QuantileFamily


def empirical_ranks(v) -> np.ndarray:
    """Relative empirical ranks ``rank(v_i) / (n + 1)``; ties get midranks."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("empirical_ranks needs at least one observation")
    return rankdata(v, method="average") / (v.size + 1.0)


def skew_normal_quantile(u, lam):
    """Quantile function of the two-piece skew-normal distribution."""
    u = np.asarray(u, dtype=float)
    if not -1.0 < lam < 1.0:
        raise DomainError("skew parameter must lie in (-1, 1)")
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise DomainError("quantile argument must lie strictly inside (0, 1)")
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.empty_like(u)
    left = u < 0.5 * (lam + 1.0)
    if np.any(left):
        out[left] = (1.0 + lam) * normal_quantile(u[left] / (1.0 + lam))
    if np.any(~left):
        # clip guards the breakpoint, where rounding may land exactly on 0.5 +- ulp
        arg = np.clip((u[~left] - lam) / (1.0 - lam), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        out[~left] = (1.0 - lam) * normal_quantile(arg)
    return out[0] if scalar else out


def quantile(family: QuantileFamily, u):
    """Evaluate ``H^{-1}(u)`` for the given family."""
    if family.kind == STD_NORMAL:
        return normal_quantile(u)
    if family.kind == SKEW_NORMAL:
        return skew_normal_quantile(u, family.lam)
    raise UnsupportedOperationError("the identity control has no quantile function")


def build(v_residuals, family: QuantileFamily | None = None) -> ControlFunction:
    """Build the control ``H^{-1}(G_n(V_{i,n}))`` from first-stage residuals."""
    family = family or QuantileFamily.normal()
    v = np.asarray(v_residuals, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise DomainError("residuals must be finite")
    ranks = empirical_ranks(v)
    if family.kind == IDENTITY:
        values = v.copy()
    elif family.kind == STD_NORMAL:
        # reflect integer ranks instead of computing 1 - u, so that the
        # scores of -v are exactly the negated scores of v
        r = rankdata(v, method="average")
        m = v.size + 1.0
        upper = 2.0 * r > m
        values = np.empty_like(v)
        values[~upper] = normal_quantile(r[~upper] / m)
        values[upper] = -normal_quantile((m - r[upper]) / m)
    else:
        values = quantile(family, ranks)
    return ControlFunction(ranks=ranks, values=values, family=family)
