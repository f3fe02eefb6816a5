"""Probit and logit links.

Each link provides the cdf ``F``, density ``f`` and its derivative ``f'``,
log-cdf/log-survival for the likelihood, and the generalized residual
``psi = (y - F) f / (F (1 - F))`` with its index derivative ``psi_dot``.
The closed forms below are algebraically identical to the general formula
but stay finite far into the tails; :func:`psi_general` and
:func:`psi_dot_general` keep the textbook expressions for cross-checking.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .exceptions import DomainError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
F_CLAMP = 1e-12


class Probit:
    name = "probit"

    @staticmethod
    def cdf(w):
        return special.ndtr(w)

    @staticmethod
    def pdf(w):
        return np.exp(-0.5 * np.square(w) - _LOG_SQRT_2PI)

    @staticmethod
    def dpdf(w):
        return -w * Probit.pdf(w)

    @staticmethod
    def logcdf(w):
        return special.log_ndtr(w)

    @staticmethod
    def logsf(w):
        return special.log_ndtr(-w)

    @staticmethod
    def mills(w):
        """Inverse Mills ratio ``phi(w) / Phi(w)``, computed in log space."""
        return np.exp(-0.5 * np.square(w) - _LOG_SQRT_2PI - special.log_ndtr(w))

    @staticmethod
    def psi(y, w):
        sign = np.where(y > 0.5, 1.0, -1.0)
        return sign * Probit.mills(sign * w)

    @staticmethod
    def psi_dot(y, w):
        # -lambda(s)(s + lambda(s)) with s = w for y = 1 and s = -w for y = 0
        s = np.where(y > 0.5, w, -w)
        lam = Probit.mills(s)
        return -lam * (s + lam)


class Logit:
    name = "logit"

    @staticmethod
    def cdf(w):
        return special.expit(w)

    @staticmethod
    def pdf(w):
        p = special.expit(w)
        return p * (1.0 - p)

    @staticmethod
    def dpdf(w):
        p = special.expit(w)
        return p * (1.0 - p) * (1.0 - 2.0 * p)

    @staticmethod
    def logcdf(w):
        return special.log_expit(w)

    @staticmethod
    def logsf(w):
        return special.log_expit(-w)

    @staticmethod
    def psi(y, w):
        return y - special.expit(w)

    @staticmethod
    def psi_dot(y, w):
        p = special.expit(w)
        return -p * (1.0 - p)


LINKS = {"probit": Probit, "logit": Logit}


def get_link(link):
    if isinstance(link, str):
        try:
            return LINKS[link.lower()]
        except KeyError:
            raise DomainError(f"unknown link {link!r}") from None
    return link


def psi_general(link, y, w):
    """``(y - F) f / (F (1 - F))`` with ``F`` clamped away from 0 and 1."""
    link = get_link(link)
    F = np.clip(link.cdf(w), F_CLAMP, 1.0 - F_CLAMP)
    return (y - F) / (F * (1.0 - F)) * link.pdf(w)


def psi_dot_general(link, y, w):
    link = get_link(link)
    F = np.clip(link.cdf(w), F_CLAMP, 1.0 - F_CLAMP)
    ratio = (y - F) / (F * (1.0 - F))
    return ratio * link.dpdf(w) - np.square(ratio * link.pdf(w))
