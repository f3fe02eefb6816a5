"""Synthetic data from the probit Monte Carlo design.

``Y = 1{a0 + a1 Z + b D + rho m(V) + E > 0}`` with ``D = pi(Z) + V``,
``Z, E ~ N(0, 1)`` and ``m(V) = Phi^{-1}(G(V))`` computed with the true cdf
``G`` of ``V`` so that ``m(V)`` is exactly standard normal.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import special, stats

from .control import normal_quantile
from .data import Dataset
from .exceptions import ConfigError

LINEAR = "linear"
QUADRATIC = "quadratic"
STD_NORMAL = "normal"
CENTERED_GAMMA = "gamma22"

# Gamma(shape=2, rate=2): mean 1, variance 1/2; centred by subtracting the mean.
_GAMMA_SHAPE = 2.0
_GAMMA_RATE = 2.0
_GAMMA_MEAN = _GAMMA_SHAPE / _GAMMA_RATE


@dataclass(frozen=True)
class DgpConfig:
    alpha0: float = 0.5
    alpha1: float = 1.0
    beta: float = 1.0
    rho: float = 0.5
    pi_shape: str = QUADRATIC
    v_dist: str = STD_NORMAL
    n: int = 500
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"sample size must be an integer >= 2, got {self.n}")
        for name in ("alpha0", "alpha1", "beta", "rho"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.pi_shape not in (LINEAR, QUADRATIC):
            raise ConfigError(f"unknown pi_shape {self.pi_shape!r}")
        if self.v_dist not in (STD_NORMAL, CENTERED_GAMMA):
            raise ConfigError(f"unknown v_dist {self.v_dist!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def with_seed(self, seed: int) -> DgpConfig:
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> DgpConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown DGP fields: {sorted(unknown)}")
        return cls(**d)

    @property
    def theta(self) -> np.ndarray:
        """True ``(alpha0, alpha1, beta, rho)``."""
        return np.array([self.alpha0, self.alpha1, self.beta, self.rho])

    def pi(self, z):
        return z if self.pi_shape == LINEAR else z * z

    def mean_pi(self) -> float:
        """Population mean of ``pi(Z)`` for standard normal ``Z``."""
        return 0.0 if self.pi_shape == LINEAR else 1.0


@dataclass(frozen=True)
class SimSample:
    dataset: Dataset
    v_true: np.ndarray
    m_v_true: np.ndarray
    e_true: np.ndarray


def v_cdf_transform(v, v_dist):
    """``m(v) = Phi^{-1}(G(v))`` using the true cdf of ``V``.

    The upper half is computed from the survival function so that the
    transform stays accurate in the right tail.
    """
    v = np.asarray(v, dtype=float)
    if v_dist == STD_NORMAL:
        return v.copy()
    x = v + _GAMMA_MEAN
    cdf = stats.gamma.cdf(x, _GAMMA_SHAPE, scale=1.0 / _GAMMA_RATE)
    sf = stats.gamma.sf(x, _GAMMA_SHAPE, scale=1.0 / _GAMMA_RATE)
    out = np.empty_like(v)
    lo = cdf <= 0.5
    out[lo] = normal_quantile(np.clip(cdf[lo], 1e-300, None))
    out[~lo] = -normal_quantile(np.clip(sf[~lo], 1e-300, None))
    return out


def _draw_v(rng, v_dist, n):
    if v_dist == STD_NORMAL:
        return rng.standard_normal(n)
    return rng.gamma(_GAMMA_SHAPE, 1.0 / _GAMMA_RATE, size=n) - _GAMMA_MEAN


def generate(config: DgpConfig) -> SimSample:
    """Draw one sample; the result is a deterministic function of ``config``."""
    rng = np.random.default_rng(int(config.seed))
    n = int(config.n)
    z = rng.standard_normal(n)
    v = _draw_v(rng, config.v_dist, n)
    e = rng.standard_normal(n)
    m_v = v_cdf_transform(v, config.v_dist)
    d = config.pi(z) + v
    latent = config.alpha0 + config.alpha1 * z + config.beta * d + config.rho * m_v + e
    y = (latent > 0).astype(float)
    data = Dataset(y=y, z=np.column_stack([np.ones(n), z]), d=d)
    return SimSample(dataset=data, v_true=v, m_v_true=m_v, e_true=e)


def true_asf(config: DgpConfig, z: float, d: float) -> float:
    """Average structural function at ``(1, z, d)`` under the probit design."""
    index = config.alpha0 + config.alpha1 * z + config.beta * d
    return float(special.ndtr(index / np.sqrt(1.0 + config.rho**2)))


def simulate_asf(config: DgpConfig, z: float, d: float, draws: int = 1_000_000, seed: int = 0) -> float:
    """Simulation estimate of ``P(a0 + a1 z + b d + rho m(V) + E > 0)``.

    Draws ``V`` and ``E`` directly from the design, so it does not rely on
    ``m(V)`` being normal; it serves as an independent check of :func:`true_asf`.
    """
    rng = np.random.default_rng(seed)
    v = _draw_v(rng, config.v_dist, draws)
    e = rng.standard_normal(draws)
    latent = config.alpha0 + config.alpha1 * z + config.beta * d + config.rho * v_cdf_transform(v, config.v_dist) + e
    return float(np.mean(latent > 0))


def population_mean_x(config: DgpConfig) -> np.ndarray:
    """``E[X] = (1, E[Z], E[D])``."""
    return np.array([1.0, 0.0, config.mean_pi()])
