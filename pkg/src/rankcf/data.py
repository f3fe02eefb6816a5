"""The :class:`Dataset` container shared by every estimator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeError


@dataclass(frozen=True)
class Dataset:
    """Binary outcome ``y``, exogenous ``z`` (first column constant) and endogenous ``d``.

    ``d`` is stored as an ``(n, p)`` matrix; ``p`` is 1 in the usual
    single-endogenous-regressor model and larger when several endogenous
    columns each get their own additive control.
    """

    y: np.ndarray
    z: np.ndarray
    d: np.ndarray
    z_names: tuple[str, ...] = field(default=())
    d_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        z = np.asarray(self.z, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if d.ndim == 1:
            d = d[:, None]
        n = y.shape[0]
        if z.shape[0] != n or d.shape[0] != n:
            raise ShapeError(
                f"row counts disagree: y={n}, z={z.shape[0]}, d={d.shape[0]}"
            )
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ShapeError("y must be binary (0/1)")
        for name, arr in (("z", z), ("d", d)):
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} contains non-finite entries")
        if n < 1:
            raise ShapeError("dataset has no rows")
        z_names = tuple(self.z_names) or _default_z_names(z.shape[1])
        d_names = tuple(self.d_names) or tuple(
            "d" if d.shape[1] == 1 else f"d{j + 1}" for j in range(d.shape[1])
        )
        if len(z_names) != z.shape[1] or len(d_names) != d.shape[1]:
            raise ShapeError("column names do not match the matrix widths")
        for arr in (y, z, d):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "z_names", z_names)
        object.__setattr__(self, "d_names", d_names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.z.shape[1]

    @property
    def p(self) -> int:
        return self.d.shape[1]

    @property
    def x(self) -> np.ndarray:
        """Regressor matrix ``X = (Z, D)``."""
        return np.hstack([self.z, self.d])

    def take(self, idx) -> Dataset:
        """Rows ``idx`` as a new dataset (used by the pairs bootstrap)."""
        idx = np.asarray(idx)
        return Dataset(self.y[idx], self.z[idx], self.d[idx], self.z_names, self.d_names)

    def mean_x(self) -> np.ndarray:
        return self.x.mean(axis=0)

    def require_estimable(self) -> None:
        """Estimation needs ``n >= k + 2``; small files can still be parsed and inspected."""
        if self.n < self.k + 2:
            raise ShapeError(f"need n >= k + 2 observations to estimate, got n={self.n}, k={self.k}")


def _default_z_names(k):
    return ("const",) + tuple(f"z{j}" if k > 2 else "z" for j in range(1, k))
