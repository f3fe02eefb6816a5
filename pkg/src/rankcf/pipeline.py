"""End-to-end estimators: first stage, control, likelihood fit.

A :class:`Pipeline` is what the bootstrap re-runs on every resample, so it is
a pure function of the dataset it is handed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import control as cf
from . import first_stage as fs
from . import liml
from . import semiparametric as sp
from .data import Dataset
from .liml import FitResult

NP_LINK = "np"


@dataclass(frozen=True)
class PipelineResult:
    fit: FitResult
    controls: list | None
    first_stages: list = field(default_factory=list)


@dataclass(frozen=True)
class Pipeline:
    """Estimator recipe.

    ``first_stage`` is ``"ols"``, ``"local-linear"`` or ``None`` (no control,
    the plain ML fit). ``link`` is ``"probit"``, ``"logit"`` or ``"np"`` for
    the kernel-estimated link.
    """

    first_stage: str | None = fs.LOCAL_LINEAR
    family: cf.QuantileFamily = field(default_factory=cf.QuantileFamily.normal)
    link: str = "probit"
    first_stage_bandwidth: float | None = None
    semiparam: sp.SemiparamSpec = field(default_factory=sp.SemiparamSpec)
    on_collinear: str = "raise"

    @property
    def semiparametric(self) -> bool:
        return self.link == NP_LINK

    def build_controls(self, data: Dataset):
        if self.first_stage is None:
            return None, []
        stages, controls = [], []
        for j in range(data.p):
            stage = fs.fit(data.z, data.d[:, j], self.first_stage, self.first_stage_bandwidth)
            stages.append(stage)
            controls.append(cf.build(stage.residuals, self.family))
        return controls, stages

    def run(self, data: Dataset, controls=None, start=None) -> PipelineResult:
        """Fit on ``data``; ``controls`` overrides the generated control (infeasible fits).

        ``start`` warm-starts the parametric Newton iterations (bootstrap refits).
        """
        stages = []
        if controls is None:
            controls, stages = self.build_controls(data)
        if self.semiparametric:
            result = sp.fit_semiparam(data, controls, self.semiparam)
        else:
            result = liml.fit(data, controls, self.link, start=start, on_collinear=self.on_collinear)
        return PipelineResult(result, controls, stages)

    def asf(self, result: PipelineResult, data: Dataset, x) -> float:
        if self.semiparametric:
            return sp.asf_nonparam(result.fit.theta, data, result.controls, x, self.semiparam)
        return liml.asf_parametric(result.fit.theta, x, self.link)

    def estimate(self, data: Dataset, asf_at=None, start=None) -> np.ndarray | FitResult:
        """Bootstrap-friendly estimate.

        Returns the fit itself, or, when ``asf_at`` is given, the parameter
        vector with the ASF at that point appended (``None`` if the fit did
        not converge).
        """
        res = self.run(data, start=start)
        if asf_at is None:
            return res.fit
        if not res.fit.converged:
            return None
        return np.append(res.fit.params, self.asf(res, data, asf_at))


def estimator_for(name: str, **overrides) -> Pipeline:
    """Pipelines for the named estimators of the simulation study (CF0 excluded)."""
    ll, ols = fs.LOCAL_LINEAR, fs.OLS
    normal, ident = cf.QuantileFamily.normal(), cf.QuantileFamily.identity()
    table = {
        "ML": dict(first_stage=None),
        "MW1": dict(first_stage=ll, family=normal),
        "MW2": dict(first_stage=ols, family=normal),
        "DONG": dict(first_stage=ll, family=ident),
        "npMW1": dict(first_stage=ll, family=normal, link=NP_LINK),
        "npMW2": dict(first_stage=ols, family=normal, link=NP_LINK),
        "npDONG": dict(first_stage=ll, family=ident, link=NP_LINK),
    }
    if name not in table:
        raise KeyError(f"no pipeline for estimator {name!r}")
    return Pipeline(**{**table[name], **overrides})
