"""Monte Carlo harness for the simulation study.

Each replication draws a sample, runs every requested estimator, tests each
reported quantity against its true value with a two-sided 5% t-test and
records the outcome. :func:`run_experiment` aggregates the replications into
mean / std / rmse / size per estimator and quantity.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import dgp as dgp_mod
from . import inference, liml
from .exceptions import ConfigError, DomainError, RankCFError, UnreliableBootstrapError
from .pipeline import Pipeline, estimator_for

logger = logging.getLogger(__name__)

ESTIMATORS = ("ML", "CF0", "MW1", "MW2", "DONG", "npMW1", "npMW2", "npDONG")
PARAMETRIC_PARAMS = ("alpha0", "alpha1", "beta", "rho", "asf")
SEMIPARAMETRIC_PARAMS = ("beta", "rho", "asf")
CRITICAL_VALUE = 1.96
BLOWUP = 100.0
MEAN_X = "mean_x"
POPULATION_MEAN_X = "population_mean_x"


def derive_seed(base_seed, *keys) -> int:
    """64-bit seed for ``(base_seed, *keys)``; independent of evaluation order."""
    ss = np.random.SeedSequence([int(base_seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: dgp_mod.DgpConfig = field(default_factory=dgp_mod.DgpConfig)
    replications: int = 300
    estimators: tuple[str, ...] = ("ML", "CF0", "MW1", "MW2", "DONG")
    boot_b: dict = field(default_factory=lambda: {"parametric": 199, "semiparametric": 49})
    base_seed: int = 0
    asf_eval: str = MEAN_X
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}")
        if self.asf_eval not in (MEAN_X, POPULATION_MEAN_X):
            raise ConfigError(f"unknown asf_eval {self.asf_eval!r}")
        for key in ("parametric", "semiparametric"):
            b = self.boot_b.get(key, 0)
            if b != 0 and b < 2:
                raise ConfigError("bootstrap replications must be 0 (no inference) or >= 2")
        object.__setattr__(self, "estimators", tuple(self.estimators))

    @classmethod
    def full_fidelity(cls, **kwargs) -> ExperimentConfig:
        """1,000 replications with 499 / 99 bootstrap draws."""
        return cls(replications=1000, boot_b={"parametric": 499, "semiparametric": 99}, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        if "dgp" in d:
            dgp_fields = dict(d["dgp"])
            dgp_fields.setdefault("seed", 0)
            d["dgp"] = dgp_mod.DgpConfig.from_dict(dgp_fields)
        if "estimators" in d:
            d["estimators"] = tuple(d["estimators"])
        if "boot_b" in d:
            d["boot_b"] = {"parametric": 199, "semiparametric": 49, **d["boot_b"]}
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dgp"].pop("seed", None)
        out["estimators"] = list(self.estimators)
        return out


@dataclass(frozen=True)
class MetricRow:
    estimator: str
    parameter: str
    truth: float
    mean: float
    std: float
    rmse: float
    size: float
    failures: int
    used: int


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricRow, ...]
    config: dict = field(default_factory=dict)

    def get(self, estimator: str, parameter: str) -> MetricRow:
        for row in self.rows:
            if row.estimator == estimator and row.parameter == parameter:
                return row
        raise KeyError((estimator, parameter))

    def failures(self, estimator: str) -> int:
        return next(r.failures for r in self.rows if r.estimator == estimator)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["estimator", "parameter", "mean", "std", "rmse", "size", "failures"])
        for r in self.rows:
            writer.writerow([r.estimator, r.parameter, _fmt(r.mean), _fmt(r.std), _fmt(r.rmse), _fmt(r.size), r.failures])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in asdict(r).items()} for r in self.rows]
        return json.dumps({"config": self.config, "rows": rows}, indent=2)

    def format(self) -> str:
        lines = [f"{'estimator':<8} {'param':<7} {'truth':>8} {'mean':>8} {'std':>8} {'rmse':>8} {'size':>6} {'fail':>5}"]
        for r in self.rows:
            lines.append(
                f"{r.estimator:<8} {r.parameter:<7} {r.truth:8.4f} {r.mean:8.4f} {r.std:8.4f} "
                f"{r.rmse:8.4f} {r.size:6.3f} {r.failures:5d}"
            )
        return "\n".join(lines)


def _fmt(v):
    return "" if not np.isfinite(v) else f"{v:.6g}"


def summarize(estimates, truths, rejections=None) -> dict:
    """Mean, std (divisor R - 1), rmse and rejection frequency per column.

    ``truths`` is a vector (one per column) or an ``R x p`` matrix when the
    target varies across replications. NaN entries (a quantity an estimator
    does not report in some replication) are ignored column by column.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    if est.shape[0] == 0:
        raise DomainError("summarize needs at least one replication")
    truth = np.broadcast_to(np.asarray(truths, dtype=float), est.shape)
    p = est.shape[1]
    mean = np.full(p, np.nan)
    std = np.full(p, np.nan)
    rmse = np.full(p, np.nan)
    size = np.full(p, np.nan)
    rej = None if rejections is None else np.broadcast_to(np.asarray(rejections, dtype=float), est.shape)
    for j in range(p):
        ok = np.isfinite(est[:, j])
        if not ok.any():
            continue
        col = est[ok, j]
        mean[j] = col.mean()
        std[j] = col.std(ddof=1) if col.size > 1 else 0.0
        rmse[j] = np.sqrt(np.mean((col - truth[ok, j]) ** 2))
        if rej is not None:
            r = rej[ok, j]
            r = r[np.isfinite(r)]
            if r.size:
                size[j] = r.mean()
    return {"mean": mean, "std": std, "rmse": rmse, "size": size}


def _param_names(estimator):
    return SEMIPARAMETRIC_PARAMS if estimator.startswith("np") else PARAMETRIC_PARAMS


def _run_one(estimator, sample, cfg: ExperimentConfig, x_eval, boot_seed):
    """Estimates and rejection flags for one estimator on one sample.

    Returns ``(estimates, rejections)`` aligned with ``_param_names``;
    raises a package error when the replication counts as a failure.
    """
    data = sample.dataset
    names = _param_names(estimator)
    truth = cfg.dgp.theta
    asf_truth = dgp_mod.true_asf(cfg.dgp, x_eval[1], x_eval[2])
    targets = dict(zip(("alpha0", "alpha1", "beta", "rho"), truth), asf=asf_truth)

    if estimator in ("ML", "CF0"):
        controls = None if estimator == "ML" else sample.m_v_true
        fit = liml.fit(data, controls, "probit", on_collinear="drop")
        _check_fit(fit)
        vec = fit.params
        keep = np.isfinite(vec)
        cov = fit.fisher_cov
        if cov.shape[0] != vec.size:  # controls dropped as collinear
            cov_full = np.zeros((vec.size, vec.size))
            cov_full[np.ix_(keep, keep)] = cov
            cov = cov_full
        sigma = inference.CovarianceEstimate(cov * data.n, data.n, method="fisher")
        est = dict(zip(("alpha0", "alpha1", "beta", "rho"), vec))
        se = dict(zip(("alpha0", "alpha1", "beta", "rho"), sigma.se))
        theta = liml.Theta(fit.theta.alpha, fit.theta.beta, fit.theta.rho[np.isfinite(fit.theta.rho)])
        sig_asf = inference.CovarianceEstimate(cov[np.ix_(keep, keep)] * data.n, data.n, method="fisher")
        est["asf"], se["asf"] = inference.delta_method_asf(theta, sig_asf, x_eval)
    else:
        pipe = estimator_for(estimator)
        res = pipe.run(data)
        _check_fit(res.fit)
        vec = res.fit.params
        asf = pipe.asf(res, data, x_eval)
        est = dict(zip(("alpha0", "alpha1", "beta", "rho"), vec))
        se = {}
        b = cfg.boot_b.get("semiparametric" if pipe.semiparametric else "parametric", 0)
        if b:
            try:
                if pipe.semiparametric:
                    cov = inference.pairs_bootstrap(
                        data, lambda d: pipe.estimate(d, asf_at=x_eval), b, boot_seed,
                        theta_hat=np.append(vec, asf),
                    )
                    se = dict(zip(("alpha0", "alpha1", "beta", "rho", "asf"), cov.se))
                else:
                    start = res.fit.theta if np.all(np.isfinite(vec)) else None
                    refit = lambda d: pipe.estimate(d, start=start)  # noqa: E731
                    cov = inference.pairs_bootstrap(data, refit, b, boot_seed, theta_hat=vec)
                    se = dict(zip(("alpha0", "alpha1", "beta", "rho"), cov.se))
                    _, se["asf"] = inference.delta_method_asf(res.fit.theta, cov, x_eval)
            except UnreliableBootstrapError as exc:
                logger.debug("%s: bootstrap unreliable (%s)", estimator, exc)
                se = {}
        est["asf"] = asf

    estimates = np.array([est.get(nm, np.nan) for nm in names], dtype=float)
    rejections = np.full(len(names), np.nan)
    for j, nm in enumerate(names):
        s = se.get(nm, np.nan)
        if np.isfinite(estimates[j]) and np.isfinite(s):
            t = (estimates[j] - targets[nm]) / s if s > 0 else np.inf
            rejections[j] = float(abs(t) > CRITICAL_VALUE)
    truths = np.array([targets[nm] for nm in names])
    return estimates, rejections, truths


def _check_fit(fit):
    if not fit.converged:
        raise _ReplicationFailure("did not converge")
    if np.any(np.abs(fit.params[np.isfinite(fit.params)]) > BLOWUP):
        raise _ReplicationFailure("estimate exceeds 100 in absolute value")


class _ReplicationFailure(RankCFError):
    pass


def run_replication(cfg: ExperimentConfig, r: int) -> dict:
    """All estimators on replication ``r``; the result depends only on ``(cfg, r)``."""
    sample = dgp_mod.generate(cfg.dgp.with_seed(derive_seed(cfg.base_seed, r)))
    if cfg.asf_eval == MEAN_X:
        x_eval = sample.dataset.mean_x()
    else:
        x_eval = dgp_mod.population_mean_x(cfg.dgp)
    boot_seed = derive_seed(cfg.base_seed, r, 1)
    out = {}
    for name in cfg.estimators:
        try:
            out[name] = _run_one(name, sample, cfg, x_eval, boot_seed)
        except RankCFError as exc:
            logger.debug("replication %d, %s failed: %s", r, name, exc)
            out[name] = None
    return out


def _run_replication_args(args):
    return run_replication(*args)


def run_experiment(cfg: ExperimentConfig, progress=None) -> MetricsTable:
    """Run ``cfg.replications`` replications and aggregate per estimator."""
    jobs = [(cfg, r) for r in range(cfg.replications)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_run_replication_args, jobs, chunksize=max(1, len(jobs) // (4 * cfg.threads))))
    else:
        results = []
        for job in jobs:
            results.append(_run_replication_args(job))
            if progress is not None:
                progress(len(results), cfg.replications)

    rows = []
    for name in cfg.estimators:
        names = _param_names(name)
        ok = [res[name] for res in results if res[name] is not None]
        failures = cfg.replications - len(ok)
        if not ok:
            for nm in names:
                rows.append(MetricRow(name, nm, np.nan, np.nan, np.nan, np.nan, np.nan, failures, 0))
            continue
        est = np.array([o[0] for o in ok])
        rej = np.array([o[1] for o in ok])
        tru = np.array([o[2] for o in ok])
        stats = summarize(est, tru, rej)
        for j, nm in enumerate(names):
            used = int(np.isfinite(est[:, j]).sum())
            if used == 0:
                continue  # not reported by this estimator ("na")
            rows.append(MetricRow(
                name, nm, float(tru[:, j].mean()), float(stats["mean"][j]), float(stats["std"][j]),
                float(stats["rmse"][j]), float(stats["size"][j]), failures, used,
            ))
    return MetricsTable(tuple(rows), cfg.to_dict())


def with_dgp(cfg: ExperimentConfig, **dgp_changes) -> ExperimentConfig:
    return replace(cfg, dgp=replace(cfg.dgp, **dgp_changes))
