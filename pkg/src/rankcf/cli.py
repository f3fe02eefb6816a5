"""``rankcf`` command line: fit, mc, asf, profile-lambda.

Exit codes: 0 success, 2 schema or parse error, 3 numerical failure,
4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import control as cf
from . import first_stage as fs
from . import inference, io, liml
from . import montecarlo as mc
from . import semiparametric as sp
from .exceptions import (
    ConfigError,
    DomainError,
    NumericalError,
    ParseError,
    SchemaError,
    ShapeError,
    UnreliableBootstrapError,
    UnsupportedOperationError,
)
from .pipeline import NP_LINK, Pipeline

EXIT_OK, EXIT_PARSE, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4

logger = logging.getLogger("rankcf")


def _floats(text, count=None):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise ConfigError(f"expected {count} numbers, got {text!r}")
    return vals


def _global_flags(p):
    p.add_argument("--seed", type=int, default=0, help="seed for resampling")
    p.add_argument("--threads", type=int, default=1, help="worker processes (mc only)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def _data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--outcome", default="y")
    p.add_argument("--endog", action="append", help="endogenous column (repeatable; default d)")
    p.add_argument("--exog", action="append", default=[], help="exogenous column (repeatable)")
    p.add_argument("--first-stage", choices=[fs.OLS, fs.LOCAL_LINEAR], default=fs.LOCAL_LINEAR)
    p.add_argument("--first-stage-bandwidth", type=float)
    p.add_argument("--control", default="normal", help="normal, identity or skew:<lambda>")


def _fit_flags(p):
    _data_flags(p)
    p.add_argument("--link", choices=["probit", "logit", NP_LINK], default="probit")
    p.add_argument("--boot", type=int, default=0, help="bootstrap replications (0: none)")
    p.add_argument("--boot-seed", type=int, help="bootstrap seed (default: --seed)")
    p.add_argument("--trim", default="0.01,0.99", help="trimming quantiles lo,hi (np link)")
    p.add_argument("--link-bandwidth", type=float, help="fixed kernel bandwidth (np link)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankcf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate the control-function model on a CSV file")
    _fit_flags(p)
    _global_flags(p)

    p = sub.add_parser("asf", help="average structural function at a point")
    _fit_flags(p)
    p.add_argument("--at", help="comma-separated x = (z incl. constant, d); default: sample mean")
    _global_flags(p)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment")
    p.add_argument("--config", required=True, help="experiment JSON")
    _global_flags(p)

    p = sub.add_parser("profile-lambda", help="profile log-likelihood over the skew parameter")
    _data_flags(p)
    p.add_argument("--link", choices=["probit", "logit"], default="probit")
    p.add_argument("--grid", default="-0.5,-0.25,0,0.25,0.5", help="comma-separated lambda values (use --grid=-0.5,0,0.5 for a leading minus)")
    _global_flags(p)
    return parser


def _load(args):
    return io.parse_csv(args.data, args.outcome, args.endog or ["d"], args.exog)


def _pipeline(args) -> Pipeline:
    spec = sp.SemiparamSpec()
    if args.link == NP_LINK:
        spec = sp.SemiparamSpec(bandwidth=args.link_bandwidth, trim_quantiles=tuple(_floats(args.trim, 2)))
    try:
        family = cf.QuantileFamily.parse(args.control)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return Pipeline(
        first_stage=args.first_stage,
        family=family,
        link=args.link,
        first_stage_bandwidth=args.first_stage_bandwidth,
        semiparam=spec,
    )


def _bootstrap(args, pipe, data, res, asf_at=None):
    if args.boot == 0:
        return None
    seed = args.seed if args.boot_seed is None else args.boot_seed
    vec = res.fit.params
    if asf_at is not None:
        vec = np.append(vec, pipe.asf(res, data, asf_at))
        return inference.pairs_bootstrap(data, lambda d: pipe.estimate(d, asf_at=asf_at), args.boot, seed, theta_hat=vec)
    return inference.pairs_bootstrap(data, pipe.estimate, args.boot, seed, theta_hat=vec)


def _check(res):
    if not res.fit.converged:
        raise NumericalError(f"optimizer did not converge (|score| = {res.fit.score_norm:.3g})")


def cmd_fit(args):
    data = _load(args)
    pipe = _pipeline(args)
    res = pipe.run(data)
    _check(res)
    cov = _bootstrap(args, pipe, data, res)
    return io.emit_fit_report(res.fit, cov, failures=0 if cov is None else cov.b_failed)


def cmd_asf(args):
    data = _load(args)
    pipe = _pipeline(args)
    x = np.array(_floats(args.at, data.k + data.p)) if args.at else data.mean_x()
    res = pipe.run(data)
    _check(res)
    value = pipe.asf(res, data, x)
    se = None
    if args.boot:
        if pipe.semiparametric:
            cov = _bootstrap(args, pipe, data, res, asf_at=x)
            se = float(cov.se[-1])
        else:
            cov = _bootstrap(args, pipe, data, res)
            se = inference.delta_method_asf(res.fit.theta, cov, x)[1]
    return json.dumps({"x": x.tolist(), "asf": value, "se": se}, indent=2)


def cmd_mc(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read experiment config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("experiment config must be a JSON object")
    if args.threads != 1:
        raw["threads"] = args.threads
    if args.seed:
        raw["base_seed"] = args.seed
    cfg = mc.ExperimentConfig.from_dict(raw)
    table = mc.run_experiment(cfg)
    if args.out and args.out.endswith(".json"):
        return table.to_json()
    return table.to_csv()


def cmd_profile_lambda(args):
    data = _load(args)
    if data.p != 1:
        raise ConfigError("profile-lambda supports a single endogenous column")
    stage = fs.fit(data.z, data.d[:, 0], args.first_stage, args.first_stage_bandwidth)
    grid = _floats(args.grid)
    rows = liml.profile_loglik_lambda(data, stage.residuals, args.link, grid)
    ok = [r for r in rows if np.isfinite(r[1])]
    best = max(ok, key=lambda r: r[1])[0] if ok else None
    return json.dumps({
        "profile": [{"lambda": lam, "loglik": ll if np.isfinite(ll) else None} for lam, ll in rows],
        "argmax": best,
    }, indent=2)


COMMANDS = {"fit": cmd_fit, "asf": cmd_asf, "mc": cmd_mc, "profile-lambda": cmd_profile_lambda}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except (ParseError, SchemaError, ShapeError) as exc:
        print(f"rankcf: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericalError, UnreliableBootstrapError) as exc:
        print(f"rankcf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, DomainError, UnsupportedOperationError) as exc:
        print(f"rankcf: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rankcf: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
