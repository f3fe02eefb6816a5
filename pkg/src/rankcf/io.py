"""CSV ingestion and JSON fit reports."""

from __future__ import annotations

import csv
import json
import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .data import Dataset
from .exceptions import ParseError, SchemaError
from .liml import FitResult

TRUE_VALUES = {"1", "1.0", "true"}
FALSE_VALUES = {"0", "0.0", "false"}
INTERCEPT = "const"


@contextmanager
def _open(source, mode):
    if isinstance(source, (str, Path)):
        with open(source, mode, newline="", encoding="utf-8") as fh:
            yield fh
    else:
        yield source


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}: column {column!r} is not a number: {text!r}", row) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: column {column!r} is not finite", row)
    return value


def _parse_binary(text, row, column):
    t = text.strip().lower()
    if t in TRUE_VALUES:
        return 1.0
    if t in FALSE_VALUES:
        return 0.0
    raise ParseError(f"row {row}: outcome {column!r} must be 0/1 or true/false, got {text!r}", row)


def parse_csv(source, outcome: str, endogenous, exogenous=()) -> Dataset:
    """Read a header-first CSV into a :class:`Dataset`.

    Row numbers in error messages count data rows from 1 (the header is not
    counted). A constant column of ones is added in front of the exogenous
    columns unless one of them already is constant and equal to 1, in which
    case it is moved to the front instead. Numbers are parsed with
    :func:`float`, so only a period is accepted as decimal separator.
    """
    endogenous = [endogenous] if isinstance(endogenous, str) else list(endogenous)
    exogenous = [exogenous] if isinstance(exogenous, str) else list(exogenous)
    if not endogenous:
        raise SchemaError("at least one endogenous column is required")
    with _open(source, "r") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("file is empty") from None
        wanted = [outcome, *endogenous, *exogenous]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"missing columns: {missing}")
        dup = {c for c in wanted if wanted.count(c) > 1}
        if dup:
            raise SchemaError(f"columns used twice: {sorted(dup)}")
        pos = {c: header.index(c) for c in wanted}
        y, d, z = [], [], []
        for row, fields in enumerate(reader, start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise ParseError(f"row {row}: expected {len(header)} fields, got {len(fields)}", row)
            for c in wanted:
                if not fields[pos[c]].strip():
                    raise ParseError(f"row {row}: missing value in column {c!r}", row)
            y.append(_parse_binary(fields[pos[outcome]], row, outcome))
            d.append([_parse_float(fields[pos[c]], row, c) for c in endogenous])
            z.append([_parse_float(fields[pos[c]], row, c) for c in exogenous])
    if not y:
        raise SchemaError("file has no data rows")
    n = len(y)
    z_mat = np.array(z, dtype=float).reshape(n, len(exogenous))
    names = list(exogenous)
    const = [j for j in range(z_mat.shape[1]) if np.all(z_mat[:, j] == 1.0)]
    if const:
        order = [const[0]] + [j for j in range(z_mat.shape[1]) if j != const[0]]
        z_mat = z_mat[:, order]
        names = [names[j] for j in order]
    else:
        z_mat = np.hstack([np.ones((n, 1)), z_mat])
        names = [INTERCEPT, *names]
    return Dataset(np.array(y), z_mat, np.array(d, dtype=float), tuple(names), tuple(endogenous))


def write_csv(data: Dataset, target, outcome: str = "y") -> None:
    """Write ``data`` (constant column included) with 17 significant digits."""
    with _open(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([outcome, *data.z_names, *data.d_names])
        for i in range(data.n):
            writer.writerow(
                [str(int(data.y[i]))]
                + [repr(float(v)) for v in data.z[i]]
                + [repr(float(v)) for v in data.d[i]]
            )


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def emit_fit_report(fit: FitResult, cov=None, asf=None, *, failures: int = 0) -> str:
    """JSON document with estimates, standard errors and t-statistics.

    ``cov`` is a :class:`~rankcf.inference.CovarianceEstimate` (or ``None``,
    in which case every standard error and t-statistic is null and a warning
    is recorded). ``asf`` is an optional ``(estimate, se)`` pair or a bare
    estimate. Field order is fixed.
    """
    warnings = []
    params = fit.params
    se = None
    if cov is None:
        warnings.append("no covariance estimate: standard errors unavailable")
    else:
        se = np.asarray(cov.se, dtype=float)
        if se.size < params.size:
            se = np.concatenate([se, np.full(params.size - se.size, np.nan)])
    if not fit.converged:
        warnings.append("optimizer did not converge")
    coefficients = []
    for j, name in enumerate(fit.names):
        s = None if se is None else _num(se[j])
        t = None
        if s is not None and s > 0 and math.isfinite(params[j]):
            t = round(float(params[j]) / s, 2)
        coefficients.append({"name": name, "estimate": _num(params[j]), "se": s, "t": t})
    doc = {
        "method": fit.method,
        "link": fit.link,
        "n": fit.n,
        "coefficients": coefficients,
        "diagnostics": {
            "converged": bool(fit.converged),
            "iterations": int(fit.iterations),
            "score_norm": _num(fit.score_norm),
            "loglik": _num(fit.loglik),
            "design_condition": _num(fit.design_condition),
        },
        "covariance": None if cov is None else {
            "method": cov.method,
            "b_used": int(cov.b_used),
            "b_failed": int(cov.b_failed),
            "sigma": [[_num(v) for v in row] for row in np.asarray(cov.sigma)],
        },
        "failures": int(failures),
        "asf": None,
        "warnings": warnings,
    }
    if asf is not None:
        est, s = asf if isinstance(asf, tuple) else (asf, None)
        doc["asf"] = {"estimate": _num(est), "se": _num(s)}
    return json.dumps(doc, indent=2)
