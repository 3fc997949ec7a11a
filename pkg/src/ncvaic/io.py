"""CSV datasets and JSON report records."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataParseError
from .glm import Dataset
from .solver import FitResult

SCHEMA = "ncvaic.report/1"


def read_csv(path) -> tuple:
    """Read a header-first CSV with a ``y`` column and regressors ``x1..xp``.

    Returns ``(Dataset, regressor_names)``. Errors name the 1-based file row and
    the column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataParseError(f"{path}: empty file", row=1)
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise DataParseError(f"{path}: header has no 'y' column", row=1, column="y")
    xcols = sorted((h for h in header if h != "y"), key=_x_index)
    expected = [f"x{j}" for j in range(1, len(xcols) + 1)]
    if xcols != expected:
        raise DataParseError(f"{path}: regressors must be named x1..xp, got {xcols}", row=1)
    pos = {h: i for i, h in enumerate(header)}
    order = [pos[h] for h in xcols]
    ys, xs = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataParseError(
                f"{path}: row {r} has {len(row)} fields, header has {len(header)}", row=r
            )
        vals = []
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataParseError(
                    f"{path}: row {r}, column {header[c]!r}: non-numeric value {cell!r}",
                    row=r, column=header[c],
                ) from None
            if not math.isfinite(v):
                raise DataParseError(
                    f"{path}: row {r}, column {header[c]!r}: non-finite value", row=r,
                    column=header[c],
                )
            vals.append(v)
        ys.append(vals[pos["y"]])
        xs.append([vals[i] for i in order])
    if not ys or not xcols:
        raise DataParseError(f"{path}: need at least one data row and one regressor")
    return Dataset(np.array(ys), np.array(xs)), xcols


def _x_index(name):
    if name.startswith("x") and name[1:].isdigit():
        return (0, int(name[1:]))
    return (1, name)


def write_csv(path, data: Dataset) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"x{j}" for j in range(1, data.p + 1)])
        for yi, xi in zip(data.y, data.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])


def to_plain(obj):
    """Convert numpy / dataclass values into JSON-ready builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(record) -> str:
    # json writes floats with repr(), the shortest string that round-trips exactly.
    return json.dumps(to_plain(record), sort_keys=True, indent=2) + "\n"


def write_report(path, record) -> str:
    text = dumps(record)
    if path is not None:
        Path(path).write_text(text)
    return text


def fit_result_record(res: FitResult) -> dict:
    return {
        "beta_hat": [float(b) for b in res.beta_hat],
        "active": list(res.active),
        "loglik": res.loglik,
        "objective": res.objective,
        "converged": res.converged,
        "iterations": res.iterations,
        "kkt_residual": res.kkt_residual,
        "lam": res.lam,
        "lambda_n": res.lambda_n,
        "start": res.start,
        "diagnostics": res.diagnostics,
    }


def fit_result_from_record(rec: dict) -> FitResult:
    return FitResult(
        beta_hat=np.array(rec["beta_hat"], dtype=float),
        active=tuple(rec["active"]),
        loglik=float(rec["loglik"]),
        objective=float(rec["objective"]),
        converged=bool(rec["converged"]),
        iterations=int(rec["iterations"]),
        kkt_residual=float(rec["kkt_residual"]),
        lam=float(rec.get("lam", 0.0)),
        lambda_n=float(rec.get("lambda_n", 0.0)),
        start=int(rec.get("start", 0)),
        diagnostics=dict(rec.get("diagnostics", {})),
    )
