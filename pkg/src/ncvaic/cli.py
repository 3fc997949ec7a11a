"""Command-line entry point: ``ncvaic {fit,path,simulate,verify-bias} --config FILE``.

The config is a YAML (or JSON) mapping; ``--lambda``, ``--seed``, ``--out`` and
``--reps`` override the matching entries. Reports are JSON records tagged with
a schema version; failures exit nonzero with a JSON error record.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .aic import MonteCarlo, aic_value, needs_k_hat, select_lambda
from .errors import ConfigError, NcvaicError
from .glm import get_family
from .io import SCHEMA, fit_result_record, read_csv, write_report
from .penalties import PenaltySpec
from .simulation import (SimDesign, asymptotic_normality_check, empirical_kl_bias,
                         support_rates)
from .solver import FitOptions, fit

COMMANDS = ("fit", "path", "simulate", "verify-bias")
EXIT_CONFIG, EXIT_NUMERIC, EXIT_OTHER = 2, 3, 1


@dataclass
class RunConfig:
    command: str
    family: str = "gaussian"
    penalty: dict = field(default_factory=lambda: {"kind": "scad"})
    gamma0: float = 1.5
    lam: Optional[float] = None
    grid: Optional[list] = None
    data_path: Optional[Path] = None
    options: FitOptions = field(default_factory=FitOptions)
    mc: MonteCarlo = field(default_factory=MonteCarlo)
    design: Optional[dict] = None
    simulate: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    output_path: Optional[Path] = None
    workers: int = 1

    def penalty_spec(self, lam: Optional[float] = None, n: Optional[int] = None,
                     penalty: Optional[dict] = None, gamma0: Optional[float] = None) -> PenaltySpec:
        pen = dict(penalty or self.penalty)
        kind = pen.pop("kind")
        lam = self.lam if lam is None else lam
        if lam is None:
            raise ConfigError("no lambda given (config 'lambda' or --lambda)")
        return PenaltySpec(kind=kind, lam=float(lam),
                           gamma0=float(self.gamma0 if gamma0 is None else gamma0), n=n, **pen)


def _grid(spec) -> list:
    if spec is None:
        return None
    if isinstance(spec, dict):
        try:
            lo, hi, num = float(spec["min"]), float(spec["max"]), int(spec["num"])
        except KeyError as exc:
            raise ConfigError(f"grid mapping needs min, max and num (missing {exc})") from None
        scale = spec.get("scale", "log")
        vals = np.geomspace(lo, hi, num) if scale == "log" else np.linspace(lo, hi, num)
        return [float(v) for v in vals]
    return [float(v) for v in spec]


def _penalty(raw) -> dict:
    if isinstance(raw, str):
        return {"kind": raw}
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("penalty must be a kind string or a mapping with 'kind'")
    allowed = {"kind", "a", "gamma"}
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"unknown penalty fields {sorted(extra)}")
    return dict(raw)


def _dataclass_from(cls, raw, what):
    raw = dict(raw or {})
    names = {f.name for f in fields(cls)}
    extra = set(raw) - names
    if extra:
        raise ConfigError(f"unknown {what} fields {sorted(extra)}")
    if "unpenalized" in raw:
        raw["unpenalized"] = tuple(raw["unpenalized"])
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def load_config(path, command=None, overrides=None) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    overrides = overrides or {}
    cmd = command or raw.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")
    if command and raw.get("command") not in (None, command):
        raise ConfigError(f"config is for {raw.get('command')!r}, not {command!r}")
    known = {"command", "family", "penalty", "gamma0", "lambda", "grid", "data", "options", "mc",
             "design", "simulate", "verify", "output", "workers"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    base = path.parent
    cfg = RunConfig(
        command=cmd,
        family=str(raw.get("family", "gaussian")),
        penalty=_penalty(raw.get("penalty", "scad")),
        gamma0=float(raw.get("gamma0", 1.5)),
        lam=None if raw.get("lambda") is None else float(raw["lambda"]),
        grid=_grid(raw.get("grid")),
        data_path=(base / raw["data"]) if raw.get("data") else None,
        options=_dataclass_from(FitOptions, raw.get("options"), "options"),
        mc=_dataclass_from(MonteCarlo, raw.get("mc"), "mc"),
        design=raw.get("design"),
        simulate=dict(raw.get("simulate") or {}),
        verify=dict(raw.get("verify") or {}),
        output_path=Path(raw["output"]) if raw.get("output") else None,
        workers=int(raw.get("workers", 1)),
    )
    if overrides.get("lam") is not None:
        cfg.lam = float(overrides["lam"])
        if cmd == "path":
            cfg.grid = [cfg.lam]
    if overrides.get("seed") is not None:
        seed = int(overrides["seed"])
        cfg.options = replace(cfg.options, seed=seed)
        cfg.mc = replace(cfg.mc, seed=seed)
        cfg.simulate["seed"] = seed
        cfg.verify["seed"] = seed
    if overrides.get("reps") is not None:
        cfg.simulate["reps"] = int(overrides["reps"])
        cfg.verify["reps"] = int(overrides["reps"])
    if overrides.get("out") is not None:
        cfg.output_path = Path(overrides["out"])
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    try:
        get_family(cfg.family)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.command in ("fit", "path"):
        if cfg.data_path is None:
            raise ConfigError(f"{cfg.command} needs a 'data' CSV path")
        if cfg.design is not None:
            raise ConfigError(f"{cfg.command} reads data from CSV; remove the 'design' section")
    else:
        if cfg.design is None:
            raise ConfigError(f"{cfg.command} needs a 'design' section")
        if cfg.data_path is not None:
            raise ConfigError(f"{cfg.command} simulates data; remove 'data'")
    lams = []
    if cfg.command == "path":
        if not cfg.grid:
            raise ConfigError("path needs a lambda grid")
        lams = cfg.grid
    elif cfg.command == "verify-bias" and cfg.verify.get("cases"):
        for case in cfg.verify["cases"]:
            _case_spec(cfg, case)
    else:
        if cfg.lam is None:
            raise ConfigError("no lambda given (config 'lambda' or --lambda)")
        lams = [cfg.lam]
    for lam in lams:
        try:
            cfg.penalty_spec(lam)
        except ValueError as exc:
            raise ConfigError(f"invalid penalty: {exc}") from None


def _case_spec(cfg: RunConfig, case: dict) -> PenaltySpec:
    try:
        return cfg.penalty_spec(lam=case.get("lambda"),
                                penalty=_penalty(case["penalty"]) if "penalty" in case else None,
                                gamma0=case.get("gamma0"))
    except ValueError as exc:
        raise ConfigError(f"invalid verify case {case}: {exc}") from None


def _sim_design(cfg: RunConfig, n: Optional[int] = None, seed: Optional[int] = None) -> SimDesign:
    d = dict(cfg.design)
    d.setdefault("family", cfg.family)
    if n is not None:
        d["n"] = n
    if seed is not None:
        d.setdefault("seed", seed)
    if "X" in d:
        d["X"] = np.asarray(d["X"], dtype=float)
    try:
        return SimDesign(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid design: {exc}") from None


def _header(cfg: RunConfig) -> dict:
    return {"schema": SCHEMA, "command": cfg.command, "version": __version__,
            "family": get_family(cfg.family).kind}


def cmd_fit(cfg: RunConfig) -> dict:
    data, names = read_csv(cfg.data_path)
    fam = get_family(cfg.family)
    spec = cfg.penalty_spec(n=data.n)
    res = fit(data, fam, spec, cfg.options)
    rec = _header(cfg)
    rec.update(penalty=_spec_record(spec), regressors=names, n=data.n, p=data.p,
               fit=fit_result_record(res))
    return rec


def cmd_path(cfg: RunConfig) -> dict:
    data, names = read_csv(cfg.data_path)
    fam = get_family(cfg.family)
    spec = cfg.penalty_spec(lam=cfg.grid[0], n=data.n)
    best, path = select_lambda(data, fam, spec, cfg.grid, cfg.options, cfg.mc)
    rec = _header(cfg)
    rec.update(penalty=_spec_record(spec, with_lam=False), regressors=names, n=data.n, p=data.p,
               grid=cfg.grid, path=path, selected_lambda=best.lam, selected=best)
    return rec


def cmd_simulate(cfg: RunConfig) -> dict:
    sim = cfg.simulate
    seed = int(sim.get("seed", 0))
    reps = int(sim.get("reps", 200))
    base = _sim_design(cfg, seed=seed)
    n_values = [int(v) for v in sim.get("n_values", [base.n])]
    workers = int(sim.get("workers", cfg.workers))
    spec = cfg.penalty_spec()
    rows = []
    for n in n_values:
        r = support_rates(base.with_n(n), spec, cfg.options, reps, seed, workers)
        has_zero = bool(np.any(base.beta == 0.0))
        rows.append({"n": n, "sparsity_rate": r.sparsity if has_zero else None,
                     "selection_rate": r.selection, **r.info})
    rates = [r["selection_rate"] for r in rows]
    rec = _header(cfg)
    rec.update(penalty=_spec_record(spec), design=_design_record(base), reps=reps, seed=seed,
               rates=rows, selection_nondecreasing=bool(all(b >= a for a, b in zip(rates, rates[1:]))))
    norm_cfg = sim.get("normality")
    if norm_cfg:
        norm_cfg = {} if norm_cfg is True else dict(norm_cfg)
        n = int(norm_cfg.get("n", n_values[-1]))
        nr = int(norm_cfg.get("reps", reps))
        rep = asymptotic_normality_check(base.with_n(n), spec, cfg.options, nr, seed, workers)
        rec["normality"] = rep
    return rec


def cmd_verify_bias(cfg: RunConfig) -> dict:
    v = cfg.verify
    seed = int(v.get("seed", 0))
    reps = int(v.get("reps", 200))
    k_se = float(v.get("k_se", 2.0))
    workers = int(v.get("workers", cfg.workers))
    design = _sim_design(cfg, seed=seed)
    cases = v.get("cases") or [{}]
    rows = []
    for case in cases:
        spec = _case_spec(cfg, case)
        if spec.lam > 0:
            needs_k_hat(spec)
        r = empirical_kl_bias(design, spec, cfg.options, reps, seed, cfg.mc, workers=workers)
        k = float(case.get("k_se", k_se))
        rows.append({
            "penalty": spec.kind, "gamma0": spec.gamma0, "lambda": spec.lam, "n": design.n,
            "reps": reps, "oracle_mean": r.mean, "oracle_se": r.se,
            "mean_active": r.active_mean, "mean_k_hat": r.k_hat_mean,
            "correction_mean": r.correction_mean, "correction_se": r.correction_se,
            "combined_se": r.combined_se, "k_se": k, "pass": r.agrees(k),
            "skip_rate": r.info["skip_rate"],
        })
    rec = _header(cfg)
    rec.update(design=_design_record(design), table=rows)
    return rec


def _spec_record(spec: PenaltySpec, with_lam: bool = True) -> dict:
    rec = {"kind": spec.kind, "gamma0": spec.gamma0, "a": spec.a, "gamma": spec.gamma}
    if with_lam:
        rec["lambda"] = spec.lam
        if spec.n is not None:
            rec["lambda_n"] = spec.lambda_n()
    return rec


def _design_record(d: SimDesign) -> dict:
    return {"family": d.family, "beta_star": list(d.beta_star), "n": d.n, "design": d.design,
            "lo": d.lo, "hi": d.hi, "seed": d.seed, "redraw_x": d.redraw_x}


HANDLERS = {"fit": cmd_fit, "path": cmd_path, "simulate": cmd_simulate,
            "verify-bias": cmd_verify_bias}


def run(cfg: RunConfig) -> dict:
    return HANDLERS[cfg.command](cfg)


def _error_record(exc: Exception, command) -> dict:
    rec = {"schema": SCHEMA, "command": command, "error": {
        "type": type(exc).__name__,
        "code": getattr(exc, "code", "error"),
        "message": str(exc),
    }}
    for attr in ("row", "column", "rcond", "diagnostics"):
        val = getattr(exc, attr, None)
        if val is not None:
            rec["error"][attr] = val
    return rec


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncvaic", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS,
                    help="defaults to the config's 'command' entry")
    ap.add_argument("--config", required=True, help="YAML/JSON run configuration")
    ap.add_argument("--lambda", dest="lam", type=float, help="override lambda")
    ap.add_argument("--seed", type=int, help="override every seed in the config")
    ap.add_argument("--out", help="report path (default: stdout)")
    ap.add_argument("--reps", type=int, help="override the replication count")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = load_config(args.config, args.command,
                          {"lam": args.lam, "seed": args.seed, "out": args.out,
                           "reps": args.reps})
        out = cfg.output_path
        text = write_report(out, run(cfg))
        if out is None:
            sys.stdout.write(text)
        return 0
    except ConfigError as exc:
        status = EXIT_CONFIG
        err = exc
    except NcvaicError as exc:
        status = EXIT_CONFIG if exc.code == "parse_error" else EXIT_NUMERIC
        err = exc
    except (ValueError, OSError) as exc:
        status = EXIT_OTHER
        err = exc
    text = write_report(out, _error_record(err, args.command))
    sys.stderr.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
