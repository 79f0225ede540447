"""Command-line interface: ``fpclasso {fit,simulate,qq,diagnose}``.

Exit codes: 0 success, 1 solver failure, 2 bad input or config,
3 degenerate response, 4 target above lambda_max (report still written),
5 regularity violation (diagnostic written).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd
import tomli
from pydantic import ValidationError

from . import __version__
from .errors import (
    CampaignFailure,
    DegenerateResponse,
    FpcError,
    OutOfRange,
    RegularityViolation,
    UnsupportedCorrelation,
)
from .fpc import FpcTarget, prepare, regularity_check, solve_fpc
from .glm import Dataset, Family, validate_response
from .path import PathConfig, fit_path, lambda_max
from .rwsns import DISTRIBUTIONS, STANDARDIZATION, empirical_distance, lemma3_bounds, qq_pairs, sample_rwsns
from .schemas import (
    ActiveFeature,
    CampaignConfig,
    ColumnModel,
    DiagnoseReport,
    FitReport,
    PathRow,
    QqReport,
    RegularityModel,
    SolutionSummary,
    TargetModel,
)
from .simlab import (
    DesignSpec,
    ResponseSpec,
    SignalSpec,
    SimResult,
    merge_results,
    post_hoc_fdr,
    run_fp_experiment,
)

log = logging.getLogger("fpclasso")

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_ABOVE_MAX = 4
EXIT_REGULARITY = 5


class InputError(Exception):
    """Malformed user input; maps to exit code 2."""


# -- shared helpers -------------------------------------------------------------


def _write(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(model) -> str:
    return model.model_dump_json(indent=2) + "\n"


def _regularity_model(diag) -> RegularityModel:
    return RegularityModel(
        monotone=diag.monotone,
        n_violations=diag.n_violations,
        max_violation_magnitude=diag.max_violation_magnitude,
        lambda_pairs=diag.lambda_pairs,
    )


def load_dataset(args) -> tuple[Dataset, Family]:
    """Read the CSV named by ``args.input`` into a Dataset."""
    family = Family.parse(args.family)
    try:
        df = pd.read_csv(args.input, encoding="utf-8")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from exc
    if family is Family.COX:
        if not args.time_col or not args.event_col:
            raise InputError("the cox family needs --time-col and --event-col")
        response_cols = [args.time_col, args.event_col]
    else:
        if not args.response:
            raise InputError("--response is required")
        response_cols = [args.response]
    missing = [c for c in response_cols if c not in df.columns]
    if missing:
        raise InputError(f"column(s) not found: {missing}")
    features = args.features.split(",") if args.features else [c for c in df.columns if c not in response_cols]
    missing = [c for c in features if c not in df.columns]
    if missing:
        raise InputError(f"feature column(s) not found: {missing}")
    if not features:
        raise InputError("no feature columns")
    try:
        X = df[features].to_numpy(dtype=float)
        if family is Family.COX:
            y = df[args.time_col].to_numpy(dtype=float)
            event = df[args.event_col].to_numpy(dtype=float)
        else:
            y = df[args.response].to_numpy(dtype=float)
            event = None
        ds = Dataset(X, y, event, tuple(str(f) for f in features))
        validate_response(family, ds)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return ds, family


def _path_config(args) -> PathConfig:
    try:
        return PathConfig(n_lambda=args.n_lambda, min_ratio=args.min_ratio)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# -- fit ------------------------------------------------------------------------


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    ds, family = load_dataset(args)
    if (args.expected_fp is None) == (args.lambda_fpc is None):
        raise InputError("give exactly one of --expected-fp or --lambda-fpc")
    target = FpcTarget(expected_fp=args.expected_fp, lambda_fpc=args.lambda_fpc)
    config = _path_config(args)
    skew = not args.no_skew

    prepared, record = prepare(ds, skew=skew)
    target.resolve(prepared.p)  # range check before any fitting

    base = dict(
        version=__version__,
        seed=args.seed,
        family=family.value,
        target=TargetModel(expected_fp=args.expected_fp, lambda_fpc=args.lambda_fpc),
        n=ds.n,
        p=ds.p,
        preprocessing=[ColumnModel(**vars(c)) for c in record.columns],
    )

    try:
        sol = solve_fpc(prepared, family, target, config, standardize=False)
    except RegularityViolation as exc:
        reg = _regularity_model(exc.diagnostic) if exc.diagnostic is not None else None
        report = FitReport(status="regularity_violation", regularity=reg, message=str(exc), **base)
        _write(_dump(report), args.output)
        log.error("regularity violation: %s", exc)
        return EXIT_REGULARITY

    path = fit_path(prepared, family, config)
    reg = _regularity_model(regularity_check(path))

    b0, full = record.unstandardize(sol.coef.intercept, sol.coef.beta)
    if not family.has_intercept:
        b0 = 0.0
    kept = record.kept
    active = [
        ActiveFeature(
            name=record.columns[kept[j]].name,
            index=kept[j],
            coefficient=float(full[kept[j]]),
            coefficient_standardized=float(sol.coef.beta[j]),
        )
        for j in sol.active_set
    ]
    summary = SolutionSummary(
        lambda_fpc=sol.lambda_fpc,
        lambda_classical=sol.lambda_classical,
        target_lambda_fpc=sol.target_lambda_fpc,
        fp_bound=sol.fp_bound,
        post_hoc_fdr=post_hoc_fdr(sol),
        residual_norm=sol.residual_norm,
        lambda_max=sol.lambda_max,
        intercept=b0,
        target_above_max=sol.target_above_max,
        iterations=sol.iterations,
        active=active,
    )
    status = "target_above_max" if sol.target_above_max else "ok"
    elapsed = time.perf_counter() - t0
    report = FitReport(
        status=status,
        solution=summary,
        regularity=reg,
        timing_seconds=elapsed if args.timing else None,
        **base,
    )
    _write(_dump(report), args.output)
    log.info("fit finished in %.3fs", elapsed)
    if sol.target_above_max:
        log.warning("target lambda_fpc %.6g is above lambda_max; returning the empty model", sol.target_lambda_fpc)
        return EXIT_ABOVE_MAX
    return EXIT_OK


# -- diagnose -------------------------------------------------------------------


def cmd_diagnose(args) -> int:
    ds, family = load_dataset(args)
    config = _path_config(args)
    prepared, _ = prepare(ds, skew=not args.no_skew)
    lmax = lambda_max(prepared, family)
    if lmax <= 0:
        raise DegenerateResponse("response is constant; lambda_max is zero")
    if args.lambda_min is not None:
        if not 0 < args.lambda_min < lmax:
            raise InputError(f"--lambda-min must lie in (0, lambda_max={lmax:.6g})")
        config = PathConfig(n_lambda=config.n_lambda, min_ratio=args.lambda_min / lmax)
    path = fit_path(prepared, family, config)
    diag = regularity_check(path)
    rows = [
        PathRow(
            lambda_classical=float(path.lambdas[k]),
            lambda_fpc=float(path.lambda_fpc[k]),
            residual_norm=float(path.residual_norms[k]),
            n_active=int(np.count_nonzero(path.betas[:, k])),
        )
        for k in range(len(path))
    ]
    report = DiagnoseReport(
        version=__version__,
        family=family.value,
        n=ds.n,
        p=ds.p,
        lambda_max=lmax,
        regularity=_regularity_model(diag),
        table=rows,
    )
    _write(_dump(report), args.output)
    return EXIT_OK


# -- qq -------------------------------------------------------------------------


def cmd_qq(args) -> int:
    if args.n < 1 or args.m < 1:
        raise InputError("--n and --m must be positive")
    seed = args.seed if args.seed is not None else 0
    samples = sample_rwsns(args.b_dist, args.a_dist, args.n, args.m, seed, args.standardization)
    dist = empirical_distance(samples)
    bounds = lemma3_bounds(args.b_dist, args.a_dist, args.n, args.mc_reps, seed)
    report = QqReport(
        version=__version__,
        seed=seed,
        b_dist=args.b_dist,
        a_dist=args.a_dist,
        standardization=args.standardization,
        n=args.n,
        m=args.m,
        d_K=dist.d_K,
        d_W=dist.d_W,
        xi3=bounds.xi3,
        delta=bounds.delta,
        bound_K=bounds.bound_K,
        bound_W=bounds.bound_W,
        quantiles=[(float(a), float(b)) for a, b in qq_pairs(samples)],
    )
    _write(_dump(report), args.output)
    return EXIT_OK


# -- simulate -------------------------------------------------------------------


def load_campaign(path) -> CampaignConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        return CampaignConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [f"  {'.'.join(str(x) for x in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise InputError("config schema violation:\n" + "\n".join(lines)) from exc


def run_campaign(cfg: CampaignConfig, seed: int, threads: int = 1) -> SimResult:
    signal = SignalSpec(cfg.signal.k, cfg.signal.beta_magnitude)
    resp = ResponseSpec(cfg.response.family, cfg.response.gaussian_sd, cfg.response.censor_fraction_target)
    config = PathConfig(n_lambda=cfg.path.n_lambda, min_ratio=cfg.path.min_ratio, tol=cfg.path.tol)
    designs = [
        DesignSpec(cfg.design.n, p, cfg.design.column_dist, rho, seed)
        for p in cfg.design.p
        for rho in cfg.design.noise_corr
    ]
    for d in designs:
        signal.check(d)
    results = [run_fp_experiment(d, signal, resp, cfg.targets, cfg.replicates, config, threads=threads) for d in designs]
    meta = {"version": __version__, "seed": seed, "config": cfg.model_dump(mode="json")}
    return merge_results(results, meta)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def long_table(result: SimResult, family: str, column_dist: str) -> pd.DataFrame:
    rows = []
    for a in result.aggregates:
        for metric in ("fp", "tp"):
            rows.append(
                {
                    "family": family,
                    "column_dist": column_dist,
                    "p": a.p,
                    "rho": a.rho,
                    "target_fp": a.target_fp,
                    "metric": metric,
                    "mean": getattr(a, f"{metric}_mean"),
                    "se": getattr(a, f"{metric}_se"),
                    "median": getattr(a, f"{metric}_median"),
                    "q1": getattr(a, f"{metric}_q1"),
                    "q3": getattr(a, f"{metric}_q3"),
                    "n_ok": a.n_ok,
                    "n_failed": a.n_failed,
                }
            )
    return pd.DataFrame(rows)


def write_campaign(result: SimResult, cfg: CampaignConfig, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "result.json").write_text(
        json.dumps(_clean({"meta": result.meta, "aggregates": [vars(a) for a in result.aggregates]}), indent=2)
        + "\n",
        encoding="utf-8",
    )
    cells = pd.DataFrame([{k: v for k, v in vars(c).items() if k != "active"} for c in result.cells])
    cells["active"] = [";".join(map(str, c.active)) for c in result.cells]
    cells.to_csv(outdir / "cells.csv", index=False, lineterminator="\n")
    long_table(result, cfg.response.family, cfg.design.column_dist).to_csv(
        outdir / "long.csv", index=False, lineterminator="\n"
    )


def cmd_simulate(args) -> int:
    cfg = load_campaign(args.config)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg.seed is not None else 0)
    outdir = Path(args.output or "sim-output")
    try:
        result = run_campaign(cfg, seed, args.threads)
    except UnsupportedCorrelation as exc:
        raise InputError(f"UnsupportedCorrelation: {exc}") from exc
    except CampaignFailure as exc:
        partial = getattr(exc, "result", None)
        if partial is not None:
            write_campaign(partial, cfg, outdir)
        raise
    write_campaign(result, cfg, outdir)
    for a in result.aggregates:
        log.info(
            "p=%d rho=%g target=%g: mean fp %.3f (se %.3f), mean tp %.3f",
            a.p, a.rho, a.target_fp, a.fp_mean, a.fp_se, a.tp_mean,
        )
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------


def _add_data_args(sp) -> None:
    sp.add_argument("--input", required=True, help="CSV file with a header row")
    sp.add_argument("--family", required=True, choices=[f.value for f in Family])
    sp.add_argument("--response", help="response column (non-survival families)")
    sp.add_argument("--time-col", help="survival time column (cox)")
    sp.add_argument("--event-col", help="event indicator column (cox)")
    sp.add_argument("--features", help="comma-separated feature columns (default: all others)")
    sp.add_argument("--no-skew", action="store_true", help="skip the log skew adjustment")
    sp.add_argument("--n-lambda", type=int, default=50)
    sp.add_argument("--min-ratio", type=float, default=0.01)


def _global_flags(default=None) -> argparse.ArgumentParser:
    def d(value):
        return value if default is None else default

    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=d(None), help="random seed (unsigned 64-bit)")
    flags.add_argument("--threads", type=int, default=d(1), help="worker processes for simulations")
    flags.add_argument("--output", default=d(None), help="output path ('-' or omitted: stdout)")
    flags.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpclasso", description=__doc__.splitlines()[0], parents=[_global_flags()])
    # global flags may also follow the subcommand; SUPPRESS keeps the
    # subparser from overwriting values given before it
    common = _global_flags(argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"fpclasso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", parents=[common], help="fit the FPC lasso on a CSV table")
    _add_data_args(fit)
    fit.add_argument("--expected-fp", type=float)
    fit.add_argument("--lambda-fpc", type=float)
    fit.add_argument("--timing", action="store_true", help="record wall time in the report")
    fit.set_defaults(func=cmd_fit)

    diag = sub.add_parser("diagnose", parents=[common], help="lambda to lambda_fpc mapping and monotonicity")
    _add_data_args(diag)
    diag.add_argument("--lambda-min", type=float, help="smallest classical penalty on the path")
    diag.set_defaults(func=cmd_diagnose)

    qq = sub.add_parser("qq", parents=[common], help="rwSNS quantiles against the standard normal")
    qq.add_argument("--b-dist", default="gaussian", choices=DISTRIBUTIONS)
    qq.add_argument("--a-dist", default="gaussian", choices=DISTRIBUTIONS)
    qq.add_argument("--n", type=int, default=100)
    qq.add_argument("--m", type=int, default=1000)
    qq.add_argument("--mc-reps", type=int, default=10**6)
    qq.add_argument("--standardization", default="theoretical", choices=STANDARDIZATION)
    qq.set_defaults(func=cmd_qq)

    sim = sub.add_parser("simulate", parents=[common], help="run a simulation campaign from a TOML config")
    sim.add_argument("config", help="campaign TOML file")
    sim.set_defaults(func=cmd_simulate)
    return parser


def _parse_seed(args) -> None:
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise InputError("--seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        raise InputError("--threads must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _parse_seed(args)
        return args.func(args)
    except (InputError, OutOfRange) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateResponse as exc:
        print(f"error: DegenerateResponse: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except FpcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
