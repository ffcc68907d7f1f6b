"""Batch command-line front end.

Verbs:
    simulate   draw first-passage times, write a sample CSV
    classify   print the regime report for a parameter tuple (JSON)
    law        tabulate a limit-law CDF over a time grid (CSV)
    verify     simulate, rescale, and KS-test against the regime's law (JSON)
    zdist      sample the scale-free variable Z and check its analytic bounds
    volume     hit-test estimate of a stage's covered area vs the closed form

Exit codes: 0 success/pass, 1 usage or validation error, 2 verification
failure, 3 timeout budget exceeded.  All artifacts are deterministic
functions of the configuration (seeds included), so reruns are
byte-identical; MUTCLOCK_WORKERS only changes how replicates are scheduled,
never the result.
"""

from __future__ import annotations

import argparse
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__
from .backend import backend_name
from .laws import (
    law_for_case,
    mean_stage1_volume,
    small_time_bounds,
    z_cdf_envelope,
)
from .regimes import UnclassifiableError, classify, diagnostics
from .runio import (
    RunConfig,
    config_hash,
    dump_report,
    load_config,
    write_law_csv,
    write_sample_csv,
)
from .sim import ModelParams, replicate, stage_volume_samples
from .stats import dkw_band, ks_statistic
from .torus import unit_ball_volume

TIMEOUT_BUDGET = 0.005


def model_allowance(case_id: str, stages: int) -> float:
    """Finite-size model-error allowance added to the DKW band in verify.

    The single-stage law is exact (no allowance).  Regimes whose limit is
    reached by separating two exponential waits converge fast (0.01); the
    growth-limited and balanced regimes carry more finite-size bias (0.02).
    """
    if stages == 1:
        return 0.0
    if stages == 2 and case_id in ("case_1", "case_2", "case_3"):
        return 0.01
    if stages >= 3 and case_id == "case_1":
        return 0.01
    return 0.02


@contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _resolve_horizon(cfg: RunConfig, timescale: float) -> float:
    if cfg.t_max is not None:
        return cfg.t_max
    return cfg.t_max_multiplier / timescale


def _model_meta(params: ModelParams) -> dict:
    return {
        "dimension": params.dimension,
        "sites": params.sites,
        "speed": params.speed,
        "rates": ",".join(repr(r) for r in params.rates),
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    n = args.replicates if args.replicates is not None else cfg.replicates
    if n is None:
        return _fail("simulate needs --replicates (or 'replicates' in the config)")
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    try:
        report = classify(cfg.model, cfg.threshold, with_law=False)
    except UnclassifiableError as e:
        if cfg.t_max is None:
            return _fail(f"cannot pick a horizon ({e}); set 't_max' in the config")
        report = None
    t_max = cfg.t_max if report is None else _resolve_horizon(cfg, report.timescale)
    sample = replicate(
        cfg.model, n, seed,
        t_max=t_max, cap=cfg.candidate_cap,
        use_grid=cfg.use_grid, grid_hint=cfg.grid_hint,
    )
    meta = _model_meta(cfg.model)
    meta.update(
        {
            "replicates": n,
            "t_max": t_max,
            "candidate_cap": cfg.candidate_cap,
            "config_hash": cfg.hash(),
        }
    )
    if report is not None:
        meta["case"] = report.case_id
    over_budget = sample.timeout_fraction > TIMEOUT_BUDGET
    if over_budget:
        meta["timeout_warning"] = True
    with _open_out(args.out) as fh:
        write_sample_csv(fh, sample, meta)
    return 3 if over_budget else 0


def cmd_classify(args) -> int:
    cfg = load_config(args.config)
    try:
        report = classify(cfg.model, cfg.threshold, z_samples=cfg.z_samples)
    except UnclassifiableError as e:
        print(
            dump_report(
                {"error": str(e), "ratios": e.ratios, "version": __version__}
            ),
            end="",
            file=sys.stderr,
        )
        return 1
    law = report.law
    law_params = {k: v for k, v in law.params.items() if k != "draws"}
    doc = {
        "case": report.case_id,
        "stages": report.stages,
        "ratios": report.ratios,
        "margin": report.margin,
        "threshold": report.threshold,
        "timescale": report.timescale,
        "law": {
            "kind": law.kind,
            "time_scale": law.time_scale,
            "params": law_params,
            "description": law.description,
            "meta": law.meta,
        },
        "config_hash": cfg.hash(),
        "version": __version__,
    }
    with _open_out(args.out) as fh:
        fh.write(dump_report(doc))
    return 0


def cmd_law(args) -> int:
    cfg = load_config(args.config)
    law = law_for_case(args.case, cfg.model, **(
        {"z_samples": cfg.z_samples} if cfg.z_samples else {}
    ))
    ts = np.asarray(cfg.grid, dtype=float)
    cdfs = law.cdf(ts) if ts.size else np.array([])
    meta = {
        "case": args.case,
        "kind": law.kind,
        "time_scale": law.time_scale,
        "config_hash": cfg.hash(),
    }
    with _open_out(args.out) as fh:
        write_law_csv(fh, ts, cdfs, meta)
    return 0


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    n = args.replicates if args.replicates is not None else cfg.replicates
    if n is None:
        return _fail("verify needs --replicates (or 'replicates' in the config)")
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    confidence = args.confidence if args.confidence is not None else cfg.confidence
    threshold = args.threshold if args.threshold is not None else cfg.threshold

    margin = None
    ratios = None
    forced = False
    try:
        report = classify(cfg.model, threshold, with_law=False)
        margin = report.margin
        ratios = report.ratios
        case = report.case_id
        if args.case and args.case != case:
            if not args.force_case:
                return _fail(
                    f"classifier picked {case} but --case says {args.case}; "
                    "pass --force-case to override"
                )
            case = args.case
            forced = True
    except UnclassifiableError as e:
        if not (args.case and args.force_case):
            print(f"error: {e}", file=sys.stderr)
            print("hint: pass --case <id> --force-case to test a law anyway", file=sys.stderr)
            return 1
        case = args.case
        forced = True
        ratios = e.ratios

    law = law_for_case(case, cfg.model, **(
        {"z_samples": cfg.z_samples} if cfg.z_samples else {}
    ))
    t_max = _resolve_horizon(cfg, law.time_scale)
    sample = replicate(
        cfg.model, n, seed,
        t_max=t_max, cap=cfg.candidate_cap,
        use_grid=cfg.use_grid, grid_hint=cfg.grid_hint,
    )

    doc = {
        "command": "verify",
        "case": case,
        "forced": forced,
        "stages": cfg.model.stages,
        "margin": margin,
        "ratios": ratios,
        "n": n,
        "finite": sample.n,
        "timeouts": sample.timeouts,
        "seed": seed,
        "t_max": t_max,
        "time_scale": law.time_scale,
        "law_kind": law.kind,
        "backend": backend_name(),
        "config_hash": cfg.hash(),
        "version": __version__,
    }
    if sample.timeout_fraction > TIMEOUT_BUDGET:
        doc["timeout_budget"] = TIMEOUT_BUDGET
        doc["timeout_fraction"] = sample.timeout_fraction
        doc["passed"] = False
        with _open_out(args.out) as fh:
            fh.write(dump_report(doc))
        return 3

    scaled = sample.scaled(law.time_scale)
    ks = ks_statistic(scaled.values, law.cdf)
    dkw = dkw_band(sample.n, confidence)
    allowance = model_allowance(case, cfg.model.stages)
    law_band = float(law.meta.get("band", 0.0))
    band = dkw + allowance + law_band
    passed = ks < band
    doc.update(
        {
            "ks": ks,
            "dkw": dkw,
            "confidence": confidence,
            "allowance": allowance,
            "law_band": law_band,
            "band": band,
            "passed": passed,
        }
    )
    with _open_out(args.out) as fh:
        fh.write(dump_report(doc))
    return 0 if passed else 2


def cmd_zdist(args) -> int:
    try:
        c = tuple(float(x) for x in args.c.split(","))
    except ValueError:
        return _fail(f"--c must be comma-separated rates, got {args.c!r}")
    d = args.dimension
    k = len(c)
    params = ModelParams(dimension=d, sites=1.0, speed=1.0, rates=c)
    n = args.replicates
    seed = args.seed or 0
    t_max = args.t_max if args.t_max is not None else 1e4
    sample = replicate(params, n, seed, t_max=t_max)
    effective = {
        "dimension": d, "c": list(c), "replicates": n,
        "seed": seed, "t_max": t_max, "small_t": args.small_t,
    }
    doc = {
        "command": "zdist",
        "dimension": d,
        "stages": k,
        "c": list(c),
        "n": n,
        "finite": sample.n,
        "timeouts": sample.timeouts,
        "seed": seed,
        "config_hash": config_hash(effective),
        "version": __version__,
    }
    if sample.timeout_fraction > TIMEOUT_BUDGET:
        doc["timeout_fraction"] = sample.timeout_fraction
        doc["passed"] = False
        with _open_out(args.out) as fh:
            fh.write(dump_report(doc))
        return 3

    values = np.asarray(sample.values)
    m = values.size
    doc["mean"] = float(values.mean())

    # sandwich: the CDF of Z is pinned between the plain and the shifted
    # sums of exponentials; the ECDF may stray by at most a DKW band
    lo, hi = z_cdf_envelope(d, k, c, values)
    i = np.arange(1, m + 1, dtype=float)
    viol_hi = float(np.max(i / m - hi))
    viol_lo = float(np.max(lo - (i - 1.0) / m))
    band = dkw_band(m, args.confidence)
    sandwich_ok = max(viol_hi, viol_lo) <= band
    doc["sandwich"] = {
        "max_violation": max(viol_hi, viol_lo),
        "band": band,
        "passed": sandwich_ok,
    }

    small_t_ok = True
    if args.small_t is not None and args.small_t > 0:
        t0 = args.small_t
        p_hat = float(np.searchsorted(values, t0, side="right")) / m
        se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / m)
        lo_b, hi_b = small_time_bounds(d, k, c, t0)
        small_t_ok = (lo_b - 4.0 * se) <= p_hat <= (hi_b + 4.0 * se)
        doc["small_t"] = {
            "t": t0,
            "p_hat": p_hat,
            "se": se,
            "lower": lo_b,
            "upper": hi_b,
            "passed": small_t_ok,
        }

    doc["passed"] = sandwich_ok and small_t_ok
    if args.sample_out:
        meta = _model_meta(params)
        meta.update({"replicates": n, "t_max": t_max, "config_hash": doc["config_hash"]})
        with _open_out(args.sample_out) as fh:
            write_sample_csv(fh, sample, meta)
    with _open_out(args.out) as fh:
        fh.write(dump_report(doc))
    return 0 if doc["passed"] else 2


def cmd_volume(args) -> int:
    cfg = load_config(args.config)
    n = args.replicates if args.replicates is not None else (cfg.replicates or 200)
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    stage = args.stage
    t = args.t
    estimates = np.asarray(
        stage_volume_samples(
            cfg.model, stage, t, n, cfg.hit_samples, seed, cap=cfg.candidate_cap
        )
    )
    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1)) if n > 1 else 0.0
    se = math.sqrt(var / n) if n > 1 else float("nan")
    doc = {
        "command": "volume",
        "stage": stage,
        "t": t,
        "replicates": n,
        "hit_samples": cfg.hit_samples,
        "seed": seed,
        "mean": mean,
        "variance": var,
        "se": se,
        "backend": backend_name(),
        "config_hash": cfg.hash(),
        "version": __version__,
    }
    passed = True
    window = cfg.model.side / (2.0 * cfg.model.speed)
    if stage == 1 and 0.0 <= t <= window:
        closed = mean_stage1_volume(t, cfg.model)
        agree = abs(mean - closed) <= 4.0 * se
        doc["closed_form"] = closed
        doc["within_4se"] = agree
        passed = passed and agree
    if n > 1:
        g = unit_ball_volume(cfg.model.dimension)
        bound = g * (2.0 * cfg.model.speed * t) ** cfg.model.dimension * mean
        slack = 1.0 + 4.0 * math.sqrt(2.0 / (n - 1))
        var_ok = var <= bound * slack
        doc["variance_bound"] = bound
        doc["variance_slack"] = slack
        doc["variance_ok"] = var_ok
        passed = passed and var_ok
    doc["passed"] = passed
    with _open_out(args.out) as fh:
        fh.write(dump_report(doc))
    return 0 if passed else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mutclock",
        description="exact simulation and limit laws of multi-stage spatial mutation waits",
    )
    p.add_argument("--version", action="version", version=f"mutclock {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="path to the run's JSON config")
        sp.add_argument("--seed", type=int, default=None, help="base seed (64-bit)")
        sp.add_argument("--replicates", type=int, default=None)
        sp.add_argument("--out", default=None, help="output path ('-' = stdout)")

    sp = sub.add_parser("simulate", help="draw first-passage times into a sample CSV")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("classify", help="print the regime report for a tuple")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("law", help="tabulate a limit-law CDF over the config's grid")
    sp.add_argument("--config", required=True)
    sp.add_argument("--case", required=True, help="regime id, e.g. case_6")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_law)

    sp = sub.add_parser("verify", help="KS-test simulated waits against the regime's law")
    common(sp)
    sp.add_argument("--case", default=None, help="expected regime id")
    sp.add_argument(
        "--force-case", action="store_true",
        help="test --case even if the classifier disagrees or refuses",
    )
    sp.add_argument("--confidence", type=float, default=None, help="DKW delta (default 0.01)")
    sp.add_argument("--threshold", type=float, default=None, help="band threshold (default 10)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("zdist", help="sample the scale-free Z and check its bounds")
    sp.add_argument("--dimension", type=int, required=True)
    sp.add_argument("--c", required=True, help="comma-separated per-stage rates")
    sp.add_argument("--replicates", type=int, default=3000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--small-t", type=float, default=0.2,
                    help="where to check the small-time bounds (<= 0 skips)")
    sp.add_argument("--confidence", type=float, default=0.01)
    sp.add_argument("--out", default=None)
    sp.add_argument("--sample-out", default=None, help="also write the raw draws here")
    sp.set_defaults(func=cmd_zdist)

    sp = sub.add_parser("volume", help="hit-test covered area vs the closed form")
    common(sp)
    sp.add_argument("--t", type=float, required=True, help="evaluation time")
    sp.add_argument("--stage", type=int, default=1)
    sp.set_defaults(func=cmd_volume)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
