"""Command-line front end: CSV in, JSON/CSV out.

Subcommands: ``detect`` (run the search on a series), ``threshold``
(calibrate and print a threshold), ``simulate`` (replicated coverage
experiment from a spec file) and ``locate`` (re-derive change locations and
the prominence report from a detect output). Exit codes: 0 success
(including an empty result), 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .engine import NspConfig, nsp_run
from .errors import NumericalError
from .harness import (experiment_from_dict, run_coverage, write_replicates_csv,
                      write_summary_json)
from .noise import sigma_mad, sigma_mols, sigma_rice
from .scenarios import ScenarioSpec, augment_ar, build_design
from .selection import cusum_locate, prominence_order, segment_pvalues
from .thresholds import (gaussian_threshold, light_tailed_threshold,
                         monte_carlo_threshold, self_normalised_quantile)


class InputError(ValueError):
    pass


def _read_series(path) -> np.ndarray:
    """One numeric value per line; a single header line is tolerated."""
    values = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, start=1):
        cell = line.strip().split(",")[0]
        if not cell:
            continue
        try:
            values.append(float(cell))
        except ValueError:
            if lineno == 1:
                continue  # header
            raise InputError(f"{path}:{lineno}: not a number: {cell!r}") from None
    if not values:
        raise InputError(f"{path}: no numeric data")
    return np.asarray(values)


def _read_matrix(path) -> np.ndarray:
    rows = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    width = None
    for lineno, line in enumerate(lines, start=1):
        cells = [c for c in line.strip().split(",") if c != ""]
        if not cells:
            continue
        try:
            row = [float(c) for c in cells]
        except ValueError:
            if lineno == 1 and not rows:
                continue  # header
            raise InputError(f"{path}:{lineno}: non-numeric row") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no numeric data")
    return np.asarray(rows)


def _scenario_from_args(args) -> ScenarioSpec:
    kind = {"const": "piecewise_constant", "poly": "piecewise_polynomial",
            "custom": "custom_regression"}[args.scenario]
    return ScenarioSpec(kind=kind, degree=args.degree, ar_order=args.ar_order)


def _default_sigma_method(args) -> str:
    if args.scenario in ("const", "poly") and args.ar_order == 0:
        return "mad"
    return "mols"


def _estimate_sigma(method: str, y, x) -> tuple[str, float]:
    if method == "rice":
        return method, sigma_rice(y).sigma_hat
    if method == "mad":
        return method, sigma_mad(y).sigma_hat
    if method == "mols":
        return method, sigma_mols(y, x).sigma_hat
    try:
        value = float(method)
    except ValueError:
        raise InputError(f"--sigma must be rice|mad|mols or a number, got {method!r}")
    if value <= 0:
        raise InputError("--sigma must be positive")
    return "user_supplied", value


def cmd_detect(args) -> int:
    t0 = time.perf_counter()
    y = _read_series(args.data)
    scenario = _scenario_from_args(args)
    custom = _read_matrix(args.design) if args.design else None
    if scenario.kind == "custom_regression" and custom is None:
        raise InputError("--scenario custom requires --design")
    if custom is not None and custom.shape[0] != y.size:
        raise InputError(f"design has {custom.shape[0]} rows but the series has {y.size}")
    x = build_design(scenario, y.size, custom)
    r = args.ar_order
    if r >= 1:
        y_run, x_run = augment_ar(y, x, r)
    else:
        y_run, x_run = y, x

    sigma_method = args.sigma or _default_sigma_method(args)
    if args.selfnorm:
        threshold = self_normalised_quantile(
            args.alpha, args.epsilon, n_rep=args.sn_rep,
            grid_size=args.sn_grid, seed=args.seed)
        sigma_used, sigma_hat = None, None
    else:
        sigma_used, sigma_hat = _estimate_sigma(sigma_method, y_run, x_run)
        threshold = gaussian_threshold(y_run.size, args.alpha, sigma_hat)

    cfg = NspConfig(
        threshold=threshold, M=args.M, sampling=args.sampling,
        overlap=args.overlap.replace("-", "_"),
        deviation_mode="self_normalised" if args.selfnorm else "plain",
        epsilon=args.epsilon, ar_order=r, seed=args.seed)
    result = nsp_run(y_run, x_run, cfg)

    gap_rows = []
    if not args.selfnorm:
        for g in segment_pvalues(y_run, x_run, result, threshold):
            gap_rows.append({"start": g.start + r, "end": g.end + r,
                             "deviation": g.deviation,
                             "pvalue_bound": g.pvalue_bound})
    ranks = {e.order: i + 1 for i, e in enumerate(prominence_order(result))}
    rows = []
    for d in result.detections:
        located = None
        if args.locate:
            located = cusum_locate(y_run, (d.start, d.end)) + r
        rows.append({
            "start": d.start + r, "end": d.end + r,
            "deviation": d.deviation, "threshold": d.threshold,
            "order": d.order, "prominence_rank": ranks[d.order],
            "parent": [d.parent[0] + r, d.parent[1] + r],
            "located_change_point": located,
        })
    out = {
        "intervals": rows,
        "total_interval_length": sum(r["end"] - r["start"] for r in rows),
        "gap_pvalues": gap_rows,
        "threshold": threshold.to_dict(),
        "manifest": {
            "input": os.fspath(args.data),
            "design": os.fspath(args.design) if args.design else None,
            "version": __version__,
            "seed": args.seed,
            "M": args.M,
            "alpha": args.alpha,
            "sampling": args.sampling,
            "overlap": args.overlap,
            "deviation_mode": cfg.deviation_mode,
            "epsilon": args.epsilon if args.selfnorm else None,
            "scenario": args.scenario,
            "degree": args.degree,
            "ar_order": r,
            "sigma_method": sigma_used,
            "sigma_hat": sigma_hat,
            "threads": args.threads,
            "wall_time_s": round(time.perf_counter() - t0, 3),
        },
    }
    prefix = args.out
    with open(prefix + ".json", "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    with open(prefix + "_intervals.csv", "w") as fh:
        fh.write("kind,start,end,deviation,prominence_rank\n")
        for row in rows:
            fh.write(f"interval,{row['start']},{row['end']},"
                     f"{row['deviation']!r},{row['prominence_rank']}\n")
            if row["located_change_point"] is not None:
                fh.write(f"change_point,{row['located_change_point']},"
                         f"{row['located_change_point']},"
                         f"{row['deviation']!r},{row['prominence_rank']}\n")
    print(f"{len(rows)} interval(s) written to {prefix}.json")
    return 0


def cmd_threshold(args) -> int:
    if args.method == "gaussian":
        spec = gaussian_threshold(args.T, args.alpha, args.sigma)
    elif args.method == "light-tailed":
        spec = light_tailed_threshold(args.T, args.alpha, args.d, args.kappa)
    elif args.method == "monte-carlo":
        spec = monte_carlo_threshold(args.T, args.alpha,
                                     family_kind=args.family,
                                     n_rep=args.n_rep, seed=args.seed)
    else:
        spec = self_normalised_quantile(args.alpha, args.epsilon,
                                        n_rep=args.sn_rep,
                                        grid_size=args.sn_grid, seed=args.seed)
    text = json.dumps(spec.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_simulate(args) -> int:
    spec = experiment_from_dict(_load_spec_file(args.spec))
    result = run_coverage(spec, threads=args.threads)
    write_replicates_csv(result, args.out + "_replicates.csv")
    write_summary_json(result, args.out + "_summary.json")
    print(f"coverage {result.coverage:.3f} over {spec.n_rep} replicates; "
          f"summary in {args.out}_summary.json")
    return 0


def _load_spec_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    if os.fspath(path).endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        try:
            return tomllib.loads(raw.decode())
        except Exception as exc:
            raise InputError(f"{path}: invalid TOML: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def cmd_locate(args) -> int:
    try:
        with open(args.result) as fh:
            stored = json.load(fh)
    except OSError as exc:
        raise InputError(f"{args.result}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.result}: invalid JSON: {exc}") from exc
    y = _read_series(args.data)
    entries = sorted(stored.get("intervals", []),
                     key=lambda row: row["end"] - row["start"])
    report = []
    for rank, row in enumerate(entries, start=1):
        s, e = row["start"], row["end"]
        if not (1 <= s <= e <= y.size):
            raise InputError(f"stored interval [{s}, {e}] does not fit the series")
        report.append({
            "label": f"{s}-{e}", "start": s, "end": e, "length": e - s,
            "order": row.get("order", rank), "prominence_rank": rank,
            "located_change_point": cusum_locate(y, (s, e)),
        })
    text = json.dumps({"prominence": report}, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsp",
        description="Shortest intervals that must contain a change-point, "
                    "at a global significance level.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="run the search on a CSV series")
    d.add_argument("data", help="CSV with one numeric response value per line")
    d.add_argument("--scenario", choices=["const", "poly", "custom"],
                   default="const")
    d.add_argument("--degree", type=int, default=0,
                   help="polynomial degree for --scenario poly")
    d.add_argument("--design", default=None,
                   help="design matrix CSV for --scenario custom")
    d.add_argument("--ar-order", type=int, default=0, dest="ar_order")
    d.add_argument("--sigma", default=None,
                   help="rice|mad|mols or a positive number "
                        "(default: mad for const/poly, mols otherwise)")
    d.add_argument("--alpha", type=float, default=0.1)
    d.add_argument("--M", type=int, default=1000)
    d.add_argument("--sampling", choices=["grid", "random"], default="grid")
    d.add_argument("--overlap", choices=["none", "half", "in-inference"],
                   default="none")
    d.add_argument("--selfnorm", action="store_true",
                   help="distribution-agnostic self-normalised mode")
    d.add_argument("--epsilon", type=float, default=0.03)
    d.add_argument("--sn-rep", type=int, default=2000, dest="sn_rep")
    d.add_argument("--sn-grid", type=int, default=1024, dest="sn_grid")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--locate", action="store_true",
                   help="estimate a change location inside each interval")
    d.add_argument("--threads", type=int, default=_default_threads())
    d.add_argument("--out", default="nsp_result")
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("threshold", help="calibrate and print a threshold")
    t.add_argument("--method",
                   choices=["gaussian", "light-tailed", "monte-carlo", "selfnorm"],
                   default="gaussian")
    t.add_argument("--T", type=int, default=1000)
    t.add_argument("--alpha", type=float, default=0.1)
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--d", type=int, default=4)
    t.add_argument("--kappa", type=float, default=0.25)
    t.add_argument("--family", choices=["dyadic", "all"], default="dyadic")
    t.add_argument("--n-rep", type=int, default=1000, dest="n_rep")
    t.add_argument("--epsilon", type=float, default=0.03)
    t.add_argument("--sn-rep", type=int, default=5000, dest="sn_rep")
    t.add_argument("--sn-grid", type=int, default=1024, dest="sn_grid")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_threshold)

    s = sub.add_parser("simulate", help="replicated coverage experiment")
    s.add_argument("spec", help="experiment spec (JSON, or TOML by extension)")
    s.add_argument("--threads", type=int, default=_default_threads())
    s.add_argument("--out", default="nsp_experiment")
    s.set_defaults(func=cmd_simulate)

    l = sub.add_parser("locate", help="change locations for stored intervals")
    l.add_argument("result", help="JSON produced by detect")
    l.add_argument("data", help="the series the intervals refer to")
    l.add_argument("--out", default=None)
    l.set_defaults(func=cmd_locate)
    return parser


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("NSP_THREADS", "1")))
    except ValueError:
        return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
