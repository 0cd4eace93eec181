"""Command line front-end.

::

    inertiafit simulate config.json -o DIR
    inertiafit estimate manifest.json --method {sliding,inoue,modelfit,all}
               [--window-s W] [--order N] [--horizon-s H] [--washout]
    inertiafit sweep manifest.json --method {sliding,inoue} --from A --to B --step S

Global options ``--out DIR`` and ``--quiet``. Exit status is 0 on success,
2 for input errors and 3 for internal errors; failures print one line
``error[CODE]: message`` to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import EstimationError, InertiaFitError, InputError, UnstableScenario
from .estimators import (
    estimate_inoue,
    estimate_sliding_window,
    fit_sfr,
    sweep_poly_orders,
    sweep_window_lengths,
)
from .manifest import load_manifest
from .plotting import line_chart_svg
from .preprocess import remove_inertial_all
from .sfr_sim import ScenarioConfig, export_event, simulate_event
from .timeseries import write_trace_csv

log = logging.getLogger("inertiafit")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _round(v, digits=10):
    return None if v is None else float(f"{v:.{digits}g}")


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON ({exc})") from None
    config = ScenarioConfig.from_dict(data)
    out = args.output or args.out
    event = simulate_event(config)
    manifest = export_event(event, out)
    _write_json(os.path.join(out, "scenario.json"), config.to_dict())
    log.info("truth: KE=%.6g MW.s  D=%.4g %%/Hz  machine inertia=%.6g MW.s",
             config.ke_true, config.d_true, config.machine_inertia)
    log.info("manifest: %s", manifest)
    return EXIT_OK


# -- estimate -----------------------------------------------------------------

def _error_block(method, exc):
    return {"method": method, "error": getattr(exc, "code", type(exc).__name__),
            "message": str(exc)}


def _table_row(block):
    ke = block.get("ke_mws")
    d = block.get("d_pct_per_hz")
    return [
        block["method"],
        "-" if ke is None else f"{ke:,.0f}",
        "-" if d is None else f"{d:.2f} %",
        block.get("remarks", block.get("error", "")),
    ]


def cmd_estimate(args) -> int:
    started = time.perf_counter()
    man = load_manifest(args.manifest)
    dataset = man.dataset
    cleaned = False
    if args.washout:
        if man.washout is None:
            raise InputError("--washout given but the manifest has no washout block")
        dataset = remove_inertial_all(dataset, man.washout)
        cleaned = True
        log.info("removed inertial components (t_w=%g s)", man.washout.t_w)

    methods = ["sliding", "inoue", "modelfit"] if args.method == "all" else [args.method]
    out = args.out
    os.makedirs(out, exist_ok=True)
    blocks = []
    for method in methods:
        try:
            if method == "sliding":
                est = estimate_sliding_window(dataset, args.window_s)
                blocks.append({
                    "method": "sliding_window", "ke_mws": _round(est.ke),
                    "d_pct_per_hz": None, "rocof_hz_per_s": _round(est.rocof),
                    "hyperparameters": {"window_s": args.window_s},
                    "remarks": f"{args.window_s * 1000:g}-ms window",
                })
            elif method == "inoue":
                est = estimate_inoue(dataset, args.order)
                blocks.append({
                    "method": "inoue", "ke_mws": _round(est.ke), "d_pct_per_hz": None,
                    "rocof_hz_per_s": _round(est.rocof),
                    "hyperparameters": {"order": args.order},
                    "remarks": f"order {args.order}",
                })
            else:
                opts = man.fit
                if args.horizon_s is not None:
                    opts = dataclasses.replace(opts, horizon=args.horizon_s)
                fit = fit_sfr(dataset, options=opts)
                write_trace_csv(fit.fitted_frequency, os.path.join(out, "fitted_frequency.csv"))
                blocks.append({
                    "method": "model_fit", "ke_mws": _round(fit.ke),
                    "d_pct_per_hz": _round(fit.d), "rmse_hz": _round(fit.rmse),
                    "converged": fit.converged, "iterations": fit.iterations,
                    "hyperparameters": {"horizon_s": opts.horizon, "washout": cleaned},
                    "remarks": f"RMSE={fit.rmse:.4g} Hz"
                               + ("" if fit.converged else ", not converged"),
                })
        except EstimationError as exc:
            blocks.append(_error_block(method, exc))
        log.info("%s", " | ".join(_table_row(blocks[-1])))

    report = {
        "software_version": __version__,
        "manifest": os.path.basename(man.path),
        "input_digest": man.digest(),
        "washout_applied": cleaned,
        "results": blocks,
        "table": [["Method", "KE (MW.s)", "D (%)", "Remarks"]]
                 + [_table_row(b) for b in blocks],
    }
    _write_json(os.path.join(out, "report.json"), report)
    # wall-clock data lives apart from the report so the report stays reproducible
    _write_json(os.path.join(out, "run_metadata.json"), {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_s": round(time.perf_counter() - started, 3),
    })
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

def _sweep_values(start, stop, step, integer):
    if step <= 0:
        raise InputError("--step must be positive")
    n = int(round((stop - start) / step)) + 1
    if n < 1:
        return []
    vals = start + step * np.arange(n)
    if integer:
        return [int(round(v)) for v in vals]
    return [round(float(v), 10) for v in vals]


def _truth_ke(manifest_path):
    path = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), "truth.json")
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        return float(json.load(fh)["ke_mws"])


def cmd_sweep(args) -> int:
    man = load_manifest(args.manifest)
    integer = args.method == "inoue"
    values = _sweep_values(args.start, args.stop, args.step, integer)
    if integer:
        result = sweep_poly_orders(man.dataset, values)
        xlabel = "polynomial order"
    else:
        result = sweep_window_lengths(man.dataset, values)
        xlabel = "window length (s)"
    out = args.out
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, f"sweep_{args.method}")
    with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("hyperparameter,ke_mws\n")
        for x, ke in zip(result.hyperparameter_values, result.ke):
            fh.write(f"{x!r},{'nan' if np.isnan(ke) else repr(float(ke))}\n")
    svg = line_chart_svg(result.hyperparameter_values, result.ke,
                         truth=_truth_ke(args.manifest),
                         title=f"{args.method} inertia estimate", xlabel=xlabel,
                         ylabel="KE (MW.s)")
    with open(stem + ".svg", "w", encoding="utf-8") as fh:
        fh.write(svg)
    log.info("wrote %s.csv and %s.svg (%d points)", stem, stem, len(result))
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="inertiafit", parents=[common],
                                     description="Inertia and load relief estimation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a scenario and export it")
    p.add_argument("config")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="run estimators on an event")
    p.add_argument("manifest")
    p.add_argument("--method", choices=("sliding", "inoue", "modelfit", "all"), default="all")
    p.add_argument("--window-s", type=float, default=0.5)
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--horizon-s", type=float, default=None)
    p.add_argument("--washout", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", parents=[common], help="sweep window length or order")
    p.add_argument("manifest")
    p.add_argument("--method", choices=("sliding", "inoue"), required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.out = getattr(args, "out", ".")
    quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format="%(message)s", stream=sys.stdout, force=True)
    if args.command == "simulate" and args.output is None and args.out == ".":
        print("error[USAGE]: simulate needs -o DIR", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, UnstableScenario) as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InertiaFitError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"error[IO_ERROR]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"error[INTERNAL_ERROR]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
