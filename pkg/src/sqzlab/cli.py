"""`sqz` command line: normalize | fit | linearity | budget | simulate | report.

Every subcommand prints a human-readable summary and writes the same
numbers to JSON (schemas ship with the package).  Outputs are
deterministic for identical inputs and seed, and files are written
atomically.  Exit codes are a stable contract:

    0  success          3  frequency-grid mismatch
    1  other error      4  no valid points / insufficient data
    2  parse error      5  fit did not converge
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys

from . import __version__
from .detector import LinearityPoint, linearity_fit, saturation_verdict
from .errors import (
    EmptyResultError,
    GridMismatchError,
    InsufficientDataError,
    RangeError,
    SqzError,
    TraceParseError,
)
from .fitting import FitDataset, FitOptions, FitResult, fit, fit_report, initial_guess
from .normalize import (
    clearance,
    normalize_to_shot,
    read_normalized_csv,
    write_normalized_csv,
)
from .opo import LossBudget, OpoParams, loss_budget_product, max_squeezing_db, squeeze_bandwidth
from .synth import generate_campaign, read_scenario
from .traces import read_trace_csv, resample, same_grid, write_text_atomic, write_trace_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_GRID = 3
EXIT_EMPTY = 4
EXIT_NOT_CONVERGED = 5

MANIFEST_HEADER = ("lo_power_w", "noise_csv", "dark_csv")


def _write_json(path, payload) -> None:
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_interval(text: str, flag: str) -> tuple[float, float]:
    try:
        lo_str, hi_str = text.split(":")
        lo, hi = float(lo_str), float(hi_str)
    except ValueError as exc:
        raise TraceParseError(f"{flag} wants lo_hz:hi_hz, got {text!r}") from exc
    if not lo < hi:
        raise TraceParseError(f"{flag} interval needs lo < hi, got {text!r}")
    return lo, hi


def _ensure_outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return os.fspath(path)


# ---- normalize ----

def cmd_normalize(args) -> int:
    measured = read_trace_csv(args.measured)
    shot = read_trace_csv(args.shot)
    dark = read_trace_csv(args.dark)

    resampled = None
    if not (same_grid(measured, shot) and same_grid(measured, dark)):
        if args.resample is None:
            raise GridMismatchError(
                "input traces are not on a common grid; pass --resample to interpolate "
                "shot and dark onto the measured grid"
            )
        shot = resample(shot, measured.frequencies, args.resample)
        dark = resample(dark, measured.frequencies, args.resample)
        resampled = args.resample

    spec = normalize_to_shot(measured, shot, dark, policy=args.policy)
    out_dir = _ensure_outdir(args.out)
    label = measured.label or "measured"
    csv_path = os.path.join(out_dir, f"{label}.normalized.csv")
    write_normalized_csv(spec, csv_path)

    summary = {
        "inputs": {
            "measured": os.fspath(args.measured),
            "shot": os.fspath(args.shot),
            "dark": os.fspath(args.dark),
        },
        "policy": args.policy,
        "resample": resampled,
        "n_points": len(spec),
        "n_invalid": spec.correction.n_invalid,
        "output_csv": csv_path,
    }
    json_path = os.path.join(out_dir, f"{label}.normalize_summary.json")
    _write_json(json_path, summary)
    print(
        f"normalized {label}: {len(spec)} points, {spec.correction.n_invalid} invalid "
        f"-> {csv_path}"
    )
    return EXIT_OK


# ---- fit ----

def _fit_result_payload(result: FitResult) -> dict:
    return {
        "params": {
            "gamma_fwhm_hz": result.params.gamma_fwhm,
            "x": result.params.x,
            "eta": result.params.eta,
        },
        "sigma": {
            "gamma_fwhm_hz": float(result.sigma[0]),
            "x": float(result.sigma[1]),
            "eta": float(result.sigma[2]),
        },
        "covariance": [[float(v) for v in row] for row in result.covariance],
        "rms_residual_db": result.rms_residual_db,
        "n_points": result.n_points,
        "converged": result.converged,
        "iterations": result.iterations,
        "mask": [[lo, hi] for lo, hi in result.mask],
        "condition_number": result.condition_number,
        "cost": result.cost,
    }


def read_fit_result_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise TraceParseError(f"cannot read fit result {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"fit result {path} is not valid JSON: {exc}") from exc
    for key in ("params", "sigma", "converged"):
        if key not in payload:
            raise TraceParseError(f"fit result {path} missing key {key!r}")
    return payload


def cmd_fit(args) -> int:
    squeezed = read_normalized_csv(args.squeezed)
    antisqueezed = read_normalized_csv(args.antisqueezed) if args.antisqueezed else None
    mask = tuple(_parse_interval(m, "--mask") for m in args.mask or [])
    data = FitDataset(squeezed=squeezed, antisqueezed=antisqueezed, mask=mask)

    options = FitOptions(
        max_iter=args.max_iter,
        cost_tol=args.cost_tol,
        step_tol=args.step_tol,
        multistart=args.multistart,
        seed=args.seed,
    )
    if args.init is not None:
        try:
            g, x, eta = (float(tok) for tok in args.init.split(","))
        except ValueError as exc:
            raise TraceParseError(f"--init wants gamma_hz,x,eta, got {args.init!r}") from exc
        init = OpoParams(g, x, eta)
    else:
        init = initial_guess(data)

    result = fit(data, init=init, options=options)
    report = fit_report(result)

    out_dir = _ensure_outdir(args.out)
    _write_json(os.path.join(out_dir, "fit_result.json"), _fit_result_payload(result))
    write_text_atomic(os.path.join(out_dir, "fit_report.txt"), report)
    print(report, end="")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


# ---- linearity ----

def read_linearity_manifest(path) -> list[LinearityPoint]:
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise TraceParseError(f"cannot read manifest {path}: {exc}") from exc
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise TraceParseError("empty linearity manifest")
    reader = csv.reader(io.StringIO("\n".join(rows)))
    header = next(reader)
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise TraceParseError(
            f"bad manifest header {header!r}; expected {','.join(MANIFEST_HEADER)}"
        )
    points = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise TraceParseError(f"manifest row {lineno}: expected 3 columns")
        try:
            power = float(row[0])
        except ValueError as exc:
            raise TraceParseError(f"manifest row {lineno}: {exc}") from exc
        noise = read_trace_csv(os.path.join(base, row[1].strip()))
        dark = read_trace_csv(os.path.join(base, row[2].strip()))
        try:
            points.append(LinearityPoint(power, noise, dark))
        except ValueError as exc:
            raise TraceParseError(f"manifest row {lineno}: {exc}") from exc
    return points


def cmd_linearity(args) -> int:
    points = read_linearity_manifest(args.manifest)
    if args.band is not None:
        band = _parse_interval(args.band, "--band")
    else:
        freqs = points[0].noise.frequencies
        band = (float(freqs[0]), float(freqs[-1]))
    result = linearity_fit(points, band)
    verdict = saturation_verdict(result.exponent, args.tol)

    print(
        f"exponent {result.exponent:.3f}: {result.db_per_doubling:.2f} dB per doubling, "
        f"{verdict}"
    )
    payload = {
        "exponent": result.exponent,
        "db_per_doubling": result.db_per_doubling,
        "verdict": verdict,
        "tolerance": args.tol,
        "band_hz": [result.band[0], result.band[1]],
        "n_powers": result.n_powers,
    }
    if args.out:
        out_dir = _ensure_outdir(args.out)
        _write_json(os.path.join(out_dir, "linearity.json"), payload)
        lines = ["frequency_hz,exponent"]
        for f, e in zip(result.frequencies, result.per_freq_exponents):
            lines.append(f"{f!r},{e!r}")
        write_text_atomic(
            os.path.join(out_dir, "linearity_per_frequency.csv"), "\n".join(lines) + "\n"
        )
    return EXIT_OK


# ---- budget ----

def cmd_budget(args) -> int:
    components = []
    for spec in args.component:
        if "=" not in spec:
            raise TraceParseError(f"--component wants name=efficiency, got {spec!r}")
        name, _, value = spec.partition("=")
        try:
            components.append((name, float(value)))
        except ValueError as exc:
            raise TraceParseError(f"--component {spec!r}: {exc}") from exc
    try:
        budget = LossBudget(tuple(components), fitted_eta=args.fitted_eta)
    except ValueError as exc:
        raise TraceParseError(str(exc)) from exc
    product, residual = loss_budget_product(budget)

    for name, eff in budget.components:
        print(f"  {name}: {eff:.4f}")
    print(f"product: {product:.4f}")
    payload = {
        "components": [{"name": n, "efficiency": e} for n, e in budget.components],
        "product": product,
        "fitted_eta": budget.fitted_eta,
        "residual_vs_fitted": residual,
    }
    if residual is not None:
        print(f"fitted eta: {budget.fitted_eta:.4f}")
        print(f"residual (fitted/product): {residual:.4f}")
    if args.out:
        out_dir = _ensure_outdir(args.out)
        _write_json(os.path.join(out_dir, "budget.json"), payload)
    return EXIT_OK


# ---- simulate ----

def cmd_simulate(args) -> int:
    scenario = read_scenario(args.scenario)
    env_seed = os.environ.get("SQZ_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise TraceParseError(f"SQZ_SEED must be an integer, got {env_seed!r}") from exc
        scenario = dataclasses.replace(scenario, seed=seed)

    campaign = generate_campaign(scenario)
    out_dir = _ensure_outdir(args.out)
    for name, trace in (
        ("shot", campaign.shot),
        ("dark", campaign.dark),
        ("squeezed", campaign.squeezed),
        ("antisqueezed", campaign.antisqueezed),
    ):
        write_trace_csv(trace, os.path.join(out_dir, f"{name}.csv"))

    if campaign.linearity:
        lin_dir = _ensure_outdir(os.path.join(out_dir, "linearity"))
        manifest_rows = [",".join(MANIFEST_HEADER)]
        for i, point in enumerate(campaign.linearity):
            noise_name = f"noise_p{i}.csv"
            dark_name = f"dark_p{i}.csv"
            write_trace_csv(point.noise, os.path.join(lin_dir, noise_name))
            write_trace_csv(point.dark, os.path.join(lin_dir, dark_name))
            manifest_rows.append(f"{point.lo_power!r},{noise_name},{dark_name}")
        write_text_atomic(
            os.path.join(lin_dir, "manifest.csv"), "\n".join(manifest_rows) + "\n"
        )

    truth = {
        "params": {
            "gamma_fwhm_hz": scenario.params.gamma_fwhm,
            "x": scenario.params.x,
            "eta": scenario.params.eta,
        },
        "seed": scenario.seed,
        "noise_sigma_db": scenario.trace_noise_sigma_db,
        "n_averages": scenario.n_averages,
        "shot_level_dbm": scenario.shot_level_dbm,
        "n_points": int(len(scenario.grid)),
        "has_imbalance": scenario.imbalance is not None,
        "lo_powers_w": list(scenario.lo_powers),
    }
    _write_json(os.path.join(out_dir, "ground_truth.json"), truth)
    print(
        "simulated campaign: gamma_fwhm = {g:.6g} Hz, x = {x:.6g}, eta = {e:.6g} "
        "(seed {s}) -> {d}".format(
            g=scenario.params.gamma_fwhm,
            x=scenario.params.x,
            e=scenario.params.eta,
            s=scenario.seed,
            d=out_dir,
        )
    )
    return EXIT_OK


# ---- report ----

def cmd_report(args) -> int:
    run = os.fspath(args.run)
    fit_path = os.path.join(run, "fit_result.json")
    if not os.path.exists(fit_path):
        raise TraceParseError(f"no fit result at {fit_path}; run `sqz fit` first")
    payload = read_fit_result_json(fit_path)
    p = payload["params"]
    params = OpoParams(p["gamma_fwhm_hz"], p["x"], p["eta"])

    spectra = {}
    for name in ("squeezed", "antisqueezed"):
        path = os.path.join(run, f"{name}.normalized.csv")
        if not os.path.exists(path):
            raise TraceParseError(f"missing normalized spectrum {path}")
        spectra[name] = read_normalized_csv(path)

    out_dir = _ensure_outdir(args.out or run)

    from . import _kernels
    from .opo import quadrature_sign

    for name, spec in spectra.items():
        model = _kernels.model_db(
            spec.frequencies, params.gamma_fwhm, params.x, params.eta,
            quadrature_sign(name),
        )
        lines = ["frequency_hz,model_db"]
        for f, m in zip(spec.frequencies, model):
            lines.append(f"{f!r},{m!r}")
        write_text_atomic(os.path.join(out_dir, f"model_{name}.csv"), "\n".join(lines) + "\n")

    loss_limited_db = max_squeezing_db(params.eta) if params.eta < 1.0 else None
    try:
        bandwidth_hz = squeeze_bandwidth(params, args.threshold_db)
    except (ValueError, SqzError):
        bandwidth_hz = None

    clearance_summary = None
    shot_path, dark_path = os.path.join(run, "shot.csv"), os.path.join(run, "dark.csv")
    if os.path.exists(shot_path) and os.path.exists(dark_path):
        shot, dark = read_trace_csv(shot_path), read_trace_csv(dark_path)
        if same_grid(shot, dark):
            clear = clearance(shot, dark)
            lines = ["frequency_hz,clearance_db"]
            for f, c in zip(clear.frequencies, clear.powers):
                lines.append(f"{f!r},{c!r}")
            write_text_atomic(os.path.join(out_dir, "clearance.csv"), "\n".join(lines) + "\n")
            clearance_summary = {
                "at_min_freq_db": float(clear.powers[0]),
                "at_max_freq_db": float(clear.powers[-1]),
                "min_db": float(clear.powers.min()),
            }

    report = {
        "fit": payload,
        "loss_limited_squeezing_db": loss_limited_db,
        "squeeze_bandwidth_hz": bandwidth_hz,
        "bandwidth_threshold_db": args.threshold_db,
        "clearance": clearance_summary,
    }
    _write_json(os.path.join(out_dir, "report.json"), report)

    text = io.StringIO()
    text.write("run report\n==========\n")
    text.write(
        "gamma_fwhm = {:.6g} GHz   x = {:.6g}   eta = {:.4g} %\n".format(
            params.gamma_fwhm / 1e9, params.x, 100 * params.eta
        )
    )
    if loss_limited_db is not None:
        text.write(f"loss-limited squeezing {loss_limited_db:.1f} dB\n")
    if bandwidth_hz is not None:
        text.write(
            f"{args.threshold_db:g} dB squeeze bandwidth {bandwidth_hz / 1e9:.2f} GHz\n"
        )
    else:
        text.write(f"{args.threshold_db:g} dB squeeze bandwidth: not reached\n")
    if clearance_summary is not None:
        text.write(
            "dark-noise clearance {:.1f} dB at {:.3g} MHz, {:.1f} dB at {:.3g} GHz\n".format(
                clearance_summary["at_min_freq_db"],
                spectra["squeezed"].frequencies[0] / 1e6,
                clearance_summary["at_max_freq_db"],
                spectra["squeezed"].frequencies[-1] / 1e9,
            )
        )
    text.write(
        "fit rms residual {:.4g} dB over {} points, converged: {}\n".format(
            payload.get("rms_residual_db", float("nan")),
            payload.get("n_points", 0),
            "yes" if payload["converged"] else "NO",
        )
    )
    write_text_atomic(os.path.join(out_dir, "report.txt"), text.getvalue())
    print(text.getvalue(), end="")
    return EXIT_OK


# ---- parser ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqz",
        description="Squeezed-vacuum spectrum toolkit: calibrate, fit, diagnose, simulate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="dark-correct and shot-normalize a trace")
    p.add_argument("--measured", required=True)
    p.add_argument("--shot", required=True)
    p.add_argument("--dark", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resample", choices=("linear", "nearest"), default=None,
                   help="interpolate shot/dark onto the measured grid when grids differ")
    p.add_argument("--policy", choices=("flag", "raise"), default="flag")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("fit", help="fit the OPO model to normalized spectra")
    p.add_argument("--squeezed", required=True)
    p.add_argument("--antisqueezed", default=None)
    p.add_argument("--mask", action="append", metavar="LO:HI",
                   help="frequency interval (Hz) to exclude; repeatable")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--cost-tol", type=float, default=1e-10)
    p.add_argument("--step-tol", type=float, default=1e-12)
    p.add_argument("--multistart", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", default=None, metavar="GAMMA_HZ,X,ETA")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("linearity", help="shot-noise linearity test from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--band", default=None, metavar="LO:HI")
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_linearity)

    p = sub.add_parser("budget", help="multiply efficiency components, compare to fitted eta")
    p.add_argument("--component", action="append", required=True, metavar="NAME=EFF")
    p.add_argument("--fitted-eta", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("simulate", help="generate a synthetic campaign from a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="consolidated report for a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--threshold-db", type=float, default=3.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TraceParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (GridMismatchError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GRID
    except (EmptyResultError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except SqzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main_entry() -> None:
    sys.exit(main())
