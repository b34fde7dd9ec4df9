"""Command-line runs: every computation as a reproducible file-producing job.

Each subcommand reads an optional JSON config, applies flag overrides, writes
CSV/JSON data files plus exactly one run manifest, and reports through exit
codes: 0 ok, 2 config problem, 3 numerical failure, 4 infeasible optimization.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

from . import __version__
from .cascade import (
    bandwidth_analytic,
    bandwidth_to_json,
    conversion_spectrum,
    extract_bandwidth,
    spectrum_to_csv,
)
from .core import (
    SCHEMA_VERSION,
    ArrayConfig,
    ConfigError,
    FrequencyGrid,
    SingularMatrixError,
    SpectrumError,
    config_from_dict,
    config_to_dict,
    materialize_sites,
)
from .loss import (
    alpha_fit_to_json,
    backscatter_alpha_fit,
    backscatter_efficiency_table,
    efficiency_vs_loss,
    sweep_to_csv,
)
from .noise import (
    added_noise_spectrum,
    noise_to_csv,
    stokes_noise_spectrum,
    stokes_to_csv,
)
from .optimize import OptimizationProblem, optimize_couplings, result_to_json

__all__ = ["main", "build_parser"]

_DEFAULT_PROFILE = {"kind": "tanh", "g_bar1": 0.08, "g_bar2": 0.08, "beta": 4.5}


# ---------------------------------------------------------------------------
# config resolution: file -> dict, flags override, then validate

def _load_doc(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fp:
            doc = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION!r})"
        )
    return doc


def _doc_for(args) -> dict:
    return _load_doc(args.config) if getattr(args, "config", None) else {}


def _pick(args, attr: str, doc: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, attr, None)
    if flag is not None:
        return flag
    return doc.get(key, default)


def _resolve_array_config(args, doc: dict) -> ArrayConfig:
    profile = dict(doc.get("profile") or _DEFAULT_PROFILE)
    kind_flag = getattr(args, "profile", None)
    if kind_flag is not None:
        profile["kind"] = kind_flag
        profile.setdefault("g_bar1", 0.08)
        profile.setdefault("g_bar2", profile["g_bar1"])
    g = getattr(args, "g", None)
    if g is not None:
        if profile.get("kind") == "explicit":
            raise ConfigError("--g cannot override an explicit coupling profile")
        profile["g_bar1"] = profile["g_bar2"] = g
    beta = getattr(args, "beta", None)
    if beta is not None:
        if profile.get("kind") != "tanh":
            raise ConfigError("--beta applies only to the tanh profile")
        profile["beta"] = beta
    merged = {
        "schema_version": SCHEMA_VERSION,
        "n_sites": _pick(args, "n", doc, "n_sites", 10),
        "profile": profile,
        "kappa1": _pick(args, "kappa1", doc, "kappa1", 1.0),
        "kappa2": _pick(args, "kappa2", doc, "kappa2", 1.0),
        "gamma": _pick(args, "gamma", doc, "gamma", 0.0),
        "n_bar": _pick(args, "n_bar", doc, "n_bar", 0.0),
    }
    if "kappa_ref" in doc:
        merged["kappa_ref"] = doc["kappa_ref"]
    return config_from_dict(merged)


def _resolve_grid(args, doc: dict, default_half_width: float,
                  default_points: int, center: float = 0.0) -> FrequencyGrid:
    gdoc = doc.get("grid") or {}
    omega_max = _pick(args, "omega_max", gdoc, "omega_max", None)
    omega_min = _pick(args, "omega_min", gdoc, "omega_min", None)
    points = _pick(args, "points", gdoc, "points", default_points)
    if omega_max is None:
        omega_max = center + default_half_width
    if omega_min is None:
        omega_min = 2 * center - omega_max
    try:
        return FrequencyGrid(float(omega_min), float(omega_max), int(points))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid frequency grid: {exc}") from exc


def _grid_dict(grid: FrequencyGrid) -> dict:
    return {"omega_min": grid.omega_min, "omega_max": grid.omega_max,
            "points": grid.n_points}


def _parse_floats(text: str, what: str) -> list:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{what} must be a comma-separated list of numbers: {text!r}") from exc


def _write_manifest(out: str, command: str, config: dict, outputs: list,
                    started: float) -> str:
    path = f"{out}_manifest.json"
    doc = {
        "command": command,
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "duration_seconds": round(time.perf_counter() - started, 6),
        "outputs": [str(p) for p in outputs],
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# subcommands

def cmd_spectrum(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    config = _resolve_array_config(args, doc)
    grid = _resolve_grid(args, doc, default_half_width=2.0, default_points=2001)
    sp = conversion_spectrum(config, grid)
    bw = extract_bandwidth(sp)
    csv_path = f"{args.out}.csv"
    json_path = f"{args.out}_bandwidth.json"
    spectrum_to_csv(sp, csv_path)
    bandwidth_to_json(bw, json_path)
    _write_manifest(args.out, "spectrum",
                    {"array": config_to_dict(config), "grid": _grid_dict(grid)},
                    [csv_path, json_path], started)
    return 0


def cmd_bandwidth_scan(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    base = _resolve_array_config(args, doc)
    if base.profile.kind == "explicit":
        raise ConfigError("bandwidth-scan needs a parametric profile (linear or tanh)")
    n_lo = int(_pick(args, "n_min", doc, "n_min", 1))
    n_hi = int(_pick(args, "n_max", doc, "n_max", 200))
    if not 1 <= n_lo <= n_hi:
        raise ConfigError(f"invalid size range {n_lo}..{n_hi}")
    grid = _resolve_grid(args, doc, default_half_width=2.5, default_points=1201)
    asymmetric = bool(_pick(args, "asymmetric", doc, "asymmetric", False))

    # closed-form columns use the mean linewidth of a (possibly ramped) rule
    k1 = config_to_dict(base)["kappa1"]
    kappa = 0.5 * (k1[0] + k1[1]) if isinstance(k1, list) else float(k1)
    g = base.profile.g_bar1

    def fwhm_at(config) -> float:
        return extract_bandwidth(conversion_spectrum(config, grid)).fwhm

    header = "n,fwhm_numeric,fwhm_eq4,fwhm_linear_fit"
    if asymmetric:
        header += ",fwhm_asymmetric"
    csv_path = f"{args.out}.csv"
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for n in range(n_lo, n_hi + 1):
            cfg = replace(base, n_sites=n)
            row = [fwhm_at(cfg), bandwidth_analytic(g, kappa, n),
                   4 * g * g * n / kappa]
            if asymmetric:
                k2 = [10 * k1[0], 10 * k1[1]] if isinstance(k1, list) else 10 * float(k1)
                row.append(fwhm_at(replace(cfg, kappa2=tuple(k2) if isinstance(k2, list) else k2)))
            fh.write(",".join([str(n)] + [f"{x:.12g}" for x in row]) + "\n")

    _write_manifest(args.out, "bandwidth-scan",
                    {"array": config_to_dict(base), "grid": _grid_dict(grid),
                     "n_min": n_lo, "n_max": n_hi, "asymmetric": asymmetric},
                    [csv_path], started)
    return 0


def cmd_noise(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    config = _resolve_array_config(args, doc)
    grid = _resolve_grid(args, doc, default_half_width=2.0, default_points=2001)
    sp = added_noise_spectrum(config, grid)
    csv_path = f"{args.out}.csv"
    noise_to_csv(sp, csv_path)
    _write_manifest(args.out, "noise",
                    {"array": config_to_dict(config), "grid": _grid_dict(grid)},
                    [csv_path], started)
    return 0


def cmd_stokes(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    config = _resolve_array_config(args, doc)
    omega_m = float(_pick(args, "omega_m", doc, "omega_m", 10.0))
    grid = _resolve_grid(args, doc, default_half_width=1.5, default_points=2001,
                         center=omega_m)
    sp = stokes_noise_spectrum(config, omega_m, grid)
    csv_path = f"{args.out}.csv"
    stokes_to_csv(sp, csv_path)
    _write_manifest(args.out, "stokes",
                    {"array": config_to_dict(config), "grid": _grid_dict(grid),
                     "omega_m": omega_m},
                    [csv_path], started)
    return 0


def cmd_loss(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    config = _resolve_array_config(args, doc)
    param = _pick(args, "param", doc, "param", "kappa_int")
    if args.values is not None:
        values = _parse_floats(args.values, "--values")
    else:
        values = doc.get("values", [0.0, 0.005, 0.01, 0.02, 0.05])
    rows = efficiency_vs_loss(param, values, materialize_sites(config))
    csv_path = f"{args.out}.csv"
    sweep_to_csv(rows, csv_path)
    _write_manifest(args.out, "loss",
                    {"array": config_to_dict(config), "param": param,
                     "values": [float(v) for v in values]},
                    [csv_path], started)
    return 0


def cmd_backscatter(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    config = _resolve_array_config(args, doc)
    if args.ratios is not None:
        ratios = _parse_floats(args.ratios, "--ratios")
    else:
        ratios = doc.get("ratios", [0.02, 0.05, 0.1, 0.15, 0.2])
    zeta = float(_pick(args, "zeta", doc, "zeta", 0.0))
    fit_alpha = bool(_pick(args, "fit_alpha", doc, "fit_alpha", False))
    table = backscatter_efficiency_table(ratios, materialize_sites(config), zeta=zeta)
    csv_path = f"{args.out}.csv"
    sweep_to_csv(table, csv_path)
    outputs = [csv_path]
    if fit_alpha:
        fit = backscatter_alpha_fit(table)
        alpha_path = f"{args.out}_alpha.json"
        alpha_fit_to_json(fit, alpha_path)
        outputs.append(alpha_path)
    _write_manifest(args.out, "backscatter",
                    {"array": config_to_dict(config),
                     "ratios": [float(r) for r in ratios], "zeta": zeta,
                     "fit_alpha": fit_alpha},
                    outputs, started)
    return 0


def cmd_optimize(args) -> int:
    started = time.perf_counter()
    doc = _doc_for(args)
    n = int(_pick(args, "n", doc, "n_sites", 2))
    gamma_total = float(_pick(args, "gamma_total", doc, "gamma_total", 0.05))
    min_eff = float(_pick(args, "min_eff", doc, "min_efficiency", 0.99))
    seed = int(_pick(args, "seed", doc, "seed", 97))
    starts = int(_pick(args, "starts", doc, "starts", 3))
    workers = args.threads if args.threads is not None else os.cpu_count() or 1
    if workers < 1:
        raise ConfigError("--threads must be >= 1")
    try:
        problem = OptimizationProblem(n_sites=n, gamma_total=gamma_total,
                                      min_efficiency=min_eff)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = optimize_couplings(problem, n_random_starts=starts, seed=seed,
                                workers=workers)
    json_path = f"{args.out}.json"
    result_to_json(problem, result, json_path)
    _write_manifest(args.out, "optimize",
                    {"problem": {"n_sites": n, "gamma_total": gamma_total,
                                 "min_efficiency": min_eff},
                     "seed": seed, "starts": starts, "threads": workers},
                    [json_path], started)
    if not result.converged:
        print(f"optimization infeasible: passband floor {result.passband_min:.6g} "
              f"< required {min_eff:.6g}", file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------
# parser assembly

def _add_common(p: argparse.ArgumentParser, default_out: str) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out", default=default_out,
                   help="output path prefix (default: %(default)s)")


def _add_array_flags(p: argparse.ArgumentParser, with_n: bool = True) -> None:
    if with_n:
        p.add_argument("--n", type=int, help="number of array sites")
    p.add_argument("--profile", choices=("linear", "tanh"),
                   help="coupling profile shape")
    p.add_argument("--g", type=float, help="peak coupling rate (both lanes)")
    p.add_argument("--beta", type=float, help="tanh ramp steepness")
    p.add_argument("--kappa1", type=float, help="microwave cavity linewidth")
    p.add_argument("--kappa2", type=float, help="optical cavity linewidth")
    p.add_argument("--gamma", type=float, help="mechanical linewidth")
    p.add_argument("--n-bar", type=float, help="mechanical bath occupation")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega-min", type=float, help="grid lower edge")
    p.add_argument("--omega-max", type=float, help="grid upper edge")
    p.add_argument("--points", type=int, help="number of grid points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oemarray",
        description="Transducer-array spectra, scans, noise budgets, loss "
                    "sweeps, and coupling optimization as reproducible runs.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (config schema {SCHEMA_VERSION})")
    parser.add_argument("--threads", type=int,
                        help="cap worker threads (default: all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="conversion spectrum and bandwidth")
    _add_common(p, "spectrum")
    _add_array_flags(p)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("bandwidth-scan", help="bandwidth versus array size")
    _add_common(p, "bandwidth_scan")
    _add_array_flags(p, with_n=False)
    _add_grid_flags(p)
    p.add_argument("--n-min", type=int, help="smallest array size (default 1)")
    p.add_argument("--n-max", type=int, help="largest array size (default 200)")
    p.add_argument("--asymmetric", action="store_true", default=None,
                   help="add a kappa2 = 10*kappa1 scenario column")
    p.set_defaults(func=cmd_bandwidth_scan)

    p = sub.add_parser("noise", help="added-noise spectral densities")
    _add_common(p, "noise")
    _add_array_flags(p)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("stokes", help="amplification-noise density near omega_m")
    _add_common(p, "stokes")
    _add_array_flags(p)
    _add_grid_flags(p)
    p.add_argument("--omega-m", type=float, help="mechanical frequency (default 10)")
    p.set_defaults(func=cmd_stokes)

    p = sub.add_parser("loss", help="resonant efficiency versus a loss parameter")
    _add_common(p, "loss")
    _add_array_flags(p)
    p.add_argument("--param", choices=("kappa_int", "epsilon", "kappa_l"),
                   help="which loss channel to sweep")
    p.add_argument("--values", help="comma-separated sweep values")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("backscatter", help="envelope efficiency versus kappa_L/kappa_R")
    _add_common(p, "backscatter")
    _add_array_flags(p)
    p.add_argument("--ratios", help="comma-separated kappa_L/kappa_R ratios")
    p.add_argument("--zeta", type=float, help="per-cell propagation loss exponent")
    p.add_argument("--fit-alpha", action="store_true", default=None,
                   help="also fit the efficiency-deficit slope")
    p.set_defaults(func=cmd_backscatter)

    p = sub.add_parser("optimize", help="constrained bandwidth maximization")
    _add_common(p, "optimize")
    p.add_argument("--n", type=int, help="number of array sites")
    p.add_argument("--gamma-total", type=float, help="summed conversion rate")
    p.add_argument("--min-eff", type=float, help="passband efficiency floor")
    p.add_argument("--seed", type=int, help="random-restart seed (default 97)")
    p.add_argument("--starts", type=int, help="number of random restarts (default 3)")
    p.set_defaults(func=cmd_optimize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SingularMatrixError, SpectrumError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
