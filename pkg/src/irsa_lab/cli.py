"""Command-line front end: ad-hoc runs and figure-style experiment presets.

Two subcommands:

* ``run``    -- execute one configuration for N runs and emit per-run and
  aggregate CSVs.
* ``preset`` -- expand a named parameter grid (one preset per headline
  experiment), execute every point, and emit per-run plus per-point CSVs.

Configs come from an optional JSON/TOML file; any field can be overridden by
a flag of the same name (``--tau 20``). ``IRSA_LAB_SEED`` is used when no
seed is given anywhere else. Numeric CSV cells carry 12 significant digits;
wall-clock columns are left empty unless ``--timings`` is passed, so output
bytes are reproducible for a fixed seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigurationError, SystemConfig, config_from_dict
from .harness import (RunRecord, aggregate, roc_curves, roc_envelope,
                      run_monte_carlo)

_TIMING_FIELDS = ("uad_ms", "decode_ms")
_RECORD_FIELDS = [f.name for f in dataclasses.fields(RunRecord)]


# ---------------------------------------------------------------------------
# presets: one per headline experiment
# ---------------------------------------------------------------------------

@dataclass
class Preset:
    name: str
    description: str
    grid: dict[str, list]          # axis -> values; "a,b" keys sweep tuples
    fixed: dict = field(default_factory=dict)
    kind: str = "mc"               # "mc" (Monte Carlo records) or "roc"
    default_runs: int = 25
    thresholds: tuple = ()
    algorithms: tuple = ("proposed",)


_TAUS = [5, 10, 15, 20, 25, 30, 35, 40]
_SNRS = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
_ROC_THRESHOLDS = tuple(np.logspace(-8, 2, 31))
# Zadoff-Chu needs a prime pilot length and Hadamard a power of two, so the
# pilot-family comparisons pin a per-family tau of comparable size.
_PILOT_PAIRS = [("gaussian", 8), ("bpsk", 8), ("qpsk", 8), ("zadoff_chu", 7),
                ("hadamard_opr", 8), ("dft_opr", 8)]
_PILOT_PAIRS_LONG = [("gaussian", 16), ("bpsk", 16), ("qpsk", 16),
                     ("zadoff_chu", 13), ("hadamard_opr", 16), ("dft_opr", 16)]

PRESETS: dict[str, Preset] = {p.name: p for p in [
    Preset("roc", "detector ROC comparison at N=4, L=3",
           grid={"tau": [10, 15]},
           fixed={"N": 4, "L": 3, "decode": False},
           kind="roc", thresholds=_ROC_THRESHOLDS,
           algorithms=("proposed", "rb_voting", "one_shot")),
    Preset("err_vs_tau", "error rates vs pilot length",
           grid={"tau": _TAUS, "L": [1, 2, 3]},
           fixed={"N": 16, "decode": False}),
    Preset("fnr_vs_N", "FNR vs antenna count",
           grid={"N": [2, 4, 8, 16, 32, 64], "L": [1, 2, 3], "tau": [10, 15]},
           fixed={"decode": False}),
    Preset("err_vs_snr", "error rates vs cell-edge SNR",
           grid={"cell_edge_snr_db": _SNRS, "L": [1, 2, 3]},
           fixed={"tau": 10, "N": 16, "decode": False}),
    Preset("nmse_vs_tau", "channel-estimate NMSE and CRB vs pilot length",
           grid={"tau": [5, 10, 15, 20, 25, 30, 40], "L": [1, 2, 3]},
           fixed={"N": 16, "decode": False, "genie": True}),
    Preset("nmse_vs_snr", "channel-estimate NMSE and CRB vs cell-edge SNR",
           grid={"cell_edge_snr_db": _SNRS, "tau": [10, 20], "L": [1, 2]},
           fixed={"N": 16, "decode": False, "genie": True}),
    Preset("thpt_vs_L", "throughput vs load, estimated and perfect detection",
           grid={"L": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0], "tau": [5, 20, 80],
                 "uad_mode": ["estimated", "perfect"]},
           fixed={"N": 16, "gamma_th": 16.0, "lam": 1.0}),
    Preset("thpt_vs_tau", "throughput vs pilot length",
           grid={"tau": _TAUS, "L": [1, 2], "cell_edge_snr_db": [-5.0, 10.0]},
           fixed={"N": 16, "gamma_th": 10.0, "lam": 1e-2}),
    Preset("thpt_vs_N", "throughput vs antenna count",
           grid={"N": [4, 8, 16, 32, 64], "L": [2, 3], "tau": [5, 20],
                 "uad_mode": ["estimated", "perfect"]},
           fixed={"gamma_th": 10.0, "lam": 1e-2}),
    Preset("thpt_vs_snr", "throughput vs cell-edge SNR",
           grid={"cell_edge_snr_db": _SNRS, "L": [1, 2, 3], "tau": [10, 40]},
           fixed={"N": 16, "gamma_th": 10.0, "lam": 1e-2}),
    Preset("pilots_roc", "detector ROC for different pilot families",
           grid={"pilot_type,tau": _PILOT_PAIRS},
           fixed={"N": 4, "L": 3, "decode": False},
           kind="roc", thresholds=_ROC_THRESHOLDS),
    Preset("pilots_thpt", "throughput vs load for different pilot families",
           grid={"L": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                 "pilot_type,tau": _PILOT_PAIRS_LONG},
           fixed={"uad_mode": "perfect", "N": 16, "gamma_th": 6.0, "lam": 1.0}),
    Preset("impsic", "perfect vs imperfect cancellation",
           grid={"L": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0], "tau": [5, 10, 20],
                 "sic_mode": ["perfect", "imperfect"]},
           fixed={"uad_mode": "perfect", "pilot_type": "bpsk", "N": 16,
                  "gamma_th": 10.0, "lam": 1e-2}),
]}


def expand_grid(preset: Preset) -> list[dict]:
    """Cartesian product of the preset's axes, in declaration order."""
    axes = []
    for key, values in preset.grid.items():
        names = key.split(",")
        points = []
        for v in values:
            vals = v if isinstance(v, (tuple, list)) else (v,)
            points.append(dict(zip(names, vals)))
        axes.append(points)
    return [dict(itertools.chain.from_iterable(p.items() for p in combo))
            for combo in itertools.product(*axes)]


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _record_rows(records: list[RunRecord], grid_point: dict,
                 timings: bool) -> list[list]:
    rows = []
    for rec in records:
        d = dataclasses.asdict(rec)
        if not timings:
            for f in _TIMING_FIELDS:
                d[f] = None
        rows.append([grid_point.get(k) for k in grid_point] +
                    [d[f] for f in _RECORD_FIELDS])
    return rows


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_CONFIG_FLAGS = [f.name for f in dataclasses.fields(SystemConfig)]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON or TOML file with SystemConfig keys")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1,
                        help="concurrent grid points (preset only)")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--progress", action="store_true",
                        help="per-grid-point status lines on stderr")
    parser.add_argument("--timings", action="store_true",
                        help="include wall-clock columns in the CSVs")
    for name in _CONFIG_FLAGS:
        if name in ("seed", "runs"):
            continue
        parser.add_argument(f"--{name}", default=None, metavar="V",
                            help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irsa-lab",
        description="IRSA grant-free random access link simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one ad-hoc configuration")
    _add_common(run_p)
    preset_p = sub.add_parser("preset", help="run a named experiment preset")
    preset_p.add_argument("name", help="preset name (see --list)")
    _add_common(preset_p)
    list_p = sub.add_parser("presets", help="list available presets")
    return parser


def _load_config_file(path: str) -> dict:
    with open(path, "rb") as fh:
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:      # python < 3.11
                import tomli as tomllib
            return tomllib.load(fh)
        return json.load(fh)


def _flag_overrides(args) -> dict:
    out = {}
    for name in _CONFIG_FLAGS:
        if name in ("seed", "runs"):
            continue
        val = getattr(args, name, None)
        if val is not None:
            out[name] = val
    return out


def resolve_config(args, fixed: dict | None = None) -> SystemConfig:
    """defaults < preset fixed < config file < flags; seed/runs resolved last."""
    data: dict = dict(fixed or {})
    if args.config:
        data.update(_load_config_file(args.config))
    data.update(_flag_overrides(args))
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data and os.environ.get("IRSA_LAB_SEED"):
        data["seed"] = int(os.environ["IRSA_LAB_SEED"])
    if args.runs is not None:
        data["runs"] = args.runs
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _progress(enabled: bool):
    def emit(msg: str):
        if enabled:
            print(msg, file=sys.stderr, flush=True)
    return emit


def _run_point(payload):
    """Worker for one grid point; returns rows for the records CSV."""
    (index, base_dict, point, kind, thresholds, algorithms) = payload
    cfg = config_from_dict(point, base=SystemConfig(**base_dict))
    if kind == "roc":
        curves = roc_curves(cfg, thresholds, algorithms=algorithms)
        rows = []
        for alg, pts in curves.items():
            for p in pts:
                rows.append(list(point.values()) + [alg, p.gamma_pr, p.fpr, p.fnr])
        agg_rows = []
        for alg, pts in curves.items():
            agg_rows.append(list(point.values()) + [
                alg,
                roc_envelope(pts, 1e-3), roc_envelope(pts, 1e-2),
                roc_envelope(pts, 1e-1)])
        return index, rows, agg_rows, None
    records = run_monte_carlo(cfg)
    agg = aggregate(records)
    agg_row = list(point.values()) + [
        agg["runs"], agg["fpr"], agg["fnr"], agg["fpr_se"], agg["fnr_se"],
        agg["nmse"], agg["crb_nmse"], agg["genie_mse"], agg["crb_mse"],
        agg["throughput"], agg["throughput_se"]]
    return index, records, [agg_row], point


_AGG_HEADER = ["runs", "fpr", "fnr", "fpr_se", "fnr_se", "nmse", "crb_nmse",
               "genie_mse", "crb_mse", "throughput", "throughput_se"]


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    say = _progress(args.progress)
    say(f"run: {cfg.runs} runs, M={cfg.num_users}, tau={cfg.tau}, N={cfg.N}")
    t0 = time.perf_counter()
    records = run_monte_carlo(cfg)
    say(f"run: finished in {time.perf_counter() - t0:.1f}s")
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "run_records.csv"), _RECORD_FIELDS,
              _record_rows(records, {}, args.timings))
    agg = aggregate(records)
    write_csv(os.path.join(args.out, "run_aggregate.csv"), _AGG_HEADER,
              [[agg["runs"], agg["fpr"], agg["fnr"], agg["fpr_se"],
                agg["fnr_se"], agg["nmse"], agg["crb_nmse"], agg["genie_mse"],
                agg["crb_mse"], agg["throughput"], agg["throughput_se"]]])
    return 0


def cmd_preset(args) -> int:
    if args.name not in PRESETS:
        print(f"unknown preset {args.name!r}; valid presets: "
              f"{', '.join(sorted(PRESETS))}", file=sys.stderr)
        return 2
    preset = PRESETS[args.name]
    if args.runs is None:
        args.runs = preset.default_runs
    base = resolve_config(args, fixed=preset.fixed)
    points = expand_grid(preset)
    grid_keys = list(points[0].keys())
    say = _progress(args.progress)
    payloads = [(i, base.to_dict(), pt, preset.kind, preset.thresholds,
                 preset.algorithms) for i, pt in enumerate(points)]
    results = [None] * len(points)
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for index, rows, agg_rows, pt in pool.map(_run_point, payloads):
                results[index] = (rows, agg_rows)
                say(f"[{index + 1}/{len(points)}] {points[index]} done")
    else:
        for payload in payloads:
            index, rows, agg_rows, pt = _run_point(payload)
            results[index] = (rows, agg_rows)
            say(f"[{index + 1}/{len(points)}] {points[index]} done")
    say(f"preset {preset.name}: {len(points)} points in "
        f"{time.perf_counter() - t0:.1f}s")
    os.makedirs(args.out, exist_ok=True)
    if preset.kind == "roc":
        rec_header = grid_keys + ["algorithm", "gamma_pr", "fpr", "fnr"]
        agg_header = grid_keys + ["algorithm", "fnr_at_fpr_1e-3",
                                  "fnr_at_fpr_1e-2", "fnr_at_fpr_1e-1"]
        rec_rows = [r for rows, _ in results for r in rows]
    else:
        rec_header = grid_keys + _RECORD_FIELDS
        agg_header = grid_keys + _AGG_HEADER
        rec_rows = []
        for (records, _), pt in zip(results, points):
            rec_rows.extend(_record_rows(records, pt, args.timings))
    agg_rows = [r for _, rows in results for r in rows]
    write_csv(os.path.join(args.out, f"{preset.name}_records.csv"),
              rec_header, rec_rows)
    write_csv(os.path.join(args.out, f"{preset.name}_aggregate.csv"),
              agg_header, agg_rows)
    return 0


def cmd_presets(_args) -> int:
    width = max(len(n) for n in PRESETS)
    for name in PRESETS:
        p = PRESETS[name]
        print(f"{name:<{width}}  {p.description}  "
              f"[{len(expand_grid(p))} grid points]")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "preset":
            return cmd_preset(args)
        return cmd_presets(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # incomplete grid -> nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
