"""Command line entry point.

Subcommands cover the full workflow: gen-data, train, eval, bench, cka,
sweep. Every command writes a manifest.json beside its outputs recording
the fully resolved configuration, and is deterministic under fixed flags
and seed (wall-clock timing fields and the manifest timestamps are the
only values that vary between reruns).

Every flag can also be set through an environment variable named after it
with the EIF_ prefix, for example EIF_EPOCHS=5; an explicit flag wins.

Exit codes: 0 success, 2 flag or config validation, 3 numeric abort,
4 unreadable or incompatible inputs, 5 every sweep row failed.
"""

import argparse
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bench_forward, cka_matrix, extract_representations, sweep
from .data import (
    ScenarioSpec,
    chrono_split,
    gen_synthetic,
    load_dataset,
    make_windows,
    save_dataset,
    scenario_selection,
)
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    CorruptionError,
    DegenerateInputError,
    EiformerError,
    InductivenessError,
    IngestionError,
    NumericError,
    OracleError,
    ShapeError,
    SplitError,
)
from .model import ARCHS, ModelConfig
from .train import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_INPUT = 4
EXIT_ALL_FAILED = 5


class CliError(Exception):
    """Flag-level validation failure, reported as exit code 2."""


def _fail(message: str):
    raise CliError(message)


def _env_key(flag: str) -> str:
    return "EIF_" + flag.replace("-", "_").upper()


def _add_flag(parser, flag: str, *, type=str, default=None, help="", choices=None,
              required=False):
    """add_argument with an EIF_ environment override for the default."""
    raw = os.environ.get(_env_key(flag))
    if raw is not None:
        try:
            default = type(raw)
        except ValueError:
            raise CliError(
                f"{_env_key(flag)}={raw!r} is not a valid value for --{flag}")
        if choices is not None and default not in choices:
            raise CliError(
                f"{_env_key(flag)}={raw!r} is not one of {list(choices)} for --{flag}")
        required = False
    parser.add_argument(f"--{flag}", type=type, default=default, help=help,
                        choices=choices, required=required)


def _utc(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def _write_manifest(out_dir: Path, command: str, config: dict, inputs: list,
                    outputs: list, started: float) -> Path:
    manifest = {
        "tool": "eiformer",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "started_at": _utc(started),
        "finished_at": _utc(time.time()),
    }
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _parse_int_list(text: str, flag: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        _fail(f"--{flag} must be a comma-separated list of integers, got {text!r}")


def _parse_float_list(text: str, flag: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        _fail(f"--{flag} must be a comma-separated list of numbers, got {text!r}")


# ---------------------------------------------------------------- gen-data

def cmd_gen_data(args) -> int:
    started = time.time()
    for flag, value, lo, hi in (("emerge-frac", args.emerge_frac, 0.0, 0.5),
                                ("vanish-frac", args.vanish_frac, 0.0, 0.5)):
        if not lo <= value <= hi:
            _fail(f"--{flag} out of range [{lo}, {hi}]: {value}")
    if args.entities < 1:
        _fail(f"--entities must be >= 1, got {args.entities}")
    if args.clusters < 1 or args.clusters > args.entities:
        _fail(f"--clusters must be in [1, entities], got {args.clusters}")
    if args.steps < 2:
        _fail(f"--steps must be >= 2, got {args.steps}")
    if args.season <= 0:
        _fail(f"--season must be positive, got {args.season}")
    if args.noise < 0:
        _fail(f"--noise must be >= 0, got {args.noise}")

    dataset = gen_synthetic(
        n_entities=args.entities, n_clusters=args.clusters, num_steps=args.steps,
        season_period=args.season, noise_sigma=args.noise,
        emerge_frac=args.emerge_frac, vanish_frac=args.vanish_frac, seed=args.seed)
    out = Path(args.out)
    save_dataset(dataset, out)
    n_emerge = math.floor(args.emerge_frac * args.entities + 1e-9)
    n_vanish = math.floor(args.vanish_frac * args.entities + 1e-9)
    config = {
        "entities": args.entities, "clusters": args.clusters, "steps": args.steps,
        "season": args.season, "noise": args.noise, "emerge_frac": args.emerge_frac,
        "vanish_frac": args.vanish_frac, "seed": args.seed, "out": str(out),
    }
    _write_manifest(out, "gen-data", config, [],
                    [out / "meta.json", out / "values.f64"], started)
    print(f"wrote {out}: {dataset.num_steps} steps x {dataset.num_entities} entities "
          f"x {dataset.num_channels} channels "
          f"({n_emerge} emerging, {n_vanish} vanishing)")
    return EXIT_OK


# ------------------------------------------------------------------- train

def cmd_train(args) -> int:
    started = time.time()
    dataset = load_dataset(args.data)
    scenario = ScenarioSpec(scenario=args.scenario, fraction=args.fraction,
                            seed=args.scenario_seed).validate()
    featmlp_entities = None
    if args.arch == "featmlp":
        train_ids, _ = scenario_selection(dataset.entity_ids, scenario)
        featmlp_entities = len(train_ids)
    model = ModelConfig(
        arch=args.arch, history_len=args.history, forecast_len=args.forecast,
        channels=dataset.num_channels, embed_dim=args.dim, latent_count=args.latents,
        num_blocks=args.blocks, hidden_mult=args.hidden_mult, seed=args.seed,
        featmlp_entities=featmlp_entities)
    cfg = TrainConfig(
        model=model, data_path=str(args.data), scenario=scenario, lr=args.lr,
        batch_size=args.batch, max_epochs=args.epochs, patience=args.patience,
        seed=args.seed, train_stride=args.stride)
    ckpt, log = train(cfg, dataset)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = save_checkpoint(ckpt, out / "ckpt.eif")
    log_path = out / "log.jsonl"
    log_path.write_text("".join(json.dumps(row, sort_keys=True) + "\n" for row in log))
    _write_manifest(out, "train", cfg.to_dict(), [args.data],
                    [ckpt_path, log_path], started)
    print(f"trained {args.arch} for {len(log)} epochs; "
          f"best val MAE {ckpt.metadata['best_val_mae']:.6f} "
          f"at epoch {ckpt.metadata['best_epoch']}; wrote {ckpt_path}")
    return EXIT_OK


# -------------------------------------------------------------------- eval

def _test_entity_ids(dataset, ckpt):
    """Entity selection for the test segment, replayed from the checkpoint."""
    scenario_dict = ckpt.metadata.get("train_config", {}).get("scenario")
    if not scenario_dict:
        return list(dataset.entity_ids)
    spec = ScenarioSpec.from_dict(scenario_dict)
    _, test_ids = scenario_selection(dataset.entity_ids, spec)
    return test_ids


def cmd_eval(args) -> int:
    started = time.time()
    ckpt = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.data)
    f_len = ckpt.model_config.forecast_len
    horizons = _parse_int_list(args.horizons, "horizons")
    if not horizons:
        _fail(f"--horizons must name at least one step, got {args.horizons!r}")
    for h in horizons:
        if h > f_len:
            _fail(f"--horizons: horizon exceeds forecast length ({h} > {f_len})")
        if h < 1:
            _fail(f"--horizons: horizon must be >= 1, got {h}")

    ratios = tuple(ckpt.metadata.get("train_config", {}).get("ratios", (0.6, 0.2, 0.2)))
    _, _, test_seg = chrono_split(dataset, ratios,
                                  min_segment=ckpt.model_config.history_len + f_len)
    test_seg = test_seg.select_entities(_test_entity_ids(dataset, ckpt))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "metrics.csv", out / "metrics.json"
    config = {"ckpt": str(args.ckpt), "data": str(args.data),
              "horizons": horizons, "batch": args.batch, "out": str(out)}
    try:
        report = evaluate(ckpt, test_seg, horizons=horizons, batch_size=args.batch)
    except InductivenessError as exc:
        # a position-bound model cannot score a changed entity set; record
        # the outcome instead of crashing the pipeline
        csv_path.write_text("horizon,mae,rmse,mape_percent,mape_masked_out\n"
                            "error,nan,nan,nan,0\n")
        json_path.write_text(json.dumps(
            {"status": "inductiveness-error", "message": str(exc)},
            indent=2, sort_keys=True) + "\n")
        _write_manifest(out, "eval", config, [args.ckpt, args.data],
                        [csv_path, json_path], started)
        print(f"warning: {exc}", file=sys.stderr)
        print("evaluation not applicable: entity count is locked by the "
              "architecture; wrote an error row")
        return EXIT_OK
    csv_path.write_text(report.to_csv_text())
    json_path.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True,
                                    allow_nan=True) + "\n")
    _write_manifest(out, "eval", config, [args.ckpt, args.data],
                    [csv_path, json_path], started)
    avg = report.average_row()
    print(f"average over {report.forecast_len} steps: MAE {avg['mae']:.6f}, "
          f"RMSE {avg['rmse']:.6f}, MAPE {avg['mape_percent']:.3f}% "
          f"({avg['mape_masked_out']} cells masked)")
    return EXIT_OK


# ------------------------------------------------------------------- bench

def cmd_bench(args) -> int:
    started = time.time()
    archs = [a.strip() for a in args.archs.split(",") if a.strip()]
    if not archs:
        _fail(f"--archs must name at least one architecture, got {args.archs!r}")
    for arch in archs:
        if arch not in ARCHS:
            _fail(f"--archs: unknown architecture {arch!r}, pick from {list(ARCHS)}")
    if args.min_n < 1 or args.max_n < args.min_n:
        _fail(f"--min-n/--max-n must satisfy 1 <= min <= max, "
              f"got {args.min_n}..{args.max_n}")
    if args.factor < 2:
        _fail(f"--factor must be >= 2, got {args.factor}")
    n_list = []
    n = args.min_n
    while n <= args.max_n:
        n_list.append(n)
        n *= args.factor
    report = bench_forward(archs, n_list, t=args.history, c=1, d=args.dim,
                           m=args.latents, l=args.blocks, repeats=args.repeats,
                           memory_budget=args.budget_bytes, seed=args.seed)
    out = Path(args.out)
    csv_path = report.write_csv(out / "bench.csv")
    plot_path = report.write_plot_png(out / "bench.png")
    config = dict(report.config)
    config.update({"archs": archs, "min_n": args.min_n, "max_n": args.max_n,
                   "factor": args.factor, "out": str(out)})
    _write_manifest(out, "bench", config, [], [csv_path, plot_path], started)
    for arch in archs:
        slope = report.slopes[arch]
        shown = "undefined" if math.isnan(slope) else f"{slope:.3f}"
        print(f"{arch}: log-log runtime slope {shown} over the largest ok decade")
    return EXIT_OK


# --------------------------------------------------------------------- cka

def _sample_windows(dataset, ckpt, samples: int):
    norm = ckpt.norm_stats.apply(dataset)
    stream = make_windows(norm.values, ckpt.model_config.history_len,
                          ckpt.model_config.forecast_len, 1)
    if stream.empty:
        raise ShapeError(
            f"dataset has {dataset.num_steps} steps, too short for one window of "
            f"model {ckpt.model_config.history_len}+{ckpt.model_config.forecast_len}")
    take = stream.starts[:samples]
    return np.stack([stream.window(s)[0] for s in take])


def cmd_cka(args) -> int:
    started = time.time()
    if args.samples < 1:
        _fail(f"--samples must be >= 1, got {args.samples}")
    ckpt_a = load_checkpoint(args.ckpt_a)
    ckpt_b = load_checkpoint(args.ckpt_b) if args.ckpt_b else None
    dataset = load_dataset(args.data)
    ratios = tuple(ckpt_a.metadata.get("train_config", {}).get("ratios", (0.6, 0.2, 0.2)))
    _, _, test_seg = chrono_split(dataset, ratios)

    x_a = _sample_windows(test_seg, ckpt_a, args.samples)
    stack_a = extract_representations(ckpt_a, x_a)
    if ckpt_b is None:
        stack_b = stack_a
    else:
        x_b = _sample_windows(test_seg, ckpt_b, args.samples)
        if x_b.shape[0] != x_a.shape[0]:
            raise ShapeError(
                f"the two models yield different sample counts: "
                f"{x_a.shape[0]} vs {x_b.shape[0]}")
        stack_b = extract_representations(ckpt_b, x_b)
    matrix = cka_matrix(stack_a, stack_b)

    out = Path(args.out)
    csv_path = matrix.write_csv(out / "cka.csv")
    ppm_path = matrix.write_heatmap_ppm(out / "cka.ppm")
    config = {"ckpt_a": str(args.ckpt_a), "ckpt_b": str(args.ckpt_b or ""),
              "data": str(args.data), "samples": int(x_a.shape[0]),
              "samples_requested": args.samples, "out": str(out)}
    inputs = [args.ckpt_a, args.data] + ([args.ckpt_b] if args.ckpt_b else [])
    _write_manifest(out, "cka", config, inputs, [csv_path, ppm_path], started)
    print(f"cka matrix {matrix.values.shape[0]}x{matrix.values.shape[1]} over "
          f"{x_a.shape[0]} samples; wrote {csv_path}")
    return EXIT_OK


# ------------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    started = time.time()
    values = _parse_float_list(args.values, "values")
    if not values:
        _fail(f"--values must name at least one value, got {args.values!r}")
    try:
        base_raw = json.loads(Path(args.base_config).read_text())
    except OSError as exc:
        raise CorruptionError(f"cannot read --base-config: {exc}") from exc
    except json.JSONDecodeError as exc:
        _fail(f"--base-config is not valid JSON: {exc}")
    base = TrainConfig.from_dict(base_raw)
    if args.data:
        base.data_path = str(args.data)
    result = sweep(base, args.axis, values)

    out = Path(args.out)
    csv_path = result.write_csv(out / "sweep.csv")
    _write_manifest(out, "sweep",
                    {"axis": args.axis, "values": values,
                     "base_config": str(args.base_config), "out": str(out),
                     "base": base.to_dict()},
                    [args.base_config] + ([args.data] if args.data else []),
                    [csv_path], started)
    failures = [r for r in result.rows if r.status != "ok"]
    for row in failures:
        print(f"warning: {args.axis}={row.value!r} failed with {row.status}",
              file=sys.stderr)
    print(f"swept {args.axis} over {len(values)} values, "
          f"{len(values) - len(failures)} succeeded; wrote {csv_path}")
    return EXIT_ALL_FAILED if len(failures) == len(result.rows) else EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eiformer",
        description="Entity-inductive spatial-temporal forecasting toolkit")
    parser.add_argument("--version", action="version", version=f"eiformer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset directory")
    _add_flag(p, "entities", type=int, default=100)
    _add_flag(p, "clusters", type=int, default=5)
    _add_flag(p, "steps", type=int, default=2000)
    _add_flag(p, "season", type=float, default=96.0)
    _add_flag(p, "noise", type=float, default=0.3)
    _add_flag(p, "emerge-frac", type=float, default=0.0)
    _add_flag(p, "vanish-frac", type=float, default=0.0)
    _add_flag(p, "seed", type=int, default=0)
    _add_flag(p, "out", type=str, required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a forecaster on a dataset directory")
    _add_flag(p, "data", type=str, required=True)
    _add_flag(p, "arch", type=str, default="eiformer", choices=list(ARCHS))
    _add_flag(p, "scenario", type=int, default=0, choices=[0, 1, 2, 3])
    _add_flag(p, "fraction", type=float, default=0.10)
    _add_flag(p, "scenario-seed", type=int, default=0)
    _add_flag(p, "history", type=int, default=12)
    _add_flag(p, "forecast", type=int, default=12)
    _add_flag(p, "blocks", type=int, default=2)
    _add_flag(p, "dim", type=int, default=64)
    _add_flag(p, "latents", type=int, default=16)
    _add_flag(p, "hidden-mult", type=int, default=2)
    _add_flag(p, "lr", type=float, default=1e-4)
    _add_flag(p, "batch", type=int, default=32)
    _add_flag(p, "epochs", type=int, default=50)
    _add_flag(p, "patience", type=int, default=10)
    _add_flag(p, "stride", type=int, default=1)
    _add_flag(p, "seed", type=int, default=0)
    _add_flag(p, "out", type=str, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset's test segment")
    _add_flag(p, "ckpt", type=str, required=True)
    _add_flag(p, "data", type=str, required=True)
    _add_flag(p, "horizons", type=str, default="3,6,12")
    _add_flag(p, "batch", type=int, default=64)
    _add_flag(p, "out", type=str, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time single-sample forwards across entity counts")
    _add_flag(p, "archs", type=str, default="eiformer,ivariate")
    _add_flag(p, "min-n", type=int, default=256)
    _add_flag(p, "max-n", type=int, default=16384)
    _add_flag(p, "factor", type=int, default=2)
    _add_flag(p, "repeats", type=int, default=5)
    _add_flag(p, "budget-bytes", type=int, default=2 ** 28)
    _add_flag(p, "history", type=int, default=12)
    _add_flag(p, "dim", type=int, default=64)
    _add_flag(p, "latents", type=int, default=16)
    _add_flag(p, "blocks", type=int, default=2)
    _add_flag(p, "seed", type=int, default=0)
    _add_flag(p, "out", type=str, required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cka", help="layer similarity within or across checkpoints")
    _add_flag(p, "ckpt-a", type=str, required=True)
    _add_flag(p, "ckpt-b", type=str, default=None)
    _add_flag(p, "data", type=str, required=True)
    _add_flag(p, "samples", type=int, default=256)
    _add_flag(p, "out", type=str, required=True)
    p.set_defaults(func=cmd_cka)

    p = sub.add_parser("sweep", help="one-axis hyperparameter sensitivity sweep")
    _add_flag(p, "axis", type=str, required=True, choices=["lr", "layers", "neurons"])
    _add_flag(p, "values", type=str, required=True)
    _add_flag(p, "base-config", type=str, required=True)
    _add_flag(p, "data", type=str, default=None)
    _add_flag(p, "out", type=str, required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliError, ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, OracleError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorruptionError, IngestionError, CheckpointError, SplitError,
            ShapeError, InductivenessError, DegenerateInputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EiformerError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
