"""Command-line interface: ingest, precompute, train, report, diagnostics."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DataFormatError, NumericalError
from .harness import ExperimentConfig, emit_diagnostics, precompute, run_experiment, summarise
from .graphs import load_tudataset

log = logging.getLogger("wavelet_ph")

# flag name -> (config key, parser)
OVERRIDES = {
    "dataset": str,
    "data_dir": str,
    "basis": str,
    "mode": str,
    "features": str,
    "batch_size": int,
    "epochs": int,
    "record_epoch": int,
    "lr_nn": float,
    "lr_theta": float,
    "training_seed": int,
    "max_jobs": int,
    "workers": int,
    "output_dir": str,
    "cache_dir": str,
    "eigensolver": str,
}


def _seed_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc


def load_config(args) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
    for key in OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "seeds", None):
        data["partition_seeds"] = _seed_list(args.seeds)
    for item in getattr(args, "set", None) or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        data[key.strip()] = yaml.safe_load(raw)
    try:
        return ExperimentConfig.from_mapping(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML file with ExperimentConfig keys")
    for key, typ in OVERRIDES.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ)
    p.add_argument("--seeds", help="comma-separated partition seeds")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")


def cmd_ingest(args) -> int:
    cfg = load_config(args)
    d = load_tudataset(cfg.data_dir, cfg.dataset)
    sizes = d.sizes
    counts = np.bincount(d.labels, minlength=2)
    print(f"{d.name}: {len(d)} graphs, {int(sizes.sum())} vertices (max {int(sizes.max())}), labels 0/1 = {counts[0]}/{counts[1]}")
    return 0


def cmd_precompute(args) -> int:
    cfg = load_config(args)
    if not cfg.cache_dir:
        cfg.cache_dir = ".cache"
    ws = precompute(cfg)
    print(f"cached {len(ws.dataset)} graphs; rank {ws.param.rank}; features {ws.features.shape[1]} -> {cfg.cache_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args)
    sheet = run_experiment(cfg)
    print(f"grand mean accuracy {sheet.grand_mean:.4f} +- {sheet.std:.4f} over {len(sheet.fold_means)} partitions")
    print(f"outputs in {cfg.output_dir}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.results)
    if not (path / "results.csv").exists():
        raise DataFormatError(f"{path / 'results.csv'} not found")
    sheet = summarise(path)
    for s, m in zip(sheet.partition_seeds, sheet.fold_means):
        print(f"partition {s}: {m:.4f}")
    print(f"grand mean {sheet.grand_mean:.4f}, std {sheet.std:.4f}, {len(sheet.folds)} fold experiments")
    return 0


def cmd_diagnostics(args) -> int:
    cfg = load_config(args)
    for p in emit_diagnostics(cfg, args.out, svg=args.svg):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavelet-ph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("ingest", cmd_ingest), ("precompute", cmd_precompute), ("train", cmd_train), ("diagnostics", cmd_diagnostics)):
        p = sub.add_parser(name)
        _add_config_flags(p)
        p.set_defaults(func=fn)
        if name == "diagnostics":
            p.add_argument("--out", help="directory for CSV/SVG output (default: output_dir)")
            p.add_argument("--svg", action="store_true")
    p = sub.add_parser("report")
    p.add_argument("results", help="directory containing results.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
