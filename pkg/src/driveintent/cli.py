"""Command-line entry point: synth / train / eval / kfold / ablate."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from . import evaluate as ev
from .config import (
    ConfigError,
    aug_config_from,
    dump_resolved,
    load_config,
    net_config_from,
    train_config_from,
)
from .dataio import DatasetManifest, holdout_split
from .pipeline import ClipStore
from .plots import confusion_heatmap
from .synth import generate_synthetic
from .train import history_to_csv, load_checkpoint, save_checkpoint, train
from .train import model_from_checkpoint  # noqa: F401  (re-exported for scripts)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driveintent")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("synth", "train", "eval", "kfold", "ablate"):
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None, help="experiment config file (YAML)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override all seeds")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--scenario", choices=["inside_only", "outside_only", "both"])
        p.add_argument("--profile", choices=["desk", "paper"], default=None)
        p.add_argument(
            "overrides", nargs="*", metavar="KEY=VALUE",
            help="dotted config overrides, e.g. train.epochs=2",
        )
        if verb in ("eval", "kfold"):
            p.add_argument("--otc", action="store_true", help="test-time OTC voting")
            p.add_argument("--horizons", default=None, help="comma list, e.g. 0,-1,-2")
        if verb in ("eval",):
            p.add_argument("--checkpoint", default=None)
        if verb == "ablate":
            p.add_argument("--presets", default="A,B,C,D,E")
    return parser


def _resolve(args) -> dict:
    cfg = load_config(args.config, profile=args.profile, overrides=args.overrides)
    if args.seed is not None:
        cfg["train"]["seed"] = args.seed
        cfg["data"]["seed"] = args.seed
    if args.scenario is not None:
        cfg["model"]["scenario"] = args.scenario
    return cfg


def _split_stores(cfg: dict):
    root = Path(cfg["data"]["root"])
    manifest = DatasetManifest.load(root / "manifest.csv")
    net_cfg = net_config_from(cfg)
    train_m, test_m = holdout_split(
        manifest, cfg["data"]["holdout_ratio"], cfg["data"]["seed"]
    )
    return manifest, ClipStore(train_m, net_cfg), ClipStore(test_m, net_cfg), net_cfg


def _horizons(args, cfg) -> tuple[int, ...]:
    if getattr(args, "horizons", None):
        return tuple(int(t) for t in args.horizons.split(","))
    return tuple(cfg["eval"]["horizons"])


def _run(args) -> int:
    torch.set_num_threads(max(1, args.workers))
    cfg = _resolve(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_resolved(cfg, out / "resolved_config.yaml")
    cfg_hash = ev.config_hash(cfg)

    if args.verb == "synth":
        manifest = generate_synthetic(
            n_clips=cfg["data"]["n_clips"],
            seed=cfg["data"]["seed"],
            out_dir=cfg["data"]["root"],
            appearance_size=tuple(cfg["data"]["appearance_size"]),
        )
        print(f"wrote {len(manifest)} clips to {cfg['data']['root']}")
        return 0

    if args.verb == "train":
        _, train_store, test_store, net_cfg = _split_stores(cfg)
        val_store = test_store if cfg["data"].get("val_fraction") else None
        payload, best, history = train(
            train_store, train_config_from(cfg), aug_config_from(cfg), val_store
        )
        torch.save(payload, out / "checkpoint.pt")
        torch.save(best, out / "best.pt")
        history_to_csv(history, out / "history.csv")
        print(f"trained {cfg['train']['epochs']} epochs, final loss {history[-1].loss:.4f}")
        return 0

    if args.verb == "eval":
        _, _, test_store, net_cfg = _split_stores(cfg)
        ckpt_path = args.checkpoint or (out / "checkpoint.pt")
        payload = load_checkpoint(ckpt_path)
        horizons = _horizons(args, cfg)
        use_otc = args.otc or cfg["eval"]["otc"]
        if use_otc:
            rows = ev.otc_eval(payload, test_store, horizons, seed=cfg["data"]["seed"])
        else:
            rows = ev.horizon_eval(payload, test_store, horizons)
        method = "Our + OTC" if use_otc else "Our"
        files = ev.emit_report(rows, out, cfg_hash, cfg["model"]["scenario"], method=method)
        for row, cm in rows:
            confusion_heatmap(cm, row.T, out / f"confusion_T{row.T}.png")
        print(f"wrote {', '.join(str(f) for f in files)}")
        return 0

    if args.verb == "kfold":
        root = Path(cfg["data"]["root"])
        manifest = DatasetManifest.load(root / "manifest.csv")
        horizons = _horizons(args, cfg)
        report = ev.kfold_run(
            manifest,
            cfg["eval"]["kfold_k"],
            train_config_from(cfg),
            net_config_from(cfg),
            aug_config_from(cfg),
            with_otc=args.otc or cfg["eval"]["otc"],
            horizons=horizons,
            seed=cfg["data"]["seed"],
        )
        import csv as _csv
        import json as _json

        doc = {
            "schema_version": ev.SCHEMA_VERSION,
            "config_hash": cfg_hash,
            "scenario": cfg["model"]["scenario"],
            "method": "Our + OTC" if report.method == "plain+OTC" else "Our",
            "k": report.k,
            "rows": report.rows,
        }
        (out / "kfold.json").write_text(_json.dumps(doc, sort_keys=True, indent=2) + "\n")
        with (out / "kfold.csv").open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["T", "method"]
                + [f"fold{i + 1}" for i in range(report.k)]
                + ["mean", "std"]
            )
            for r in report.rows:
                writer.writerow([r["T"], doc["method"]] + r["folds"] + [r["mean"], r["std"]])
        print(f"wrote {out / 'kfold.json'}")
        return 0

    if args.verb == "ablate":
        presets = [p.strip() for p in args.presets.split(",") if p.strip()]
        _, train_store, test_store, net_cfg = _split_stores(cfg)
        results = ev.ablation_run(
            train_store,
            test_store,
            presets,
            train_config_from(cfg),
            out,
            horizons=tuple(cfg["eval"]["horizons"]),
            aug_kwargs={
                "flip_prob": cfg["augment"]["flip_prob"],
                "translate_max": cfg["augment"]["translate_max"],
            },
        )
        print(f"wrote {out / 'ablation.csv'} ({len(results)} presets)")
        return 0

    raise AssertionError(f"unhandled verb {args.verb}")


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
