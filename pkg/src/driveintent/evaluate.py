"""Horizon evaluation, OTC voting, K-fold orchestration and report emission."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .augment import AugPipelineConfig, CutoutParams, otc_variants
from .dataio import Clip, DatasetManifest, HorizonSpec, stratified_kfold, truncate_to_horizon
from .labels import ManeuverLabel
from .metrics import MetricsRow, confusion, fold_mean_std, metrics_from_confusion
from .net import ManeuverNet, softmax
from .pipeline import ClipStore, batch_labels, clips_to_batch
from .train import TrainConfig, model_from_checkpoint, train

SCHEMA_VERSION = 1

DEFAULT_HORIZONS = (0, -1, -2, -3, -4)


def predict_probs(
    model: ManeuverNet, clips: list[Clip], norm_stats, batch_size: int = 10
) -> np.ndarray:
    model.eval()
    active = model.cfg.scenario.active_branches()
    out = []
    with torch.no_grad():
        for i in range(0, len(clips), batch_size):
            batch = clips_to_batch(clips[i : i + batch_size], norm_stats, active)
            logits = model(batch).numpy()
            out.append(softmax(logits))
    return np.concatenate(out)


def horizon_eval(
    payload: dict,
    store: ClipStore,
    horizons: tuple[int, ...] = DEFAULT_HORIZONS,
) -> list[tuple[MetricsRow, np.ndarray]]:
    """Evaluate one checkpoint at each horizon; rows ordered T=0 first."""
    model = model_from_checkpoint(payload)
    norm_stats = payload["norm_stats"]
    results = []
    for T in sorted(horizons, reverse=True):
        spec = HorizonSpec(T)
        clips = [truncate_to_horizon(c, spec) for c in store.clips]
        probs = predict_probs(model, clips, norm_stats)
        preds = [ManeuverLabel.from_index(int(i)) for i in probs.argmax(axis=1)]
        truths = [c.label for c in clips]
        cm = confusion(preds, truths)
        results.append((metrics_from_confusion(cm, T=T), cm))
    return results


def majority_vote(votes: list[int], probs: list[np.ndarray]) -> int:
    """Majority label over variant predictions; full ties broken by the
    highest summed softmax probability across variants."""
    counts = np.bincount(votes, minlength=5)
    best = counts.max()
    leaders = np.flatnonzero(counts == best)
    if len(leaders) == 1:
        return int(leaders[0])
    summed = np.sum(probs, axis=0)
    return int(leaders[np.argmax(summed[leaders])])


def otc_predict(
    payload: dict,
    clip: Clip,
    rng: np.random.Generator,
    model: ManeuverNet | None = None,
    cutout_params: CutoutParams | None = None,
) -> ManeuverLabel:
    model = model or model_from_checkpoint(payload)
    variants = otc_variants(clip, rng, cutout_params)
    probs = predict_probs(model, variants, payload["norm_stats"])
    votes = [int(i) for i in probs.argmax(axis=1)]
    return ManeuverLabel.from_index(majority_vote(votes, list(probs)))


def otc_eval(
    payload: dict,
    store: ClipStore,
    horizons: tuple[int, ...] = DEFAULT_HORIZONS,
    seed: int = 0,
) -> list[tuple[MetricsRow, np.ndarray]]:
    model = model_from_checkpoint(payload)
    results = []
    for T in sorted(horizons, reverse=True):
        spec = HorizonSpec(T)
        preds, truths = [], []
        for j, clip in enumerate(store.clips):
            truncated = truncate_to_horizon(clip, spec)
            rng = np.random.default_rng([seed, T + 4, j])
            preds.append(otc_predict(payload, truncated, rng, model=model))
            truths.append(clip.label)
        cm = confusion(preds, truths)
        results.append((metrics_from_confusion(cm, T=T), cm))
    return results


@dataclass
class KFoldReport:
    method: str  # "plain" or "plain+OTC"
    k: int
    rows: list[dict]  # {"T": int, "folds": [...], "mean": float, "std": float}


def kfold_run(
    manifest: DatasetManifest,
    k: int,
    train_cfg: TrainConfig,
    net_cfg,
    aug_cfg: AugPipelineConfig | None = None,
    with_otc: bool = False,
    horizons: tuple[int, ...] = DEFAULT_HORIZONS,
    seed: int = 0,
) -> KFoldReport:
    plan = stratified_kfold(manifest, k, seed)
    all_ids = {r.clip_id for r in manifest.records}
    per_fold: list[list[tuple[MetricsRow, np.ndarray]]] = []
    for fold in range(k):
        test_ids = plan.fold_ids(fold)
        train_manifest = manifest.subset(all_ids - test_ids)
        test_manifest = manifest.subset(test_ids)
        fold_cfg = TrainConfig(**{**train_cfg.__dict__, "seed": train_cfg.seed + fold})
        train_store = ClipStore(train_manifest, net_cfg)
        test_store = ClipStore(test_manifest, net_cfg)
        payload, _, _ = train(train_store, fold_cfg, aug_cfg)
        if with_otc:
            per_fold.append(otc_eval(payload, test_store, horizons, seed=fold_cfg.seed))
        else:
            per_fold.append(horizon_eval(payload, test_store, horizons))

    rows = []
    ordered = sorted(horizons, reverse=True)
    for i, T in enumerate(ordered):
        accs = [per_fold[f][i][0].accuracy for f in range(k)]
        mean, std = fold_mean_std(accs)
        rows.append(
            {
                "T": T,
                "folds": [round(a, 2) for a in accs],
                "mean": round(mean, 2),
                "std": round(std, 2),
            }
        )
    return KFoldReport(method="plain+OTC" if with_otc else "plain", k=k, rows=rows)


def ablation_run(
    train_store: ClipStore,
    test_store: ClipStore,
    presets: list[str],
    train_cfg: TrainConfig,
    out_dir: str | Path,
    horizons: tuple[int, ...] = DEFAULT_HORIZONS,
    aug_kwargs: dict | None = None,
) -> dict[str, list[MetricsRow]]:
    """Train one model per augmentation preset (shared seed) and evaluate
    all horizons; writes a CSV and one curve plot per metric."""
    from .augment import PRESET_LABEL_SMOOTHING, preset_config
    from .plots import ablation_curves

    if not presets:
        raise ValueError("presets must be nonempty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results: dict[str, list[MetricsRow]] = {}
    for letter in presets:
        aug_cfg = preset_config(letter, **(aug_kwargs or {}))
        cfg = TrainConfig(**{
            **train_cfg.__dict__,
            "label_smoothing": PRESET_LABEL_SMOOTHING[letter],
        })
        payload, _, _ = train(train_store, cfg, aug_cfg)
        results[letter] = [row.rounded() for row, _ in horizon_eval(payload, test_store, horizons)]

    with (out_dir / "ablation.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["preset", "T", "accuracy", "precision", "recall", "f1"])
        for letter in presets:
            for row in results[letter]:
                writer.writerow([letter, row.T, row.accuracy, row.precision, row.recall, row.f1])

    ablation_curves(results, out_dir)
    return results


def config_hash(resolved_config: dict) -> str:
    canon = json.dumps(resolved_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def emit_report(
    rows: list[tuple[MetricsRow, np.ndarray]],
    out_dir: str | Path,
    cfg_hash: str,
    scenario: str,
    method: str = "plain",
    formats: tuple[str, ...] = ("csv", "json"),
    kfold: KFoldReport | None = None,
    ablation: dict[str, list[MetricsRow]] | None = None,
) -> list[Path]:
    """Write the horizon table as canonical JSON and CSV (plus extras)."""
    if not rows:
        raise ValueError("no metric rows to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    horizon_entries = []
    for row, cm in rows:
        r = row.rounded()
        horizon_entries.append(
            {
                "T": r.T,
                "accuracy": r.accuracy,
                "precision": r.precision,
                "recall": r.recall,
                "f1": r.f1,
                "confusion": np.asarray(cm).tolist(),
            }
        )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg_hash,
        "scenario": scenario,
        "method": method,
        "horizons": horizon_entries,
    }
    if kfold is not None:
        doc["kfold"] = {"method": kfold.method, "k": kfold.k, "rows": kfold.rows}
    if ablation is not None:
        doc["ablation"] = {
            letter: [
                {"T": r.T, "accuracy": r.accuracy, "precision": r.precision,
                 "recall": r.recall, "f1": r.f1}
                for r in rows_
            ]
            for letter, rows_ in ablation.items()
        }

    written = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        written.append(path)
    if "csv" in formats:
        path = out_dir / "report.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["T", "accuracy", "precision", "recall", "f1"])
            for entry in horizon_entries:
                writer.writerow(
                    [entry["T"], entry["accuracy"], entry["precision"],
                     entry["recall"], entry["f1"]]
                )
        written.append(path)
    return written
