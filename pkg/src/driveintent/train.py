"""Training loop: seeded batching, augmentation, Adam updates, checkpoints."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np
import torch

from .augment import AugPipelineConfig, build_pipeline
from .isda import IsdaState, isda_loss
from .labels import N_CLASSES, ManeuverLabel
from .net import DropBlockParams, ManeuverNet, NetConfig, Scenario
from .pipeline import ClipStore, batch_labels, clips_to_batch, compute_norm_stats

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 320
    batch_size: int = 5
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "cross_entropy"  # or "isda"
    label_smoothing: float = 0.0
    isda_lambda0: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.label_smoothing < 1:
            raise ValueError("label_smoothing must be in [0, 1)")
        if self.loss not in ("cross_entropy", "isda"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_accuracy: float
    val_accuracy: float | None
    wall_time: float


def smoothed_targets(label: ManeuverLabel, s: float, n_classes: int = N_CLASSES) -> np.ndarray:
    if not 0 <= s < 1:
        raise ValueError("smoothing must be in [0, 1)")
    t = np.full(n_classes, s / n_classes)
    t[label.index] = 1.0 - s + s / n_classes
    return t


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(
    params: list[torch.Tensor],
    grads: list[torch.Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[list[torch.Tensor], AdamState]:
    """Standard bias-corrected Adam update, in place on `params`."""
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if p.shape != g.shape:
                raise ValueError("param/grad shape mismatch")
            m.mul_(beta1).add_(g, alpha=1 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1 - beta2)
            m_hat = m / (1 - beta1**t)
            v_hat = v / (1 - beta2**t)
            p.sub_(lr * m_hat / (v_hat.sqrt() + eps))
    return params, state


def save_checkpoint(path, model: ManeuverNet, norm_stats, step: int, train_cfg: TrainConfig):
    torch.save(checkpoint_payload(model, norm_stats, step, train_cfg), path)


def checkpoint_payload(model, norm_stats, step, train_cfg):
    cfg = model.cfg
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "scenario": cfg.scenario.value,
        "net_config": _net_config_dict(cfg),
        "state_dict": {k: v.clone() for k, v in model.state_dict().items()},
        "step": step,
        "norm_stats": norm_stats,
        "train_config": asdict(train_cfg),
    }


def _net_config_dict(cfg: NetConfig) -> dict:
    d = asdict(cfg)
    d["scenario"] = cfg.scenario.value
    d["dropblock"] = {"block_size": cfg.dropblock.block_size, "keep_prob": cfg.dropblock.keep_prob}
    return d


def net_config_from_dict(d: dict) -> NetConfig:
    d = dict(d)
    d["scenario"] = Scenario(d["scenario"])
    d["dropblock"] = DropBlockParams(**d["dropblock"])
    for key in ("appearance_shape", "flow_shape", "backbone_channels"):
        d[key] = tuple(d[key])
    return NetConfig(**d)


def load_checkpoint(path) -> dict:
    payload = torch.load(path, weights_only=False)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    return payload


def model_from_checkpoint(payload: dict) -> ManeuverNet:
    cfg = net_config_from_dict(payload["net_config"])
    model = ManeuverNet(cfg)
    model.load_state_dict(payload["state_dict"], strict=True)
    model.eval()
    return model


def _accuracy(logits: torch.Tensor, labels: torch.Tensor) -> float:
    return float((logits.argmax(dim=1) == labels).float().mean())


def train(
    store: ClipStore,
    cfg: TrainConfig,
    aug_cfg: AugPipelineConfig | None = None,
    val_store: ClipStore | None = None,
) -> tuple[dict, dict, list[EpochRecord]]:
    """Train a model; returns (final checkpoint, best-by-loss checkpoint, history)."""
    cfg.validate()
    if len(store) == 0:
        raise ValueError("empty training manifest")

    torch.manual_seed(cfg.seed)
    net_cfg = store.net_cfg
    model = ManeuverNet(net_cfg)
    model.train()

    norm_stats = compute_norm_stats(store.clips)
    augmentor = build_pipeline(aug_cfg) if aug_cfg is not None else None
    active = net_cfg.scenario.active_branches()

    names, params = zip(*model.named_parameters())
    adam = AdamState()

    n = len(store)
    batches_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * batches_per_epoch
    isda_state = (
        IsdaState(net_cfg.fusion_dense_units, lambda0=cfg.isda_lambda0)
        if cfg.loss == "isda"
        else None
    )

    order_rng = np.random.default_rng(cfg.seed)
    history: list[EpochRecord] = []
    best_loss = float("inf")
    best_payload = None
    step = 0
    nonfinite_streak = 0

    for epoch in range(cfg.epochs):
        t0 = time.monotonic()
        order = order_rng.permutation(n)
        losses, accs = [], []
        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            clips = [store.clips[i] for i in idx]
            if augmentor is not None:
                rng = np.random.default_rng([cfg.seed, epoch, b])
                clips = [augmentor(c, rng) for c in clips]
            batch = clips_to_batch(clips, norm_stats, active)
            labels = batch_labels(clips)

            feats = model.features(batch)
            logits = model.classifier(feats)
            if isda_state is not None:
                isda_state.update(feats, labels)
                lam = isda_state.ratio(step, total_steps)
                cov = isda_state.covariance(labels).to(feats.dtype)
                loss = isda_loss(
                    feats,
                    labels,
                    model.classifier.weight,
                    model.classifier.bias,
                    cov,
                    lam,
                    cfg.label_smoothing,
                )
            else:
                loss = torch.nn.functional.cross_entropy(
                    logits, labels, label_smoothing=cfg.label_smoothing
                )

            if not torch.isfinite(loss):
                nonfinite_streak += 1
                if nonfinite_streak >= 3:
                    raise RuntimeError(
                        f"non-finite loss for 3 consecutive batches at step {step}"
                    )
                step += 1
                continue
            nonfinite_streak = 0

            model.zero_grad(set_to_none=True)
            loss.backward()
            grads = [
                p.grad if p.grad is not None else torch.zeros_like(p) for p in params
            ]
            adam_step(list(params), grads, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
            losses.append(float(loss.detach()))
            accs.append(_accuracy(logits.detach(), labels))
            step += 1

        mean_loss = float(np.mean(losses)) if losses else float("nan")
        val_acc = None
        if val_store is not None:
            val_acc = evaluate_accuracy(model, val_store, norm_stats)
        history.append(
            EpochRecord(
                epoch=epoch,
                loss=mean_loss,
                train_accuracy=float(np.mean(accs)) if accs else 0.0,
                val_accuracy=val_acc,
                wall_time=time.monotonic() - t0,
            )
        )
        if mean_loss < best_loss:
            best_loss = mean_loss
            best_payload = checkpoint_payload(model, norm_stats, step, cfg)

    final_payload = checkpoint_payload(model, norm_stats, step, cfg)
    if best_payload is None:
        best_payload = final_payload
    return final_payload, best_payload, history


def evaluate_accuracy(model: ManeuverNet, store: ClipStore, norm_stats, batch_size: int = 10) -> float:
    was_training = model.training
    model.eval()
    active = model.cfg.scenario.active_branches()
    correct = 0
    with torch.no_grad():
        for i in range(0, len(store), batch_size):
            clips = store.clips[i : i + batch_size]
            batch = clips_to_batch(clips, norm_stats, active)
            labels = batch_labels(clips)
            logits = model(batch)
            correct += int((logits.argmax(dim=1) == labels).sum())
    if was_training:
        model.train()
    return correct / len(store)


def history_to_csv(history: list[EpochRecord], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "train_accuracy", "val_accuracy", "wall_time"])
        for r in history:
            writer.writerow(
                [
                    r.epoch,
                    f"{r.loss:.6f}",
                    f"{r.train_accuracy:.4f}",
                    "" if r.val_accuracy is None else f"{r.val_accuracy:.4f}",
                    f"{r.wall_time:.2f}",
                ]
            )
