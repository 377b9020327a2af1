"""Training loop: SGD with momentum and step decay, per-epoch validation,
JSON log, torch checkpoint.  Deterministic given the seed."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import PairSampler, load_dataset
from .model import KRONECKER, ModelConfig, PairClassifier, preprocess


@dataclass(frozen=True)
class TrainConfig:
    data_dir: str
    val_dir: str
    classes: int = 8
    combination: str = KRONECKER
    out_dim: int = 512
    head_hidden: tuple[int, int] = (128, 128)
    epochs: int = 12
    pairs_per_epoch: int = 2000
    val_pairs: int = 256
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    lr_decay: float = 0.1
    lr_decay_every: int = 6
    in_image_fraction: float = 0.7  # 9-class in-image share
    same_fraction: float = 0.5      # 2-class balance
    seed: int = 0
    early_stop_accuracy: float | None = None
    num_threads: int = 0  # 0 = leave torch defaults alone

    def model_config(self) -> ModelConfig:
        return ModelConfig(classes=self.classes, combination=self.combination,
                           out_dim=self.out_dim, head_hidden=self.head_hidden)


def _batches(a, b, labels, batch_size):
    for i in range(0, len(labels), batch_size):
        yield (preprocess(a[i:i + batch_size]),
               preprocess(b[i:i + batch_size]),
               torch.as_tensor(labels[i:i + batch_size]))


@torch.no_grad()
def _accuracy(model, a, b, labels, batch_size) -> float:
    model.eval()
    hits = 0
    for x1, x2, y in _batches(a, b, labels, batch_size):
        hits += int((model(x1, x2).argmax(dim=-1) == y).sum())
    return hits / len(labels)


def train(config: TrainConfig, checkpoint_path, log_path=None) -> dict:
    """Train a pair classifier; returns the log dict that also lands in
    log_path.  Stops early once validation accuracy reaches
    early_stop_accuracy (if set)."""
    if config.num_threads:
        torch.set_num_threads(config.num_threads)
    torch.manual_seed(config.seed)

    train_puzzles = load_dataset(config.data_dir)
    val_puzzles = load_dataset(config.val_dir)
    sampler = PairSampler(train_puzzles, config.classes, seed=config.seed,
                          in_image_fraction=config.in_image_fraction,
                          same_fraction=config.same_fraction)
    val_a, val_b, val_y = PairSampler(
        val_puzzles, config.classes, seed=config.seed + 1,
        in_image_fraction=config.in_image_fraction,
        same_fraction=config.same_fraction).sample(config.val_pairs)

    model = PairClassifier(config.model_config())
    opt = torch.optim.SGD(model.parameters(), lr=config.lr,
                          momentum=config.momentum)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=config.lr_decay_every, gamma=config.lr_decay)
    loss_fn = nn.CrossEntropyLoss()

    log = {"config": dataclasses.asdict(config), "epochs": []}
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        a, b, y = sampler.sample(config.pairs_per_epoch)
        model.train()
        losses = []
        for x1, x2, target in _batches(a, b, y, config.batch_size):
            opt.zero_grad()
            loss = loss_fn(model(x1, x2), target)
            loss.backward()
            opt.step()
            losses.append(loss.item())
        sched.step()
        val_acc = _accuracy(model, val_a, val_b, val_y, config.batch_size)
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_accuracy": val_acc,
            "lr": sched.get_last_lr()[0],
            "seconds": time.perf_counter() - t0,
        }
        log["epochs"].append(entry)
        print(f"epoch {epoch}: loss {entry['train_loss']:.3f} "
              f"val {val_acc:.3f} ({entry['seconds']:.0f}s)", flush=True)
        if (config.early_stop_accuracy is not None
                and val_acc >= config.early_stop_accuracy):
            log["early_stopped"] = True
            break

    save_checkpoint(model, checkpoint_path)
    if log_path:
        Path(log_path).write_text(json.dumps(log, indent=2) + "\n")
    return log


def save_checkpoint(model: PairClassifier, path) -> None:
    torch.save({
        "model_config": dataclasses.asdict(model.config),
        "state_dict": model.state_dict(),
    }, path)


def load_checkpoint(path) -> PairClassifier:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    cfg = blob["model_config"]
    cfg["head_hidden"] = tuple(cfg["head_hidden"])
    model = PairClassifier(ModelConfig(**cfg))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model
