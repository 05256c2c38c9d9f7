#!/usr/bin/env python3
"""
Training loop and RMSE evaluation
One temporal sample per optimizer step; the best-validation parameters are kept.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from core.functional import mse_loss, mse_loss_backward
from core.matrix import spawn_rngs
from errors import InvalidInputError, NumericFailureError
from model.network import NormStats
from training.optim import Adam, StepSchedule

DEFAULT_EPOCHS = {"sage": 450, "gcn": 300}


@dataclass
class TrainConfig:
    epochs: int = 450
    lr: float = 0.01
    lr_period: int = 75
    lr_gamma: float = 0.5
    weight_decay: float = 0.0001
    decoupled_weight_decay: bool = False
    seed: int = 0
    shuffle: bool = True
    log_every: int = 25
    progress: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_period < 1:
            raise InvalidInputError(f"lr_period must be >= 1, got {self.lr_period}")

    @classmethod
    def from_dict(cls, data):
        """Build from a plain dict, ignoring unknown keys"""
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self):
        """Plain-dict form for histories and reports"""
        return asdict(self)


@dataclass(frozen=True)
class RmseResult:
    rmse: float
    per_year: tuple


def evaluate_rmse(model, samples):
    """RMSE in pixels over nodes x years x samples, plus one value per target year"""
    if not samples:
        raise InvalidInputError("cannot evaluate RMSE on an empty sample set")
    sq_sum = np.zeros(samples[0].targets.shape[1])
    count = 0
    for sample in samples:
        pred = model.predict_denormalized(sample.chronological())
        diff = pred - sample.targets
        sq_sum += np.sum(diff * diff, axis=0)
        count += diff.shape[0]
    per_year = np.sqrt(sq_sum / count)
    rmse = math.sqrt(float(sq_sum.sum()) / (count * sq_sum.size))
    return RmseResult(rmse, tuple(float(v) for v in per_year))


def training_mse(model, samples):
    """Mean normalized-space MSE with dropout off, the quantity training minimizes"""
    if not samples:
        raise InvalidInputError("cannot evaluate MSE on an empty sample set")
    norm = model.norm_stats
    losses = [mse_loss(model.predict(s.chronological()), norm.normalize_targets(s.targets)) for s in samples]
    return float(np.mean(losses))


class Trainer:
    """Owns the optimizer and random streams for one model"""

    def __init__(self, model, config):
        self.model = model
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.schedule = StepSchedule(config.lr, config.lr_period, config.lr_gamma)
        self.optimizer = Adam(
            model.parameters(),
            lr=config.lr,
            weight_decay=config.weight_decay,
            decoupled=config.decoupled_weight_decay,
        )
        # streams 0-2 of a seed belong to the model (init, sampler, dropout)
        self.shuffle_rng = spawn_rngs(config.seed, 4)[3]

    def _prepare(self, samples):
        norm = self.model.norm_stats
        return [(s.chronological(), norm.normalize_targets(s.targets)) for s in samples]

    def _train_epoch(self, prepared):
        n = len(prepared)
        order = self.shuffle_rng.permutation(n) if self.config.shuffle else np.arange(n)
        total = 0.0
        for idx in order:
            graphs, targets = prepared[idx]
            out, cache = self.model.forward(graphs, training=True)
            loss = mse_loss(out, targets)
            if not math.isfinite(loss):
                raise NumericFailureError(f"non-finite training loss on sample {idx}")
            self.model.backward(mse_loss_backward(out, targets), cache)
            self.optimizer.step()
            total += loss
        return total / n

    def train(self, train_samples, val_samples=()):
        """Returns (model, history); history holds one dict per epoch"""
        if not train_samples:
            raise InvalidInputError("training set is empty")
        if self.model.norm_stats is None:
            self.model.norm_stats = NormStats.from_samples(train_samples)
        prepared = self._prepare(train_samples)

        history = []
        best_val, best_state, best_epoch = math.inf, None, None
        last_good = self.model.state()
        epochs = tqdm(range(self.config.epochs), desc="epochs", disable=not self.config.progress)
        try:
            for epoch in epochs:
                self.optimizer.lr = self.schedule.lr_at(epoch)
                train_loss = self._train_epoch(prepared)
                entry = {"epoch": epoch, "lr": self.optimizer.lr, "train_loss": train_loss, "val_rmse": None}
                if val_samples:
                    entry["val_rmse"] = evaluate_rmse(self.model, val_samples).rmse
                    if entry["val_rmse"] < best_val:
                        best_val, best_state, best_epoch = entry["val_rmse"], self.model.state(), epoch
                history.append(entry)
                last_good = self.model.state()

                level = logging.INFO if (epoch + 1) % self.config.log_every == 0 else logging.DEBUG
                self.logger.log(level, f"epoch {epoch + 1}/{self.config.epochs} lr={entry['lr']:.6g} "
                                       f"train_mse={train_loss:.6g} val_rmse={entry['val_rmse']}")
        except NumericFailureError as e:
            restore = best_state if best_state is not None else last_good
            self.model.load_state(restore)
            self.logger.error(f"Training aborted after {len(history)} epoch(s): {e}")
            raise NumericFailureError(str(e), last_good_state=restore, history=history) from e

        if best_state is not None:
            self.model.load_state(best_state)
            self.model.trained_epochs = best_epoch + 1
            self.logger.info(f"✓ Kept epoch {best_epoch + 1} parameters (val RMSE {best_val:.4f})")
        else:
            self.model.trained_epochs = self.config.epochs
        return self.model, history


def train(model, train_samples, val_samples, config):
    """Train `model` with a fresh Trainer; returns (model, history)"""
    return Trainer(model, config).train(train_samples, val_samples)


def write_history(history, path):
    """Per-epoch history as JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(history, f, indent=2)
        f.write("\n")
