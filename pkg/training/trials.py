#!/usr/bin/env python3
"""
Five-trial experiment protocol and comparison tables
Trial k splits with seed base_seed + k and trains a freshly initialised model.
"""

import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from dataset.records import SplitSpec, split
from dataset.samples import build_samples
from errors import NumericFailureError
from geo.layer_graph import enumerate_physical_masks, format_feature_mask
from model.network import LayerThicknessModel, model_label
from training.trainer import Trainer, evaluate_rmse

logger = logging.getLogger(__name__)


@dataclass
class TrialReport:
    label: str
    trial_rmse: list
    mean: float
    std: float
    std_defined: bool
    per_year: list
    config: dict
    failed: list = field(default_factory=list)
    wall_time: float = None

    def result(self):
        """Table-style 'mean ± std'"""
        return f"{self.mean:.4f} ± {self.std:.4f}"

    def to_dict(self):
        """Plain-dict form written to report files"""
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        return cls(**data)


def summarize(label, trial_rmse, per_year, config, failed=(), wall_time=None):
    """Aggregate per-trial RMSEs into a TrialReport"""
    if not trial_rmse:
        return TrialReport(label, [], float("nan"), 0.0, False, [], config, list(failed), wall_time)
    mean = statistics.fmean(trial_rmse)
    std_defined = len(trial_rmse) > 1
    std = statistics.stdev(trial_rmse) if std_defined else 0.0
    per_year_mean = np.mean(np.asarray(per_year), axis=0).tolist()
    return TrialReport(label, list(trial_rmse), mean, std, std_defined, per_year_mean, config, list(failed), wall_time)


def run_trial(k, samples, model_config, train_config):
    """Train and test one trial; returns (k, rmse, per_year, error message)"""
    seed = train_config.seed + k
    train_set, val_set, test_set = split(samples, SplitSpec(seed))
    model = LayerThicknessModel(model_config, seed=seed)
    trainer = Trainer(model, replace(train_config, seed=seed))
    try:
        trainer.train(train_set, val_set)
    except NumericFailureError as e:
        return k, None, None, str(e)
    result = evaluate_rmse(model, test_set)
    logger.info(f"Trial {k}: test RMSE {result.rmse:.4f} ({len(train_set)}/{len(val_set)}/{len(test_set)} split)")
    return k, result.rmse, list(result.per_year), None


def run_trials(records, mar, model_config, train_config, n_trials=5, workers=1, bit_exact=True):
    """TrialReport over n_trials independent splits of the same samples"""
    started = time.perf_counter()
    samples = build_samples(
        records, mar, model_config.feature_mask, model_config.edge_mode, model_config.edge_cap
    )
    label = model_label(model_config)
    logger.info(f"Running {n_trials} trial(s) of {label} on {len(samples)} samples with {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_trial, k, samples, model_config, train_config) for k in range(n_trials)]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [run_trial(k, samples, model_config, train_config) for k in range(n_trials)]

    rmse, per_year, failed = [], [], []
    for k, value, years, error in outcomes:
        if error is not None:
            logger.error(f"Trial {k} failed: {error}")
            failed.append({"trial": k, "error": error})
        else:
            rmse.append(value)
            per_year.append(years)

    config_echo = {"model": model_config.to_dict(), "train": train_config.to_dict(), "n_trials": n_trials}
    wall_time = None if bit_exact else time.perf_counter() - started
    report = summarize(label, rmse, per_year, config_echo, failed, wall_time)
    logger.info(f"✓ {label}: {report.result()} over {len(rmse)} trial(s)")
    return report


def sweep_masks(records, mar, model_config, train_config, n_trials=5, workers=1, bit_exact=True):
    """Trial protocol for every physical-feature combination"""
    reports = []
    for mask in enumerate_physical_masks():
        config = replace(model_config, feature_mask=format_feature_mask(mask))
        reports.append(run_trials(records, mar, config, train_config, n_trials, workers, bit_exact))
    return reports


def write_report(report, path):
    """Write a TrialReport as JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def read_report(path):
    """Read a report written by write_report"""
    with open(path, "r", encoding="utf-8") as f:
        return TrialReport.from_dict(json.load(f))


def reports_to_frame(reports):
    """One row per report with label, result and per-year means"""
    rows = []
    for r in reports:
        rows.append({
            "Model": r.label,
            "Mask": r.config.get("model", {}).get("feature_mask", ""),
            "Result": r.result(),
            "mean": r.mean,
            "std": r.std,
            "trials": len(r.trial_rmse),
            "failed": len(r.failed),
        })
    return pd.DataFrame(rows, columns=["Model", "Mask", "Result", "mean", "std", "trials", "failed"])


def format_table(reports):
    """Plain-text comparison table: one row per report"""
    frame = reports_to_frame(reports)
    width = max([len("Model")] + [len(m) for m in frame["Model"]])
    lines = [f"{'Model':<{width}}  Result", "-" * (width + 2 + 17)]
    for _, row in frame.iterrows():
        lines.append(f"{row['Model']:<{width}}  {row['Result']}")
    return "\n".join(lines)
