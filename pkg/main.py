#!/usr/bin/env python3
"""
Ice-layer graph network - command-line entry point
Synthetic data, sample building, training, evaluation, trials and reports
"""

import os
import sys

# BLAS thread pools reorder float sums; pin them before numpy loads
if "--no-bit-exact" not in sys.argv:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, "1")

import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

import psutil

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config import Config
from dataset.mar import read_mar, write_mar
from dataset.records import SplitSpec, filter_valid, read_records, split, write_records
from dataset.samples import build_samples, read_samples, write_samples
from dataset.synth import SynthParams, synth_generate
from errors import ConfigError, GradientCheckFailed, IceGnnError, InvalidInputError, NumericFailureError
from geo.layer_graph import format_feature_mask, parse_feature_mask
from model import checkpoint
from model.gradcheck_suite import run_suite
from model.network import LayerThicknessModel, ModelConfig, model_label
from training.trainer import DEFAULT_EPOCHS, TrainConfig, Trainer, evaluate_rmse, write_history
from training.trials import format_table, read_report, reports_to_frame, run_trials, sweep_masks, write_report

logger = logging.getLogger("icegnn")


def setup_logging(config):
    """Configure file and console logging"""
    level_name = str(config.get_system_config()["log_level"]).upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        raise ConfigError(f"unknown log level '{level_name}'")
    config.LOGS_DIR.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(config.LOGS_DIR / 'icegnn.log'),
            logging.StreamHandler()
        ],
        force=True,
    )


def load_config(args):
    """defaults < config file < environment < command-line flags"""
    config = Config.from_file(args.config) if args.config else Config()
    config.apply_overrides({k: v for k, v in vars(args).items() if k in Config.KEY_SECTIONS})
    return config


def model_config_from(config):
    """ModelConfig from the MODEL and GRAPH sections"""
    m = config.get_model_config()
    g = config.get_graph_config()
    try:
        return ModelConfig(
            cell_kind=m["cell_kind"],
            hidden=int(m["hidden"]),
            head=tuple(m["head"]),
            dropout_p=float(m["dropout_p"]),
            feature_mask=m["feature_mask"],
            edge_mode=g["edge_mode"],
            edge_cap=float(g["edge_cap"]),
            fanout=m["fanout"],
            weighted_mean=bool(m["weighted_mean"]),
            bias=bool(m["bias"]),
        )
    except (InvalidInputError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid model settings: {e}") from e


def default_epochs(config):
    """Epoch budget of the configured cell kind"""
    cell_kind = config.get_model_config()["cell_kind"]
    if cell_kind not in DEFAULT_EPOCHS:
        raise ConfigError(f"unknown cell kind '{cell_kind}' (expected one of {', '.join(DEFAULT_EPOCHS)})")
    return DEFAULT_EPOCHS[cell_kind]


def train_config_from(config):
    """TrainConfig from the TRAIN section"""
    t = config.get_train_config()
    try:
        return TrainConfig(
            epochs=default_epochs(config) if t["epochs"] is None else int(t["epochs"]),
            lr=float(t["lr"]),
            lr_period=int(t["lr_period"]),
            lr_gamma=float(t["lr_gamma"]),
            weight_decay=float(t["weight_decay"]),
            decoupled_weight_decay=bool(t["decoupled_weight_decay"]),
            seed=int(t["seed"]),
            shuffle=bool(t["shuffle"]),
            log_every=max(1, int(t["log_every"])),
            progress=bool(config.get_system_config()["progress"]) and sys.stderr.isatty(),
        )
    except (InvalidInputError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid training settings: {e}") from e


def resolve_workers(config, n_tasks):
    """workers <= 0 means one per physical core"""
    workers = int(config.get_system_config()["workers"])
    if workers <= 0:
        workers = psutil.cpu_count(logical=False) or 1
    return max(1, min(workers, n_tasks))


def output_dir(config):
    """Configured output directory, created on demand"""
    path = Path(config.get_paths_config()["output_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_inputs(config, model_config):
    """Filtered records plus the MAR archive when the feature mask asks for it"""
    config.validate_paths("records")
    paths = config.get_paths_config()
    data = config.get_data_config()
    records = filter_valid(read_records(paths["records"], int(data["n_traces"])), int(data["min_layers"]))

    physical = any(parse_feature_mask(model_config.feature_mask)[3:])
    mar = None
    if paths["mar"]:
        config.validate_paths("mar")
        mar = read_mar(paths["mar"])
    elif physical:
        raise ConfigError("feature mask enables physical features but no MAR file was given "
                          "(set 'mar' or use --feature-mask base)")
    return records, mar


def load_samples(config, model_config):
    """Samples from a samples file, or built from records (+ MAR)"""
    if config.get_paths_config()["samples"]:
        config.validate_paths("samples")
        return read_samples(config.get_paths_config()["samples"])
    records, mar = load_inputs(config, model_config)
    return build_samples(records, mar, model_config.feature_mask, model_config.edge_mode, model_config.edge_cap)


def samples_feature_mask(samples):
    """The single feature mask every graph of a samples file was built with"""
    if not samples:
        raise InvalidInputError("samples file is empty")
    masks = {format_feature_mask(g.feature_mask) for s in samples for g in s.inputs}
    if len(masks) != 1:
        raise InvalidInputError(f"samples file mixes feature masks: {', '.join(sorted(masks))}")
    return masks.pop()


def cmd_synth(args, config):
    """Write records.jsonl (and mar.csv unless --no-mar) for a seeded synthetic dataset"""
    params = SynthParams(
        n_traces=int(config.get_data_config()["n_traces"]),
        noise=args.noise,
        informative=not args.no_mar,
        acquisition_year=int(config.get_data_config()["acquisition_year"]),
    )
    seed = int(config.get_train_config()["seed"])
    data = synth_generate(seed, args.n, params)
    out = Path(args.out) if args.out else output_dir(config)
    write_records(data.records, out / "records.jsonl")
    if data.mar is not None:
        write_mar(data.mar, out / "mar.csv")
    print(f"Wrote {len(data.records)} synthetic records to {out}")
    return 0


def cmd_build(args, config):
    """Write temporal samples for the configured records and mask"""
    model_config = model_config_from(config)
    records, mar = load_inputs(config, model_config)
    samples = build_samples(records, mar, model_config.feature_mask, model_config.edge_mode, model_config.edge_cap)
    out = Path(args.out) if args.out else output_dir(config) / "samples.jsonl"
    write_samples(samples, out, model_config.edge_mode, model_config.edge_cap)
    print(f"Wrote {len(samples)} samples to {out}")
    return 0


def cmd_train(args, config):
    """Train one model on the seed's split; checkpoint, history and test RMSE land in output_dir"""
    model_config = model_config_from(config)
    train_config = train_config_from(config)
    samples = load_samples(config, model_config)
    if config.get_paths_config()["samples"]:
        mask = samples_feature_mask(samples)
        if mask != model_config.feature_mask:
            logger.warning(f"Feature mask {model_config.feature_mask} replaced by {mask} from the samples file")
            model_config = replace(model_config, feature_mask=mask)
    train_set, val_set, test_set = split(samples, SplitSpec(train_config.seed))

    model = LayerThicknessModel(model_config, seed=train_config.seed)
    logger.info(f"Training {model_label(model_config)} on {len(train_set)} samples "
                f"({len(val_set)} validation, {len(test_set)} test)")
    model, history = Trainer(model, train_config).train(train_set, val_set)
    result = evaluate_rmse(model, test_set)

    out = output_dir(config)
    checkpoint.save(model, out / "checkpoint.bin")
    write_history(history, out / "history.json")
    with open(out / "eval.json", "w", encoding="utf-8") as f:
        json.dump({"rmse": result.rmse, "per_year": list(result.per_year), "split": "test"}, f, indent=2)
        f.write("\n")
    print(f"{model_label(model_config)} test RMSE: {result.rmse:.4f}")
    return 0


def cmd_eval(args, config):
    """RMSE of a checkpoint on records or a samples file"""
    path = Path(args.checkpoint)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    model = checkpoint.load(path)
    samples = load_samples(config, model.config)
    if config.get_paths_config()["samples"]:
        mask = samples_feature_mask(samples)
        if mask != model.config.feature_mask:
            raise ConfigError(f"checkpoint was trained with feature mask {model.config.feature_mask}, "
                              f"samples were built with {mask}")
    result = evaluate_rmse(model, samples)
    report = {"rmse": result.rmse, "per_year": list(result.per_year), "n_samples": len(samples)}
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    print(f"RMSE over {len(samples)} samples: {result.rmse:.4f}")
    return 0


def cmd_trials(args, config):
    """Run the trial protocol and write its report"""
    model_config = model_config_from(config)
    train_config = train_config_from(config)
    records, mar = load_inputs(config, model_config)
    n_trials = int(config.get_train_config()["n_trials"])
    report = run_trials(
        records, mar, model_config, train_config, n_trials,
        workers=resolve_workers(config, n_trials),
        bit_exact=bool(config.get_system_config()["bit_exact"]),
    )
    out = Path(args.out) if args.out else output_dir(config) / "trials.json"
    write_report(report, out)
    print(f"{report.label}: {report.result()}")
    if not report.trial_rmse:
        raise NumericFailureError(f"all {n_trials} trial(s) failed; see {out}")
    return 0


def cmd_sweep(args, config):
    """Trial protocol for all 32 physical-feature masks, one report each plus a merged table"""
    model_config = model_config_from(config)
    train_config = train_config_from(config)
    config.validate_paths("mar")
    records, mar = load_inputs(config, model_config)
    n_trials = int(config.get_train_config()["n_trials"])
    reports = sweep_masks(
        records, mar, model_config, train_config, n_trials,
        workers=resolve_workers(config, n_trials),
        bit_exact=bool(config.get_system_config()["bit_exact"]),
    )
    out = output_dir(config) / "sweep"
    for report in reports:
        write_report(report, out / f"mask_{report.config['model']['feature_mask']}.json")
    write_tables(reports, out / "table")
    print(format_table(reports))
    return 0


def cmd_gradcheck(args, config):
    """Run the gradient suite; exits 5 when a check fails"""
    results = run_suite(int(config.get_train_config()["seed"]))
    for r in results:
        print(f"{'✓' if r.passed else '✗'} {r.name:<20} {r.max_rel_error:.2e}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise GradientCheckFailed(f"gradient check failed for {', '.join(failed)}")
    return 0


def write_tables(reports, prefix):
    """Write the comparison table as text and CSV"""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".txt").write_text(format_table(reports) + "\n", encoding="utf-8")
    reports_to_frame(reports).to_csv(prefix.with_suffix(".csv"), index=False)


def cmd_report(args, config):
    """Merge trial reports into one comparison table"""
    reports = []
    for path in args.reports:
        if not Path(path).exists():
            raise ConfigError(f"trial report not found: {path}")
        try:
            reports.append(read_report(path))
        except (json.JSONDecodeError, TypeError) as e:
            raise InvalidInputError(f"{path}: not a trial report ({e})") from e
    prefix = Path(args.out) if args.out else output_dir(config) / "table"
    write_tables(reports, prefix)
    print(format_table(reports))
    return 0


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _fanout(text):
    if text == "all":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"fanout must be 'all' or an integer, got '{text}'")


def _add_common(p):
    p.add_argument("--config", help="flat YAML config file (keys as in Config.KEY_SECTIONS)")
    p.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    p.add_argument("--output-dir", dest="output_dir", help="directory for checkpoints, histories and reports")
    p.add_argument("--seed", type=int, help="base seed for splits, initialisation and sampling")
    p.add_argument("--bit-exact", dest="bit_exact", action=argparse.BooleanOptionalAction, default=None,
                   help="single-threaded BLAS and no wall-clock fields in outputs (default on)")


def _add_data(p):
    p.add_argument("--records", help="labeled records file (JSON lines)")
    p.add_argument("--mar", help="MAR samples file (CSV)")
    p.add_argument("--n-traces", dest="n_traces", type=int, help="expected traces per record")
    p.add_argument("--min-layers", dest="min_layers", type=int, help="complete layers a record needs")
    p.add_argument("--feature-mask", dest="feature_mask",
                   help="'base', 'all', an 8-bit string or comma-separated feature names")
    p.add_argument("--edge-mode", dest="edge_mode", choices=("as-written", "sqrt"), help="edge weight formula")
    p.add_argument("--edge-cap", dest="edge_cap", type=float, help="finite cap for coincident-node weights")


def _add_model(p):
    p.add_argument("--cell-kind", dest="cell_kind", choices=("sage", "gcn"), help="recurrent graph cell")
    p.add_argument("--hidden", type=int, help="LSTM hidden size")
    p.add_argument("--head", type=_int_list, help="head layer widths, e.g. 128,64")
    p.add_argument("--dropout-p", dest="dropout_p", type=float, help="head dropout probability")
    p.add_argument("--fanout", type=_fanout, help="'all' or neighbours sampled per node")
    p.add_argument("--weighted-mean", dest="weighted_mean", action=argparse.BooleanOptionalAction, default=None,
                   help="weight the neighbour mean by edge weight")
    p.add_argument("--bias", action=argparse.BooleanOptionalAction, default=None, help="gate biases")


def _add_train(p):
    p.add_argument("--epochs", type=int, help="training epochs (default 450 for SAGE cells, 300 for GCN cells)")
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--lr-period", dest="lr_period", type=int, help="epochs between learning-rate halvings")
    p.add_argument("--lr-gamma", dest="lr_gamma", type=float, help="learning-rate decay factor")
    p.add_argument("--weight-decay", dest="weight_decay", type=float, help="L2 weight decay")
    p.add_argument("--decoupled-weight-decay", dest="decoupled_weight_decay",
                   action=argparse.BooleanOptionalAction, default=None, help="AdamW-style decay")
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=None,
                   help="reshuffle training samples every epoch")
    p.add_argument("--log-every", dest="log_every", type=int, help="epochs between INFO progress lines")
    p.add_argument("--progress", action=argparse.BooleanOptionalAction, default=None, help="tqdm progress bar")


def build_parser():
    """Argument parser with one subcommand per pipeline stage"""
    parser = argparse.ArgumentParser(prog="icegnn", description="Physics-informed graph networks for ice-layer thickness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic records and MAR samples")
    _add_common(p)
    p.add_argument("--n", type=int, default=20, help="number of records")
    p.add_argument("--n-traces", dest="n_traces", type=int, help="traces per record")
    p.add_argument("--noise", type=float, default=0.02, help="relative per-trace thickness noise")
    p.add_argument("--no-mar", action="store_true", help="skip the MAR file")
    p.add_argument("--out", help="output directory (default: output_dir)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="materialize temporal samples from records (+ MAR)")
    _add_common(p)
    _add_data(p)
    p.add_argument("--out", help="samples file (default: output_dir/samples.jsonl)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train one model and write checkpoint + history")
    _add_common(p)
    _add_data(p)
    p.add_argument("--samples", help="prebuilt samples file (instead of records + MAR)")
    _add_model(p)
    _add_train(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="RMSE of a checkpoint on a sample set")
    _add_common(p)
    _add_data(p)
    p.add_argument("--samples", help="prebuilt samples file (instead of records + MAR)")
    p.add_argument("--checkpoint", required=True, help="checkpoint written by 'train'")
    p.add_argument("--out", help="write the RMSE report as JSON")
    p.set_defaults(func=cmd_eval)

    for name, func, help_text in (
        ("trials", cmd_trials, "five-trial protocol, writes a trial report"),
        ("sweep", cmd_sweep, "trial protocol over all 32 physical-feature masks"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_data(p)
        _add_model(p)
        _add_train(p)
        p.add_argument("--n-trials", dest="n_trials", type=int, help="independent splits")
        p.add_argument("--workers", type=int, help="worker processes (0 = one per physical core)")
        if name == "trials":
            p.add_argument("--out", help="report file (default: output_dir/trials.json)")
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward rule")
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="merge trial reports into a comparison table")
    _add_common(p)
    p.add_argument("reports", nargs="+", help="trial report files")
    p.add_argument("--out", help="table path prefix; writes .txt and .csv (default: output_dir/table)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        setup_logging(config)
        return args.func(args, config)
    except IceGnnError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
