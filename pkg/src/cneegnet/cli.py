"""Command-line entry point binding the modules into reproducible runs.

Every run that writes files also writes a JSON manifest next to them with the
fully resolved configuration, the seed, and SHA-256 hashes of inputs and
outputs. Numeric settings come from an optional per-subcommand JSON config
file merged under explicit flags (flags win).

Exit codes: 0 success, 1 runtime/data failure, 2 usage or config error.
"""

import argparse
import glob
import hashlib
import json
import os
import sys
from dataclasses import asdict, fields as dataclass_fields

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import SplitSpec, balance_undersample, read_epochs, split, write_epochs
from .errors import ConfigError, DataError, FormatError, ShapeError, UsageError
from .models import ARCHS, ModelConfig, PRESETS
from .nn.gradcheck import DEFAULT_TOL, check_model, run_layer_suite
from .optim import KINDS as OPTIMIZER_KINDS
from .optim import OptimizerHyper
from .reporting import (load_report, render_bar_svg, save_report, summary_csv,
                        summary_table, write_history_csv)
from .sweep import SweepSpace, run_sweep, sweep_csv, sweep_json
from .synth import CONDITIONS, SynthConfig, generate
from .training import TrainConfig, aggregate_report, evaluate, run_experiment


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, command, config_file, config, seed, inputs, outputs):
    manifest = {
        "command": command,
        "config_file": config_file,
        "config": config,
        "seed": seed,
        "inputs": {p: _sha256_file(p) for p in inputs},
        "outputs": {p: _sha256_file(p) for p in outputs},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_config_file(path, allowed):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
    except OSError as e:
        raise UsageError(f"--config: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"--config {path}: not valid JSON: {e}")
    if not isinstance(d, dict):
        raise UsageError(f"--config {path}: expected a JSON object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise UsageError(f"--config {path}: unknown key {sorted(unknown)[0]!r}")
    return d


def _subdict(cfgfile, key, datacls):
    sub = cfgfile.get(key, {})
    if not isinstance(sub, dict):
        raise UsageError(f"--config: {key!r} must be a JSON object")
    allowed = {f.name for f in dataclass_fields(datacls)}
    unknown = set(sub) - allowed
    if unknown:
        raise UsageError(f"--config: unknown {key} key {sorted(unknown)[0]!r}")
    return dict(sub)


# ---------------------------------------------------------------- synth

_SYNTH_FLAGS = {
    "n_epochs": "--epochs",
    "channels": "--channels",
    "samples": "--samples",
    "condition": "--condition",
    "seed": "--seed",
    "oddball_rate": "--oddball-rate",
}


def cmd_synth(args):
    allowed = {f.name for f in dataclass_fields(SynthConfig)}
    merged = _load_config_file(args.config, allowed)
    for field in _SYNTH_FLAGS:
        value = getattr(args, "epochs" if field == "n_epochs" else field)
        if value is not None:
            merged[field] = value
    try:
        cfg = SynthConfig(**merged)
    except ConfigError as e:
        msg = str(e)
        for field, flag in _SYNTH_FLAGS.items():
            msg = msg.replace(field, flag)
        raise UsageError(msg)
    ds = generate(cfg)
    write_epochs(ds, args.out)
    _write_manifest(args.out + ".manifest.json", "synth", args.config,
                    asdict(cfg), cfg.seed, [], [args.out])
    counts = ds.class_counts()
    print(f"wrote {args.out}: {ds.n_epochs} epochs "
          f"({counts[1]} targets, {counts[0]} non-targets), "
          f"{ds.n_channels} channels x {ds.n_samples} samples, "
          f"condition {cfg.condition}")
    return 0


# ---------------------------------------------------------------- train

def cmd_train(args):
    cfgfile = _load_config_file(args.config, {"model", "train", "optimizer"})
    ds = read_epochs(args.data)

    model_kwargs = {"channels": ds.n_channels, "samples": ds.n_samples}
    opt_kwargs = {}
    if args.preset is not None:
        preset = dict(PRESETS[args.preset])
        opt_kwargs["kind"] = preset.pop("optimizer")
        model_kwargs.update(preset)
    model_kwargs.update(_subdict(cfgfile, "model", ModelConfig))
    if args.arch is not None:
        model_kwargs["arch"] = args.arch
    model_cfg = ModelConfig(**model_kwargs)

    opt_kwargs.update(_subdict(cfgfile, "optimizer", OptimizerHyper))
    if args.optimizer is not None:
        opt_kwargs["kind"] = args.optimizer
    opt_hyper = OptimizerHyper(**opt_kwargs)

    train_kwargs = _subdict(cfgfile, "train", TrainConfig)
    if args.epochs is not None:
        train_kwargs["max_epochs"] = args.epochs
    if args.batch is not None:
        train_kwargs["batch_size"] = args.batch
    if args.seed is not None:
        train_kwargs["seed"] = args.seed
    train_cfg = TrainConfig(**train_kwargs)

    os.makedirs(args.out, exist_ok=True)
    model, report = run_experiment(ds, model_cfg, train_cfg, opt_hyper)
    ckpt_path = os.path.join(args.out, "checkpoint.cnw1")
    report_path = os.path.join(args.out, "report.json")
    history_path = os.path.join(args.out, "history.csv")
    save_checkpoint(ckpt_path, model)
    save_report(report_path, report)
    write_history_csv(history_path, report)
    _write_manifest(os.path.join(args.out, "manifest.json"), "train",
                    args.config, report.config, train_cfg.seed, [args.data],
                    [ckpt_path, report_path, history_path])
    print(f"trained {model_cfg.arch} ({model.param_count()} parameters): "
          f"stopped at epoch {report.stopped_at_epoch} "
          f"(best validation at {report.best_val_epoch}), "
          f"test accuracy {report.test_accuracy:.4f}")
    return 0


# ---------------------------------------------------------------- eval

def cmd_eval(args):
    model = load_checkpoint(args.model)
    ds = read_epochs(args.data)
    accuracy, confusion = evaluate(model, ds)
    print(f"accuracy {accuracy:.6f}")
    print("confusion (rows true, columns predicted):")
    for row in confusion:
        print("  " + " ".join(f"{int(v):6d}" for v in row))
    return 0


# ---------------------------------------------------------------- sweep

def cmd_sweep(args):
    cfgfile = _load_config_file(args.config, {"train"})
    if args.space is not None:
        try:
            with open(args.space, "r", encoding="utf-8") as f:
                space = SweepSpace.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise UsageError(f"--space {args.space}: not valid JSON: {e}")
    else:
        space = SweepSpace()
    ds = read_epochs(args.data)
    seed = args.seed if args.seed is not None else 0

    train_kwargs = _subdict(cfgfile, "train", TrainConfig)
    if args.epochs is not None:
        train_kwargs["max_epochs"] = args.epochs
    train_kwargs["seed"] = seed
    base_train = TrainConfig(**train_kwargs)

    balanced = balance_undersample(ds, seed=seed)
    datasets = split(balanced, SplitSpec(seed=seed))
    ranked = run_sweep(space, args.budget, datasets, base_train_cfg=base_train,
                       master_seed=seed, workers=args.workers, arch=args.arch)

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    json_path = os.path.join(args.out, "sweep.json")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write(sweep_csv(ranked))
    with open(json_path, "w", encoding="utf-8") as f:
        f.write(sweep_json(ranked))
        f.write("\n")
    _write_manifest(os.path.join(args.out, "manifest.json"), "sweep",
                    args.config,
                    {"space": space.to_dict(), "budget": args.budget,
                     "train": asdict(base_train), "arch": args.arch},
                    seed, [args.data], [csv_path, json_path])

    failures = sum(1 for r in ranked if r.error is not None)
    print(f"{len(ranked)} trials ranked ({failures} failed); best:")
    for r in ranked[:5]:
        if r.error is not None:
            print(f"  trial {r.trial_index}: failed ({r.error})")
            continue
        m = r.config["model"]
        print(f"  trial {r.trial_index}: val {r.val_accuracy:.4f} "
              f"test {r.test_accuracy:.4f} "
              f"f1={m['f1']} f2={m['f2']} d={m['d']} "
              f"kernel={m['kernel_length']} "
              f"dropout={m['dropout_rate']:.3f} norm={m['norm_rate']:.3f} "
              f"opt={r.config['optimizer']['kind']} "
              f"batch={r.config['train']['batch_size']}")
    return 0


# ---------------------------------------------------------------- gradcheck

def cmd_gradcheck(args):
    results = run_layer_suite(seeds=range(args.seeds))
    model_results = check_model()
    ok = True
    print(f"layer gradient checks ({args.seeds} seeds, tolerance {args.tol:g}):")
    print(f"  {'layer':34s} {'max rel err':>12s} {'coords':>8s}  status")
    for r in results:
        good = r.max_rel_err <= args.tol
        ok = ok and good
        print(f"  {r.name:34s} {r.max_rel_err:12.3e} {r.n_checked:8d}  "
              f"{'ok' if good else 'FAIL'}")
    print("model-level check (small config, dropout disabled):")
    for r in model_results:
        good = r.max_rel_err <= args.tol
        ok = ok and good
        print(f"  {r.name:34s} {r.max_rel_err:12.3e} {r.n_checked:8d}  "
              f"{'ok' if good else 'FAIL'}")
    print("gradcheck " + ("passed" if ok else "FAILED"))
    return 0 if ok else 1


# ---------------------------------------------------------------- report

def cmd_report(args):
    series = {}
    for d in args.inputs:
        if not os.path.isdir(d):
            raise DataError(f"--in {d}: not a directory")
        reports = []
        for path in sorted(glob.glob(os.path.join(d, "*.json"))):
            try:
                reports.append(load_report(path))
            except FormatError:
                continue  # manifests and other JSON live alongside reports
        if not reports:
            raise DataError(f"--in {d}: no training reports found")
        name = os.path.basename(os.path.normpath(d))
        if name in series:
            name = os.path.normpath(d)
        series[name] = aggregate_report(reports)

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "summary.csv")
    svg_path = os.path.join(args.out, "summary.svg")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write(summary_csv(series))
    with open(svg_path, "w", encoding="utf-8") as f:
        f.write(render_bar_svg(series))
    _write_manifest(os.path.join(args.out, "manifest.json"), "report", None,
                    {"inputs": list(args.inputs)}, None, [], [csv_path, svg_path])
    print(summary_table(series), end="")
    print(f"wrote {csv_path} and {svg_path}")
    return 0


# ---------------------------------------------------------------- parser

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cneegnet",
        description="Train and evaluate compact convolutional P300 classifiers "
                    "on synthetic oddball EEG.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic epoch file")
    sp.add_argument("--out", required=True, help="output EEP1 file")
    sp.add_argument("--epochs", type=int, help="number of epochs")
    sp.add_argument("--channels", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--condition", choices=CONDITIONS)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--oddball-rate", dest="oddball_rate", type=float,
                    help="fraction of target epochs, in (0, 1)")
    sp.add_argument("--config", help="JSON file of generator settings")
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="train a model on an epoch file")
    tp.add_argument("--data", required=True, help="EEP1 epoch file")
    tp.add_argument("--arch", choices=ARCHS)
    tp.add_argument("--preset", choices=sorted(PRESETS))
    tp.add_argument("--epochs", type=int, help="max training epochs")
    tp.add_argument("--batch", type=int, help="mini-batch size")
    tp.add_argument("--optimizer", choices=OPTIMIZER_KINDS)
    tp.add_argument("--seed", type=int)
    tp.add_argument("--out", default="train-out", help="output directory")
    tp.add_argument("--config", help="JSON file with model/train/optimizer keys")
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval", help="evaluate a checkpoint on an epoch file")
    ep.add_argument("--model", required=True, help="CNW1 checkpoint")
    ep.add_argument("--data", required=True, help="EEP1 epoch file")
    ep.set_defaults(func=cmd_eval)

    wp = sub.add_parser("sweep", help="random hyperparameter search")
    wp.add_argument("--space", help="JSON file of sweep space bounds")
    wp.add_argument("--budget", type=int, required=True, help="number of trials")
    wp.add_argument("--data", required=True, help="EEP1 epoch file")
    wp.add_argument("--epochs", type=int, help="max training epochs per trial")
    wp.add_argument("--seed", type=int)
    wp.add_argument("--workers", type=int, default=1,
                    help="parallel trials (capped by ERPNET_THREADS)")
    wp.add_argument("--arch", choices=ARCHS, default="cn-eegnet")
    wp.add_argument("--out", default="sweep-out", help="output directory")
    wp.add_argument("--config", help="JSON file with a train key")
    wp.set_defaults(func=cmd_sweep)

    gp = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    gp.add_argument("--seeds", type=int, default=20)
    gp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    gp.set_defaults(func=cmd_gradcheck)

    rp = sub.add_parser("report", help="aggregate training reports")
    rp.add_argument("--in", dest="inputs", nargs="+", required=True,
                    metavar="DIR", help="directories of report JSON files")
    rp.add_argument("--out", default="report-out", help="output directory")
    rp.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code is None else int(e.code)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DataError, FormatError, ShapeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
