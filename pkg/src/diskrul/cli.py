"""``diskrul`` command-line entry point.

Every subcommand except ``ingest`` and ``stats`` writes a ``run.json`` next
to its outputs with the resolved configuration, the seeds and a sha256 of
every artifact. Options can come from a JSON run config (``--config``);
flags given on the command line override it.

Exit status: 0 on success, 2 for usage or configuration errors, 1 for
runtime failures (printed as ``error[<category>]: message`` with category
io, schema, domain or numeric).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .dataset import (
    SplitSpec,
    build_splits,
    load_windows,
    save_windows,
    split_from_labels,
    split_serials,
)
from .errors import DiskrulError, DomainError, SchemaError
from .evaluation import (
    WINDOW_SIZES,
    SweepPoint,
    SweepReport,
    config_sweep,
    evaluate,
    generalize,
    safe_name,
    window_sweep,
    write_predictions,
)
from .featsel import GBTConfig, fit_gbt, importance, select_features, write_importance_csv
from .ingest import extract_histories, failure_census, ingest_csv
from .preprocess import FeatureSet, ScalerParams, fit_scaler, prepare_histories, scale_history
from .seqnet import REFERENCE_CONFIGS, EncoderDecoderConfig, EncoderDecoderModel, TrainConfig, train
from .seqnet import checkpoint
from .synth import SynthSpec, generate, write_csv

log = logging.getLogger("diskrul")


class UsageError(Exception):
    """Bad flags or an invalid run config (exit status 2)."""


# run configuration ----------------------------------------------------------


@dataclass
class RunConfig:
    """Everything a run depends on; serializable to and from JSON.

    All randomness derives from ``seed``: drive splits, GBT subsampling,
    weight initialization and batch shuffling.
    """

    root: str | None = None
    model: str | None = None
    years: list[int] | None = None
    features: str | None = None  # None = default attribute set; else features.json or importance.csv
    k: int = 15
    timesteps: int = 25
    stride: int = 1
    horizon: int = 0
    cap_rul: float | None = None
    split: dict = field(default_factory=lambda: {"train": 0.70, "val": 0.15, "test": 0.15, "k_folds": None})
    gbt: dict = field(default_factory=lambda: dataclasses.asdict(GBTConfig()))
    network: dict = field(default_factory=lambda: {
        "units_per_layer": 50, "encoder_layers": 1, "decoder_layers": 1,
        "dense_widths": [64, 32, 16, 8, 1]})
    train: dict = field(default_factory=lambda: {
        k: v for k, v in TrainConfig().to_dict().items() if k != "seed"})
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise UsageError(f"unknown run config keys: {', '.join(unknown)}")
        base = cls()
        for key in ("split", "gbt", "network", "train"):
            if key in d:
                d = {**d, key: {**getattr(base, key), **d[key]}}
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self):
        return dataclasses.asdict(self)

    # typed views, built (and so validated) on demand
    def split_spec(self):
        return SplitSpec(seed=self.seed, **self.split)

    def gbt_config(self):
        return GBTConfig(**self.gbt)

    def train_config(self):
        return TrainConfig(seed=self.seed, **self.train)

    def network_row(self):
        n = self.network
        return (n["units_per_layer"], n["encoder_layers"], n["decoder_layers"])

    def network_config(self, input_features, timesteps):
        return EncoderDecoderConfig.from_row(
            self.network_row(), input_features, timesteps, tuple(self.network["dense_widths"]))

    def validate(self):
        try:
            self.split_spec()
            self.gbt_config()
            self.train_config()
            self.network_config(1, max(1, int(self.timesteps)))
            if set(self.network) - {"units_per_layer", "encoder_layers", "decoder_layers", "dense_widths"}:
                raise DomainError("unknown network keys")
        except (DomainError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid run config: {exc}") from exc
        if int(self.timesteps) < 1 or int(self.stride) < 1 or int(self.horizon) < 0 or int(self.k) < 1:
            raise UsageError("timesteps, stride and k must be positive, horizon non-negative")
        if self.years is not None and (len(self.years) != 2 or self.years[0] > self.years[1]):
            raise UsageError("years must be an inclusive [first, last] pair")
        if self.cap_rul is not None and not float(self.cap_rul) > 0:
            raise UsageError("cap_rul must be positive")


# flag name -> (section, key) inside RunConfig
_FLAG_MAP = {
    "root": (None, "root"),
    "model": (None, "model"),
    "years": (None, "years"),
    "features": (None, "features"),
    "k": (None, "k"),
    "timesteps": (None, "timesteps"),
    "stride": (None, "stride"),
    "horizon": (None, "horizon"),
    "cap_rul": (None, "cap_rul"),
    "seed": (None, "seed"),
    "split": ("split", None),
    "k_folds": ("split", "k_folds"),
    "n_trees": ("gbt", "n_trees"),
    "max_depth": ("gbt", "max_depth"),
    "gbt_learning_rate": ("gbt", "learning_rate"),
    "min_samples_leaf": ("gbt", "min_samples_leaf"),
    "units": ("network", "units_per_layer"),
    "encoder_layers": ("network", "encoder_layers"),
    "decoder_layers": ("network", "decoder_layers"),
    "dense_widths": ("network", "dense_widths"),
    "epochs": ("train", "max_epochs"),
    "batch_size": ("train", "batch_size"),
    "learning_rate": ("train", "learning_rate"),
    "patience": ("train", "patience"),
    "min_delta": ("train", "min_delta"),
    "precision": ("train", "precision"),
    "clip_norm": ("train", "clip_norm"),
    "log1p_target": ("train", "log1p_target"),
}


def resolve_config(args) -> RunConfig:
    d = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise UsageError("run config must be a JSON object")
    d = json.loads(json.dumps(d))
    for flag, (section, key) in _FLAG_MAP.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if flag == "split":
            d.setdefault("split", {}).update(zip(("train", "val", "test"), value))
        elif section is None:
            d[key] = value
        else:
            d.setdefault(section, {})[key] = value
    return RunConfig.from_dict(d)


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join(f"--{n}" for n in missing))


# helpers --------------------------------------------------------------------


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")
    os.replace(tmp, path)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_run(out_dir, command, cfg, artifacts, extra=None):
    """``run.json`` with the resolved config, seeds and artifact hashes."""
    run = {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "config": cfg.to_dict() if cfg is not None else None,
        "seeds": {"seed": cfg.seed} if cfg is not None else {},
        "artifacts": {os.path.basename(p): _sha256(p) for p in artifacts},
    }
    if extra:
        run.update(extra)
    _write_json(os.path.join(out_dir, "run.json"), run)


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _parent_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    return d


def load_feature_source(source, k=15) -> FeatureSet:
    """Default attributes, a ``features.json`` file, or the top ``k`` of an importance CSV."""
    if source is None:
        return FeatureSet.default()
    if source.endswith(".csv"):
        with open(source, newline="") as fh:
            rows = list(csv.DictReader(fh))
        try:
            rows.sort(key=lambda r: int(r["rank"]))
            attrs = [int(r["attribute"]) for r in rows[:k]]
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"{source}: not an importance report ({exc})") from exc
        if len(attrs) < k:
            raise DomainError(f"{source} ranks {len(attrs)} attributes, fewer than k={k}")
        return FeatureSet(tuple(sorted(attrs)))
    with open(source) as fh:
        try:
            return FeatureSet.from_json(fh.read())
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{source}: not a feature file ({exc})") from exc


def _histories(cfg, features):
    seqs = extract_histories(cfg.root, cfg.model, tuple(cfg.years) if cfg.years else None)
    if not seqs:
        raise DomainError(f"no records for model {cfg.model!r} under {cfg.root}")
    hs, skipped = prepare_histories(seqs, features, cfg.cap_rul)
    if skipped:
        log.info("%d drives without a failure record left out", len(skipped))
    return hs


def _splits_from_file(path):
    ds, labels = load_windows(path)
    if labels is None:
        raise SchemaError(f"{path} carries no train/val/test labels; rebuild it with build-dataset")
    return ds, split_from_labels(ds, labels)


# subcommands ----------------------------------------------------------------


def cmd_ingest(args):
    summary = ingest_csv(args.root, args.files, args.model, workers=args.workers)
    print(json.dumps(summary.as_dict(), indent=2))


def cmd_stats(args):
    census = failure_census(args.root, args.models)
    if args.json:
        print(json.dumps({m: n for m, n in census.entries}, indent=2))
        return
    width = max([len("model")] + [len(m) for m, _ in census.entries])
    print(f"{'model':<{width}}  failures")
    for m, n in census.entries:
        print(f"{m:<{width}}  {n}")


def cmd_select_features(args):
    cfg = resolve_config(args)
    _require(cfg, "root", "model")
    out_dir = _parent_dir(args.out)
    seqs = extract_histories(cfg.root, cfg.model, tuple(cfg.years) if cfg.years else None)
    if not seqs:
        raise DomainError(f"no records for model {cfg.model!r} under {cfg.root}")
    present = sorted({a for seq in seqs for r in seq for a, v in r.smart.items() if v is not None})
    if not present:
        raise DomainError("no S.M.A.R.T. values present for this model")
    candidates = FeatureSet(tuple(present))
    hs, _ = prepare_histories(seqs, candidates, cfg.cap_rul)
    # fit on the same training drives that build-dataset will use
    train_ids, _, _ = split_serials([h.serial for h in hs], cfg.split_spec())
    keep = set(train_ids)
    train_h = [h for h in hs if h.serial in keep]
    scaler = fit_scaler(train_h)
    X = np.concatenate([scale_history(h, scaler).X for h in train_h])
    y = np.concatenate([h.rul for h in train_h])
    ens = fit_gbt(X, y, cfg.gbt_config(), seed=cfg.seed, attributes=candidates.attribute_numbers)
    report = importance(ens)
    chosen = select_features(report, min(cfg.k, len(report)))
    with open(args.out, "w") as fh:
        fh.write(chosen.to_json())
    imp_path = os.path.join(out_dir, "importance.csv")
    write_importance_csv(report, imp_path)
    _write_run(out_dir, "select-features", cfg, [args.out, imp_path],
               {"selected": list(chosen.attribute_numbers)})
    print(json.dumps({"selected": list(chosen.attribute_numbers)}))


def cmd_build_dataset(args):
    cfg = resolve_config(args)
    _require(cfg, "root", "model")
    out_dir = _out_dir(args.out)
    features = load_feature_source(cfg.features, cfg.k)
    hs = _histories(cfg, features)
    ds, labels, scaler = build_splits(hs, int(cfg.timesteps), cfg.split_spec(), int(cfg.stride),
                                      int(cfg.horizon))
    paths = [os.path.join(out_dir, n) for n in ("windows.bin", "scaler.json", "features.json")]
    save_windows(paths[0], ds, labels)
    scaler.save(paths[1])
    with open(paths[2], "w") as fh:
        fh.write(features.to_json())
    counts = {n: int(np.sum(labels == i)) for i, n in enumerate(("train", "val", "test"))}
    _write_run(out_dir, "build-dataset", cfg, paths, {"samples": counts, "skipped": ds.skipped})
    print(json.dumps({"samples": counts, "drives": len(ds.serials), "skipped": len(ds.skipped)}))


def cmd_train(args):
    cfg = resolve_config(args)
    out_dir = _parent_dir(args.out)
    ds, (tr, va, te) = _splits_from_file(args.data)
    mcfg = cfg.network_config(ds.X.shape[2], ds.timesteps)
    tcfg = cfg.train_config()
    model = EncoderDecoderModel.init(mcfg, seed=cfg.seed, precision=tcfg.precision)
    model, report = train(model, tr, va, tcfg)
    digest = checkpoint.save(model, args.out, {"features": list(ds.features), "seed": cfg.seed})
    rep_path = os.path.join(out_dir, "train_report.json")
    _write_json(rep_path, report.to_dict())
    _write_run(out_dir, "train", cfg, [args.out, rep_path, args.data],
               {"report_digest": report.digest(), "checkpoint_sha256": digest})
    print(json.dumps({"best_epoch": report.best_epoch, "best_val_rmse": report.best_val_rmse,
                      "stopped_epoch": report.stopped_epoch}))


def cmd_eval(args):
    model, _ = checkpoint.load(args.model_path)
    ds, splits = _splits_from_file(args.data)
    out_dir = _out_dir(args.out)
    point = SweepPoint("checkpoint")
    for name, part in zip(("train", "val", "test"), splits):
        if name in args.splits and len(part):
            point.reports.append(evaluate(model, part, name))
    sweep = SweepReport("splits", [point])
    paths = [os.path.join(out_dir, "eval.json"), os.path.join(out_dir, "eval_predictions.csv")]
    _write_json(paths[0], sweep.to_dict())
    write_predictions(paths[1], sweep)
    _write_run(out_dir, "eval", None, paths + [args.model_path, args.data])
    for r in point.reports:
        print(f"{r.split:<5}  n={r.n}  rmse={r.rmse:.6g}  r2={r.r2:.6g}")


def cmd_sweep_configs(args):
    cfg = resolve_config(args)
    out_dir = _out_dir(args.out)
    ds, splits = _splits_from_file(args.data)
    sweep = config_sweep(splits, REFERENCE_CONFIGS, cfg.train_config(), seed=cfg.seed,
                         drive_model=cfg.model or "", dense_widths=tuple(cfg.network["dense_widths"]),
                         out_dir=out_dir)
    paths = [os.path.join(out_dir, n) for n in ("table4.csv", "table4_predictions.csv", "sweep.json")]
    _write_json(paths[2], sweep.to_dict())
    _write_run(out_dir, "sweep-configs", cfg, paths + [args.data])
    for p in sweep.points:
        te = p.report("test")
        print(f"config {p.key} {p.info['row']}: {p.status}" + (f" test rmse {te.rmse:.6g}" if te else ""))


def cmd_sweep_windows(args):
    cfg = resolve_config(args)
    _require(cfg, "root", "model")
    out_dir = _out_dir(args.out)
    features = load_feature_source(cfg.features, cfg.k)
    hs = _histories(cfg, features)
    k = cfg.split.get("k_folds") or 5
    sweep = window_sweep(hs, args.t_values or WINDOW_SIZES, k, cfg.train_config(), cfg.network_row(),
                         seed=cfg.seed, drive_model=cfg.model, stride=int(cfg.stride),
                         dense_widths=tuple(cfg.network["dense_widths"]), out_dir=out_dir)
    paths = [os.path.join(out_dir, n) for n in
             ("fig6.csv", "fig6_summary.csv", "fig6_predictions.csv", "sweep.json")]
    _write_json(paths[3], sweep.to_dict())
    _write_run(out_dir, "sweep-windows", cfg, paths)
    for p in sweep.points:
        print(f"T={p.key}: {p.status} ({len(p.reports)} folds)")


def cmd_generalize(args):
    cfg = resolve_config(args)
    _require(cfg, "root")
    out_dir = _out_dir(args.out)
    model, _ = checkpoint.load(args.model_path)
    scaler = ScalerParams.load(args.scaler)
    features = load_feature_source(args.feature_file or cfg.features, cfg.k)
    if tuple(features) != scaler.features:
        raise DomainError("feature file and scaler disagree on the attribute list")
    serials = None
    if args.serials_from:
        ds, labels = load_windows(args.serials_from)
        if labels is None:
            raise SchemaError(f"{args.serials_from} carries no split labels")
        code = ("train", "val", "test").index(args.serial_split)
        keep = sorted(set(ds.groups[labels == code].tolist()))
        # the split belongs to the source model (--model); without it, to every target
        serials = {m: keep for m in ([cfg.model] if cfg.model else args.targets)}
    sweep = generalize(model, scaler, features, args.targets, cfg.root,
                       tuple(cfg.years) if cfg.years else None, serials, cfg.cap_rul,
                       int(cfg.stride), out_dir=out_dir)
    paths = [os.path.join(out_dir, "table5.csv")]
    paths += [os.path.join(out_dir, f"predictions_{safe_name(p.key)}.csv") for p in sweep.points]
    _write_json(os.path.join(out_dir, "generalize.json"), sweep.to_dict())
    paths.append(os.path.join(out_dir, "generalize.json"))
    _write_run(out_dir, "generalize", cfg, paths + [args.model_path, args.scaler],
               {"scaler_digest": scaler.digest()})
    for p in sweep.points:
        r = p.report("all")
        print(f"{p.key}: {p.status}" + (f" r2={r.r2:.4g} rmse={r.rmse:.6g}" if r else ""))


def cmd_synth(args):
    spec_d = {}
    if args.spec:
        try:
            with open(args.spec) as fh:
                spec_d = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read spec {args.spec}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"spec {args.spec} is not valid JSON: {exc}") from exc
    for key in ("n_drives", "mean_lifetime_days", "n_features", "n_informative", "noise_sigma",
                "missing_rate", "seed", "first_drive", "model"):
        v = getattr(args, key, None)
        if v is not None:
            spec_d[key] = v
    try:
        spec = SynthSpec.from_dict(spec_d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid synth spec: {exc}") from exc
    out_dir = _parent_dir(args.out)
    n = write_csv(generate(spec), args.out)
    _write_run(out_dir, "synth", None, [args.out], {"spec": spec.to_dict(), "seeds": {"seed": spec.seed}})
    print(json.dumps({"rows": n, "drives": spec.n_drives}))


# argument parsing -----------------------------------------------------------


def _add_data_flags(p, store=True):
    if store:
        p.add_argument("--root", help="store root directory")
        p.add_argument("--model", help="drive model identifier")
        p.add_argument("--years", type=int, nargs=2, metavar=("FIRST", "LAST"))
        p.add_argument("--cap-rul", type=float, dest="cap_rul",
                       help="admit healthy drives with RUL capped at this many days")
    p.add_argument("--config", help="JSON run config; flags override its values")
    p.add_argument("--seed", type=int)


def _add_window_flags(p):
    p.add_argument("--features", help="features.json or importance.csv (default: built-in set)")
    p.add_argument("--k", type=int, help="top-k attributes when --features is an importance CSV")
    p.add_argument("--timesteps", "-T", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--split", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))


def _add_train_flags(p):
    p.add_argument("--units", type=int)
    p.add_argument("--encoder-layers", type=int, dest="encoder_layers")
    p.add_argument("--decoder-layers", type=int, dest="decoder_layers")
    p.add_argument("--dense-widths", type=int, nargs="+", dest="dense_widths")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--patience", type=int)
    p.add_argument("--min-delta", type=float, dest="min_delta")
    p.add_argument("--precision", choices=("single", "double"))
    p.add_argument("--clip-norm", type=float, dest="clip_norm")
    p.add_argument("--log1p-target", action="store_const", const=True, dest="log1p_target")


def build_parser():
    parser = argparse.ArgumentParser(prog="diskrul", description="Hard-drive RUL prediction toolkit")
    parser.add_argument("--version", action="version", version=f"diskrul {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", help="load Backblaze CSV files into the store")
    p.add_argument("--root", required=True)
    p.add_argument("--model", help="keep only this drive model")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="unique failed drives per model")
    p.add_argument("--root", required=True)
    p.add_argument("--models", nargs="+")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("select-features", help="rank attributes with boosted trees")
    _add_data_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--split", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--n-trees", type=int, dest="n_trees")
    p.add_argument("--max-depth", type=int, dest="max_depth")
    p.add_argument("--gbt-learning-rate", type=float, dest="gbt_learning_rate")
    p.add_argument("--min-samples-leaf", type=int, dest="min_samples_leaf")
    p.add_argument("--out", required=True, help="features.json to write")
    p.set_defaults(func=cmd_select_features)

    p = sub.add_parser("build-dataset", help="windowed train/val/test tensors")
    _add_data_flags(p)
    _add_window_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train one encoder-decoder model")
    _add_data_flags(p, store=False)
    _add_train_flags(p)
    p.add_argument("--data", required=True, help="windows.bin from build-dataset")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on the dataset splits")
    p.add_argument("--model", required=True, dest="model_path", help="checkpoint path")
    p.add_argument("--data", required=True)
    p.add_argument("--splits", nargs="+", default=["train", "val", "test"],
                   choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-configs", help="train the six reference configurations")
    _add_data_flags(p, store=False)
    _add_train_flags(p)
    p.add_argument("--model", help="drive model label for the report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_configs)

    p = sub.add_parser("sweep-windows", help="k-fold cross-validation over window sizes")
    _add_data_flags(p)
    _add_window_flags(p)
    _add_train_flags(p)
    p.add_argument("--t-values", type=int, nargs="+", dest="t_values")
    p.add_argument("--folds", type=int, dest="k_folds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_windows)

    p = sub.add_parser("generalize", help="apply a trained model to other drive models")
    _add_data_flags(p)
    p.add_argument("--checkpoint", required=True, dest="model_path")
    p.add_argument("--scaler", required=True)
    p.add_argument("--feature-file", dest="feature_file", help="features.json of the source run")
    p.add_argument("--stride", type=int)
    p.add_argument("--targets", nargs="+", required=True)
    p.add_argument("--serials-from", dest="serials_from",
                   help="windows.bin whose split selects the drives to score")
    p.add_argument("--serial-split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generalize)

    p = sub.add_parser("synth", help="write a synthetic fleet as Backblaze CSV")
    p.add_argument("--spec", help="SynthSpec JSON")
    p.add_argument("--n-drives", type=int, dest="n_drives")
    p.add_argument("--mean-lifetime-days", type=float, dest="mean_lifetime_days")
    p.add_argument("--n-features", type=int, dest="n_features")
    p.add_argument("--n-informative", type=int, dest="n_informative")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--missing-rate", type=float, dest="missing_rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--first-drive", type=int, dest="first_drive",
                   help="index of the first drive (a second population sharing the fleet layout)")
    p.add_argument("--model", help="drive model name written to the CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"diskrul: error: {exc}", file=sys.stderr)
        return 2
    except DiskrulError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
