"""Metrics, sweep harnesses and cross-model generalization.

All reported numbers are computed from final-step predictions, and every
report keeps its ``(expected, predicted)`` pairs so a row can be recomputed
from the emitted CSV files. Floats are written with ``repr`` and read back
bit-exactly.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import WindowedDataset, kfold_serials, make_windows
from .errors import DiskrulError, DomainError
from .ingest import extract_histories
from .preprocess import fit_scaler, prepare_histories, scale_history
from .seqnet import (
    REFERENCE_CONFIGS,
    EncoderDecoderConfig,
    EncoderDecoderModel,
    TrainConfig,
    predict_rul,
    train,
)

log = logging.getLogger(__name__)

WINDOW_SIZES = (5, 10, 15, 20, 25, 30)


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise DomainError(f"length mismatch: {y.size} targets vs {yhat.size} predictions")
    if y.size == 0:
        raise DomainError("metrics need at least one sample")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    d = yhat - y
    return float(np.sqrt(np.mean(d * d)))


def r2(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if y.size < 2:
        raise DomainError("undefined R²: need at least two samples")
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise DomainError("undefined R²: constant targets")
    return float(1.0 - np.sum((y - yhat) ** 2) / ss_tot)


@dataclass
class EvalReport:
    drive_model: str
    config_id: str
    timesteps: int
    split: str
    n: int
    rmse: float
    r2: float  # nan when undefined
    predictions: np.ndarray | None = None  # (n, 2): expected, predicted
    serials: np.ndarray | None = None
    offsets: np.ndarray | None = None
    fold: int | None = None

    def row(self):
        return {
            "drive_model": self.drive_model,
            "config_id": self.config_id,
            "timesteps": self.timesteps,
            "split": self.split,
            "fold": self.fold,
            "n": self.n,
            "rmse": self.rmse,
            "r2": None if math.isnan(self.r2) else self.r2,
        }


@dataclass
class SweepPoint:
    """One requested point of a sweep; ``status`` is ok, failed, empty or missing."""

    key: str
    status: str = "ok"
    reports: list[EvalReport] = field(default_factory=list)
    message: str = ""
    histories: dict = field(default_factory=dict)  # fold -> per-epoch training RMSE
    info: dict = field(default_factory=dict)

    def report(self, split, fold=None):
        for r in self.reports:
            if r.split == split and r.fold == fold:
                return r
        return None


@dataclass
class SweepReport:
    axis: str
    points: list[SweepPoint] = field(default_factory=list)

    def keys(self):
        return [p.key for p in self.points]

    def point(self, key):
        for p in self.points:
            if p.key == str(key):
                return p
        raise KeyError(key)

    def to_dict(self):
        return {
            "axis": self.axis,
            "points": [
                {
                    "key": p.key,
                    "status": p.status,
                    "message": p.message,
                    "info": p.info,
                    "reports": [r.row() for r in p.reports],
                    "histories": {str(k): v for k, v in p.histories.items()},
                }
                for p in self.points
            ],
        }


def evaluate(model, dataset: WindowedDataset, split="test", drive_model="", config_id="",
             fold=None) -> EvalReport:
    """Final-step RMSE and R² of ``model`` on ``dataset``."""
    if len(dataset) == 0:
        raise DomainError(f"no windows to evaluate in split {split!r}")
    yhat = predict_rul(model, dataset.X)
    y = np.asarray(dataset.Y, dtype=np.float64)[:, -1]
    try:
        r2v = r2(y, yhat)
    except DomainError:
        r2v = math.nan
    return EvalReport(
        drive_model=drive_model,
        config_id=config_id,
        timesteps=dataset.timesteps,
        split=split,
        n=int(y.size),
        rmse=rmse(y, yhat),
        r2=r2v,
        predictions=np.column_stack([y, yhat]),
        serials=np.asarray(dataset.groups),
        offsets=np.asarray(dataset.offsets),
        fold=fold,
    )


# CSV output -----------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_rows(path, header, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    os.replace(tmp, path)


PREDICTION_HEADER = ["key", "split", "fold", "serial", "offset", "expected", "predicted"]


def _prediction_rows(key, reports):
    for r in reports:
        if r.predictions is None:
            continue
        for s, off, (y, p) in zip(r.serials, r.offsets, r.predictions):
            yield [key, r.split, r.fold, s, int(off), float(y), float(p)]


def write_predictions(path, sweep: SweepReport):
    rows = [row for p in sweep.points for row in _prediction_rows(p.key, p.reports)]
    _write_rows(path, PREDICTION_HEADER, rows)


def read_predictions(path):
    """Load an emitted prediction file: ``{(key, split, fold): (expected, predicted)}``."""
    acc = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = (row["key"], row["split"], int(row["fold"]) if row["fold"] else None)
            acc.setdefault(k, ([], []))
            acc[k][0].append(float(row["expected"]))
            acc[k][1].append(float(row["predicted"]))
    return {k: (np.array(a), np.array(b)) for k, (a, b) in acc.items()}


TABLE4_HEADER = ["config_id", "units", "encoder_layers", "decoder_layers", "timesteps", "status",
                 "train_rmse", "val_rmse", "test_rmse", "test_r2", "best_epoch", "stopped_epoch",
                 "message"]


def write_table4(path, sweep: SweepReport):
    rows = []
    for p in sweep.points:
        units, enc, dec = p.info["row"]
        vals = [p.report(s).rmse if p.report(s) else None for s in ("train", "val", "test")]
        test = p.report("test")
        rows.append([p.key, units, enc, dec, p.info.get("timesteps"), p.status, *vals,
                     test.r2 if test else None, p.info.get("best_epoch"),
                     p.info.get("stopped_epoch"), p.message])
    _write_rows(path, TABLE4_HEADER, rows)


FIG6_HEADER = ["timesteps", "fold", "epoch", "train_rmse", "val_rmse", "status"]
FIG6_SUMMARY_HEADER = ["timesteps", "status", "folds", "drives", "mean_val_rmse", "std_val_rmse",
                       "mean_final_train_rmse", "message"]


def write_fig6(path, sweep: SweepReport, summary_path=None):
    rows, summary = [], []
    for p in sweep.points:
        if p.status != "ok":
            rows.append([p.key, None, None, None, None, p.status])
        for fold, hist in sorted(p.histories.items()):
            for e, (tr, va) in enumerate(hist, start=1):
                rows.append([p.key, fold, e, tr, va, p.status])
        vals = [r.rmse for r in p.reports]
        finals = [h[-1][0] for h in p.histories.values() if h]
        summary.append([
            p.key, p.status, len(p.reports), p.info.get("drives"),
            float(np.mean(vals)) if vals else None,
            float(np.std(vals)) if vals else None,
            float(np.mean(finals)) if finals else None,
            p.message,
        ])
    _write_rows(path, FIG6_HEADER, rows)
    if summary_path is not None:
        _write_rows(summary_path, FIG6_SUMMARY_HEADER, summary)


TABLE5_HEADER = ["drive_model", "status", "drives", "windows", "r2", "rmse", "message"]


def write_table5(path, sweep: SweepReport):
    rows = []
    for p in sweep.points:
        r = p.report("all")
        rows.append([p.key, p.status, p.info.get("drives"), r.n if r else 0,
                     r.r2 if r else None, r.rmse if r else None, p.message])
    _write_rows(path, TABLE5_HEADER, rows)


def safe_name(model):
    """File-name-safe form of a drive model identifier."""
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in model)


# sweeps ---------------------------------------------------------------------


def _config_id(k):
    return str(k + 1)


def config_sweep(splits, configs=REFERENCE_CONFIGS, tcfg: TrainConfig | None = None, seed: int = 0,
                 drive_model: str = "", dense_widths=None, out_dir=None) -> SweepReport:
    """Train every ``(units, enc, dec)`` row on the same data and seed.

    ``splits`` is ``(train, val, test)``. A row whose training fails is kept
    with status ``failed`` and the sweep continues. With ``out_dir`` the
    results go to ``table4.csv`` and ``table4_predictions.csv``.
    """
    tcfg = tcfg or TrainConfig()
    tr, va, te = splits
    T, F = tr.X.shape[1], tr.X.shape[2]
    sweep = SweepReport("config")
    for k, row in enumerate(configs):
        point = SweepPoint(_config_id(k), info={"row": tuple(int(v) for v in row), "timesteps": T})
        sweep.points.append(point)
        try:
            kw = {} if dense_widths is None else {"dense_widths": dense_widths}
            cfg = EncoderDecoderConfig.from_row(row, F, T, **kw)
            model = EncoderDecoderModel.init(cfg, seed=seed, precision=tcfg.precision)
            model, rep = train(model, tr, va, tcfg)
            point.info.update(best_epoch=rep.best_epoch, stopped_epoch=rep.stopped_epoch)
            point.histories[0] = [(e.train_seq_rmse, e.val_rmse) for e in rep.epochs]
            for name, data in (("train", tr), ("val", va), ("test", te)):
                if len(data):
                    point.reports.append(evaluate(model, data, name, drive_model, point.key))
        except DiskrulError as exc:
            log.warning("configuration %s failed: %s", row, exc)
            point.status, point.message = "failed", f"{type(exc).__name__}: {exc}"
            point.reports.clear()
    if out_dir is not None:
        write_table4(os.path.join(out_dir, "table4.csv"), sweep)
        write_predictions(os.path.join(out_dir, "table4_predictions.csv"), sweep)
    return sweep


def window_sweep(histories, T_values=WINDOW_SIZES, k: int = 5, tcfg: TrainConfig | None = None,
                 config_row=(50, 1, 1), seed: int = 0, drive_model: str = "", stride: int = 1,
                 dense_widths=None, out_dir=None) -> SweepReport:
    """Grouped k-fold cross-validation for every window size.

    ``histories`` are labeled but unscaled; for each fold the scaler is fit
    on the training-fold drives only. A window size no drive can fill is
    reported as ``empty``. With ``out_dir`` writes ``fig6.csv`` (per-epoch
    trajectories), ``fig6_summary.csv`` and ``fig6_predictions.csv``.
    """
    tcfg = tcfg or TrainConfig()
    histories = list(histories)
    sweep = SweepReport("window")
    for T in T_values:
        point = SweepPoint(str(int(T)))
        sweep.points.append(point)
        usable = [h for h in histories if len(h.dates) >= T]
        point.info["drives"] = len(usable)
        if not usable:
            point.status, point.message = "empty", f"no drive has {T} days of history"
            continue
        try:
            folds = kfold_serials([h.serial for h in usable], k, seed)
            point.info["folds"] = [list(f) for f in folds]
            for i, fold in enumerate(folds):
                held = set(fold)
                train_h = [h for h in usable if h.serial not in held]
                scaler = fit_scaler(train_h)
                scaled = [scale_history(h, scaler) for h in usable]
                ds = make_windows(scaled, int(T), stride)
                tr = ds.subset([h.serial for h in train_h])
                va = ds.subset(fold)
                kw = {} if dense_widths is None else {"dense_widths": dense_widths}
                cfg = EncoderDecoderConfig.from_row(config_row, ds.X.shape[2], int(T), **kw)
                model = EncoderDecoderModel.init(cfg, seed=seed, precision=tcfg.precision)
                model, rep = train(model, tr, va, tcfg)
                point.histories[i] = [(e.train_seq_rmse, e.val_rmse) for e in rep.epochs]
                point.reports.append(evaluate(model, va, "val", drive_model, str(config_row), fold=i))
        except DiskrulError as exc:
            log.warning("window size %s failed: %s", T, exc)
            point.status, point.message = "failed", f"{type(exc).__name__}: {exc}"
    if out_dir is not None:
        write_fig6(os.path.join(out_dir, "fig6.csv"), sweep, os.path.join(out_dir, "fig6_summary.csv"))
        write_predictions(os.path.join(out_dir, "fig6_predictions.csv"), sweep)
    return sweep


def generalize(model: EncoderDecoderModel, scaler, features, target_models, store_root,
               years=None, serials=None, cap_rul=None, stride: int = 1, out_dir=None) -> SweepReport:
    """Apply a trained model to other drive models without refitting anything.

    Each target model is extracted from the store, preprocessed with the
    source ``features`` and ``scaler``, windowed at the model's T and scored
    on all windows. ``serials`` optionally maps a target model to the drives
    to keep. Absent models are reported as ``missing``. With ``out_dir``
    writes ``table5.csv`` and one ``predictions_<model>.csv`` per target.
    """
    digest = scaler.digest()
    T = model.config.timesteps
    sweep = SweepReport("model")
    for target in target_models:
        point = SweepPoint(target)
        sweep.points.append(point)
        try:
            seqs = extract_histories(store_root, target, years)
            if serials is not None and target in serials:
                keep = set(serials[target])
                seqs = [s for s in seqs if s and s[0].serial in keep]
            if not seqs:
                point.status, point.message = "missing", "no records in the store"
                continue
            hs, _ = prepare_histories(seqs, features, cap_rul)
            ds = make_windows([scale_history(h, scaler) for h in hs], T, stride)
            point.info["drives"] = len(ds.serials)
            if len(ds) == 0:
                point.status, point.message = "empty", f"no drive has {T} labeled days"
                continue
            point.reports.append(evaluate(model, ds, "all", target, ""))
        except DiskrulError as exc:
            log.warning("generalization to %s failed: %s", target, exc)
            point.status, point.message = "failed", f"{type(exc).__name__}: {exc}"
    if scaler.digest() != digest:  # pragma: no cover - ScalerParams is immutable
        raise DomainError("scaler parameters changed during generalization")
    sweep.points.sort(key=lambda p: p.key)
    if out_dir is not None:
        write_table5(os.path.join(out_dir, "table5.csv"), sweep)
        for p in sweep.points:
            _write_rows(
                os.path.join(out_dir, f"predictions_{safe_name(p.key)}.csv"),
                PREDICTION_HEADER,
                _prediction_rows(p.key, p.reports),
            )
    return sweep


__all__ = [
    "WINDOW_SIZES",
    "EvalReport",
    "SweepPoint",
    "SweepReport",
    "rmse",
    "r2",
    "evaluate",
    "config_sweep",
    "window_sweep",
    "generalize",
    "read_predictions",
    "safe_name",
    "write_predictions",
    "write_table4",
    "write_fig6",
    "write_table5",
]
