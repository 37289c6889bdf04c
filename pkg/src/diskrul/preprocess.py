"""Per-drive cleaning: feature matrices, gap filling, RUL labels, scaling."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, SchemaError

# Attributes associated with drive degradation (raw read errors, reallocated
# and pending sectors, power-on hours, temperatures, LBAs written/read, ...).
DEFAULT_ATTRIBUTES = (1, 4, 5, 7, 9, 188, 190, 192, 193, 194, 197, 198, 199, 241, 242)

SCALE_LO = 0.0
SCALE_HI = 255.0


@dataclass(frozen=True)
class FeatureSet:
    attribute_numbers: tuple[int, ...]

    def __post_init__(self):
        attrs = tuple(int(a) for a in self.attribute_numbers)
        if not attrs:
            raise DomainError("feature set is empty")
        if len(set(attrs)) != len(attrs):
            raise DomainError(f"duplicate attributes in feature set {attrs}")
        object.__setattr__(self, "attribute_numbers", attrs)

    def __len__(self):
        return len(self.attribute_numbers)

    def __iter__(self):
        return iter(self.attribute_numbers)

    @classmethod
    def default(cls):
        return cls(DEFAULT_ATTRIBUTES)

    def to_json(self):
        return json.dumps({"attribute_numbers": list(self.attribute_numbers)})

    @classmethod
    def from_json(cls, text):
        return cls(tuple(json.loads(text)["attribute_numbers"]))


@dataclass(frozen=True)
class DriveHistory:
    serial: str
    model: str
    dates: np.ndarray  # datetime64[D], strictly increasing, one per calendar day
    X: np.ndarray  # (days, features) float64
    failed: bool
    rul: np.ndarray | None = None
    features: tuple[int, ...] = ()
    missing_features: tuple[int, ...] = ()  # attributes absent for the whole history

    def __len__(self):
        return len(self.dates)


def _as_feature_set(features) -> FeatureSet:
    if isinstance(features, FeatureSet):
        return features
    return FeatureSet(tuple(features))


def fill_gaps(col: np.ndarray) -> np.ndarray | None:
    """Linear interpolation of NaNs between present neighbours.

    Leading and trailing NaNs take the nearest present value. Returns
    ``None`` when the column has no present value at all.
    """
    present = ~np.isnan(col)
    if not present.any():
        return None
    if present.all():
        return col.copy()
    idx = np.arange(len(col), dtype=np.float64)
    return np.interp(idx, idx[present], col[present])


def build_history(records, features) -> DriveHistory:
    """Assemble a gap-free daily feature matrix for one drive.

    ``records`` must be non-empty and date-sorted. Missing calendar days are
    inserted as rows and every feature is filled by :func:`fill_gaps`;
    features never observed are set to 0 and listed in ``missing_features``.
    """
    fs = _as_feature_set(features)
    if not records:
        raise DomainError("cannot build a history from zero records")
    first = np.datetime64(records[0].date, "D")
    offsets = np.array(
        [(np.datetime64(r.date, "D") - first).astype(int) for r in records], dtype=np.int64
    )
    if np.any(np.diff(offsets) <= 0):
        raise DomainError(f"records for {records[0].serial} are not strictly date-sorted")
    n_days = int(offsets[-1]) + 1
    X = np.full((n_days, len(fs)), np.nan)
    for row, rec in zip(offsets, records):
        for j, attr in enumerate(fs):
            v = rec.smart.get(attr)
            if v is not None:
                X[row, j] = v
    missing = []
    for j, attr in enumerate(fs):
        filled = fill_gaps(X[:, j])
        if filled is None:
            X[:, j] = 0.0
            missing.append(attr)
        else:
            X[:, j] = filled
    dates = first + np.arange(n_days)
    return DriveHistory(
        serial=records[0].serial,
        model=records[0].model,
        dates=dates,
        X=X,
        failed=bool(records[-1].failure),
        features=fs.attribute_numbers,
        missing_features=tuple(missing),
    )


def label_rul(history: DriveHistory, cap: float | None = None) -> DriveHistory:
    """Attach remaining-useful-life labels in days.

    Failed drives get ``rul[i] = failure_date - dates[i]``. Healthy drives
    are rejected unless ``cap`` is given, in which case every day is labelled
    with ``cap`` (censored: the drive outlived its observation window); with
    a cap, failed-drive labels are clipped at ``cap`` as well.
    """
    if history.failed:
        rul = (history.dates[-1] - history.dates).astype(np.int64).astype(np.float64)
        if cap is not None:
            rul = np.minimum(rul, float(cap))
    elif cap is not None:
        if cap <= 0:
            raise DomainError("RUL cap must be positive")
        rul = np.full(len(history.dates), float(cap))
    else:
        raise DomainError(f"unlabeled drive {history.serial}: no observed failure")
    return dataclasses.replace(history, rul=rul)


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature min/max fitted on training data; maps onto [0, 255]."""

    features: tuple[int, ...]
    mins: np.ndarray
    maxs: np.ndarray
    lo: float = SCALE_LO
    hi: float = SCALE_HI

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64)
        maxs = np.array(self.maxs, dtype=np.float64)
        if mins.shape != (len(self.features),) or maxs.shape != mins.shape:
            raise DomainError("scaler parameter shapes do not match the feature list")
        if np.any(maxs < mins):
            raise DomainError("scaler max below min")
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "features", tuple(int(f) for f in self.features))
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    def to_dict(self):
        return {
            "lo": self.lo,
            "hi": self.hi,
            "features": [
                {"attribute": a, "min": float(lo), "max": float(hi)}
                for a, lo, hi in zip(self.features, self.mins, self.maxs)
            ],
        }

    def to_json(self) -> str:
        # json emits repr() floats, which round-trip exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        try:
            d = json.loads(text)
            feats = d["features"]
            return cls(
                features=tuple(f["attribute"] for f in feats),
                mins=np.array([f["min"] for f in feats], dtype=np.float64),
                maxs=np.array([f["max"] for f in feats], dtype=np.float64),
                lo=float(d.get("lo", SCALE_LO)),
                hi=float(d.get("hi", SCALE_HI)),
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise SchemaError(f"bad scaler file: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.features).encode())
        h.update(self.mins.astype("<f8").tobytes())
        h.update(self.maxs.astype("<f8").tobytes())
        return h.hexdigest()


def fit_scaler(train_histories: Sequence[DriveHistory], features=None) -> ScalerParams:
    if not train_histories:
        raise DomainError("cannot fit a scaler on an empty training set")
    feats = train_histories[0].features if features is None else _as_feature_set(features).attribute_numbers
    for h in train_histories:
        if tuple(h.features) != tuple(feats):
            raise DomainError(f"history {h.serial} has features {h.features}, expected {feats}")
    mins = np.min([h.X.min(axis=0) for h in train_histories], axis=0)
    maxs = np.max([h.X.max(axis=0) for h in train_histories], axis=0)
    return ScalerParams(tuple(feats), mins, maxs)


def _check_columns(X, params):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(params.features):
        raise DomainError(f"matrix has {X.shape[-1]} columns, scaler expects {len(params.features)}")
    return X


def apply_scaler(X, params: ScalerParams) -> np.ndarray:
    """Affine map of each column onto [lo, hi]; no clamping outside the fit range."""
    X = _check_columns(X, params)
    span = params.maxs - params.mins
    const = span == 0
    safe = np.where(const, 1.0, span)
    # divide first so x = max lands exactly on hi
    out = params.lo + (params.hi - params.lo) * ((X - params.mins) / safe)
    return np.where(const, params.lo, out)


def inverse_scaler(Xs, params: ScalerParams) -> np.ndarray:
    Xs = _check_columns(Xs, params)
    span = params.maxs - params.mins
    out = params.mins + (Xs - params.lo) * span / (params.hi - params.lo)
    return np.where(span == 0, params.mins, out)


def scale_history(history: DriveHistory, params: ScalerParams) -> DriveHistory:
    if tuple(history.features) != params.features:
        raise DomainError(f"history features {history.features} differ from scaler {params.features}")
    return dataclasses.replace(history, X=apply_scaler(history.X, params))


def prepare_histories(sequences, features, cap_rul=None):
    """Build and label histories, skipping healthy drives unless ``cap_rul`` is set.

    Returns ``(histories, skipped_serials)``.
    """
    fs = _as_feature_set(features)
    out, skipped = [], []
    for seq in sequences:
        h = build_history(seq, fs)
        if not h.failed and cap_rul is None:
            skipped.append(h.serial)
            continue
        out.append(label_rul(h, cap=cap_rul))
    return out, skipped
