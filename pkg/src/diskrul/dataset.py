"""Sliding-window tensors and drive-grouped splits."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, SchemaError
from .preprocess import fit_scaler, scale_history

WINDOWS_MAGIC = b"DRULWIN\x00"
WINDOWS_VERSION = 1
SPLIT_NAMES = ("train", "val", "test")


@dataclass
class WindowedDataset:
    X: np.ndarray  # (samples, T, features)
    Y: np.ndarray  # (samples, T) RUL of the day at X[s, t] (+ horizon)
    groups: np.ndarray  # (samples,) drive serial per sample
    timesteps: int
    offsets: np.ndarray = None  # window start day within its drive
    features: tuple[int, ...] = ()
    skipped: list[str] = field(default_factory=list)
    horizon: int = 0

    def __post_init__(self):
        if self.offsets is None:
            self.offsets = np.zeros(len(self.groups), dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=object)

    def __len__(self):
        return self.X.shape[0]

    @property
    def serials(self) -> list[str]:
        return sorted(set(self.groups.tolist()))

    def subset(self, serials) -> "WindowedDataset":
        keep = np.isin(self.groups, list(serials))
        return WindowedDataset(
            X=self.X[keep],
            Y=self.Y[keep],
            groups=self.groups[keep],
            timesteps=self.timesteps,
            offsets=self.offsets[keep],
            features=self.features,
            horizon=self.horizon,
        )


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.70
    val: float = 0.15
    test: float = 0.15
    k_folds: int | None = None
    seed: int = 0

    def __post_init__(self):
        fr = (self.train, self.val, self.test)
        if any(f <= 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise DomainError(f"split fractions must be positive and sum to 1, got {fr}")
        if self.k_folds is not None and self.k_folds < 2:
            raise DomainError("k_folds must be at least 2")


def make_windows(histories, T: int, stride: int = 1, horizon: int = 0) -> WindowedDataset:
    """Cut every drive history into consecutive-day windows of length ``T``.

    Targets align with the window's own days, shifted ``horizon`` days ahead
    when ``horizon > 0``. Drives shorter than ``T + horizon`` are listed in
    ``skipped``. Output is ordered by serial, then start offset.
    """
    if T <= 0:
        raise DomainError(f"window size must be positive, got {T}")
    if stride <= 0:
        raise DomainError(f"stride must be positive, got {stride}")
    if horizon < 0:
        raise DomainError("horizon must be non-negative")
    xs, ys, gs, offs, skipped = [], [], [], [], []
    features = ()
    n_feat = None
    for h in sorted(histories, key=lambda h: h.serial):
        if h.rul is None:
            raise DomainError(f"history {h.serial} has no RUL labels")
        features = tuple(h.features)
        n_feat = h.X.shape[1]
        L = len(h.dates) - horizon
        if L < T:
            skipped.append(h.serial)
            continue
        starts = np.arange(0, L - T + 1, stride)
        # sliding_window_view puts the window axis last
        xw = sliding_window_view(h.X[:L], T, axis=0)[starts].transpose(0, 2, 1)
        yw = sliding_window_view(h.rul[horizon:], T)[starts]
        xs.append(xw)
        ys.append(yw)
        gs.extend([h.serial] * len(starts))
        offs.append(starts)
    if xs:
        X = np.ascontiguousarray(np.concatenate(xs))
        Y = np.ascontiguousarray(np.concatenate(ys))
        offsets = np.concatenate(offs).astype(np.int64)
    else:
        X = np.zeros((0, T, n_feat or 0))
        Y = np.zeros((0, T))
        offsets = np.zeros(0, dtype=np.int64)
    return WindowedDataset(X, Y, np.array(gs, dtype=object), T, offsets, features, skipped, horizon)


def _shuffled_serials(serials, seed):
    serials = sorted(serials)
    perm = np.random.default_rng(seed).permutation(len(serials))
    return [serials[i] for i in perm]


def split_serials(serials, spec: SplitSpec):
    """Partition drive serials into (train, val, test) lists.

    Validation gets ``floor(val * n)`` drives, train ``floor(train * n)`` and
    test the remainder; val and test are topped up to one drive each from
    train when the floors come out empty.
    """
    serials = list(serials)
    n = len(serials)
    if n < 3:
        raise DomainError(f"need at least 3 drives to split, got {n}")
    order = _shuffled_serials(serials, spec.seed)
    n_train = math.floor(spec.train * n + 1e-9)
    n_val = math.floor(spec.val * n + 1e-9)
    n_val = max(n_val, 1)
    if n - n_train - n_val < 1:
        n_train = n - n_val - 1
    if n_train < 1:
        raise DomainError(f"cannot give every split a drive with {n} drives")
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def split_by_drive(dataset: WindowedDataset, spec: SplitSpec):
    train, val, test = split_serials(dataset.serials, spec)
    return dataset.subset(train), dataset.subset(val), dataset.subset(test)


def kfold_serials(serials, k: int, seed: int):
    serials = list(serials)
    if k < 2:
        raise DomainError("k must be at least 2")
    if len(serials) < k:
        raise DomainError(f"{len(serials)} drives cannot fill {k} folds")
    order = _shuffled_serials(serials, seed)
    bounds = np.linspace(0, len(order), k + 1)
    sizes = np.diff(np.floor(bounds + 1e-9).astype(int))
    folds, start = [], 0
    for s in sizes:
        folds.append(order[start : start + s])
        start += s
    return folds


def kfold_by_drive(dataset: WindowedDataset, k: int, seed: int):
    folds = kfold_serials(dataset.serials, k, seed)
    out = []
    for i, fold in enumerate(folds):
        rest = [s for j, f in enumerate(folds) if j != i for s in f]
        out.append((dataset.subset(rest), dataset.subset(fold)))
    return out


def build_splits(histories, T: int, spec: SplitSpec, stride: int = 1, horizon: int = 0):
    """Split drives, fit the scaler on the training drives only, then window.

    Only drives long enough for one window take part in the split. Returns
    ``(dataset, split_labels, scaler)`` where ``split_labels`` holds 0/1/2
    (train/val/test) per sample.
    """
    usable = [h for h in histories if len(h.dates) - horizon >= T]
    short = sorted(h.serial for h in histories if len(h.dates) - horizon < T)
    train, val, test = split_serials([h.serial for h in usable], spec)
    train_set = set(train)
    scaler = fit_scaler([h for h in usable if h.serial in train_set])
    ds = make_windows([scale_history(h, scaler) for h in usable], T, stride, horizon)
    ds.skipped = short
    code = {s: k for k, part in enumerate((train, val, test)) for s in part}
    labels = np.array([code[g] for g in ds.groups], dtype=np.int8)
    return ds, labels, scaler


# windows.bin ---------------------------------------------------------------
#
# magic (8 bytes) | version u32 LE | header length u32 LE | JSON header |
# X float64 LE row-major | Y float64 LE | offsets int64 LE | group index int32 LE |
# split label int8 (optional)


def save_windows(path, dataset: WindowedDataset, split_labels=None):
    serials = dataset.serials
    index = {s: i for i, s in enumerate(serials)}
    header = {
        "timesteps": dataset.timesteps,
        "features": list(dataset.features),
        "samples": int(len(dataset)),
        "n_features": int(dataset.X.shape[2]),
        "horizon": dataset.horizon,
        "serials": serials,
        "skipped": list(dataset.skipped),
        "dtype": "<f8",
        "has_splits": split_labels is not None,
        "split_names": list(SPLIT_NAMES),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(WINDOWS_MAGIC)
        fh.write(struct.pack("<II", WINDOWS_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(dataset.X, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.Y, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.offsets, dtype="<i8").tobytes())
        fh.write(np.array([index[g] for g in dataset.groups], dtype="<i4").tobytes())
        if split_labels is not None:
            fh.write(np.asarray(split_labels, dtype="<i1").tobytes())


def load_windows(path):
    """Read a ``windows.bin`` file; returns ``(dataset, split_labels or None)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != WINDOWS_MAGIC:
        raise SchemaError(f"{path}: not a windows file")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != WINDOWS_VERSION:
        raise SchemaError(f"{path}: unsupported windows version {version}")
    pos = 16
    header = json.loads(data[pos : pos + hlen])
    pos += hlen
    S, T, F = header["samples"], header["timesteps"], header["n_features"]

    def take(dtype, count):
        nonlocal pos
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).copy()
        pos += arr.nbytes
        return arr

    X = take("<f8", S * T * F).reshape(S, T, F).astype(np.float64)
    Y = take("<f8", S * T).reshape(S, T).astype(np.float64)
    offsets = take("<i8", S).astype(np.int64)
    gidx = take("<i4", S)
    labels = take("<i1", S).astype(np.int64) if header["has_splits"] else None
    serials = np.array(header["serials"], dtype=object)
    ds = WindowedDataset(
        X, Y, serials[gidx] if S else np.array([], dtype=object), T, offsets,
        tuple(header["features"]), list(header["skipped"]), header.get("horizon", 0),
    )
    return ds, labels


def split_from_labels(dataset: WindowedDataset, labels):
    """Inverse of storing split labels: returns (train, val, test)."""
    out = []
    for code in range(len(SPLIT_NAMES)):
        keep = labels == code
        out.append(
            WindowedDataset(
                dataset.X[keep], dataset.Y[keep], dataset.groups[keep], dataset.timesteps,
                dataset.offsets[keep], dataset.features, horizon=dataset.horizon,
            )
        )
    return tuple(out)
