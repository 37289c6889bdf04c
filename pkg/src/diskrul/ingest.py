"""Backblaze CSV ingestion into a partitioned on-disk store.

Store layout::

    <root>/manifest.json
    <root>/<model>/<year>.csv

Each partition file is a plain CSV with the columns ``date, serial_number,
model, capacity_bytes, failure`` followed by ``smart_N_normalized`` /
``smart_N_raw`` pairs in ascending attribute order. Raw tokens are copied
verbatim from the source so extraction is lossless. Duplicate
``(serial, date)`` rows are resolved at read time (last occurrence wins).
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
import os
import re
import threading
import warnings
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote, unquote

from .errors import DomainError, SchemaError, StoreIOError

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("date", "serial_number", "model", "failure")
BASE_COLUMNS = ("date", "serial_number", "model", "capacity_bytes", "failure")
MIN_YEAR, MAX_YEAR = 2013, 2099
MANIFEST = "manifest.json"
MANIFEST_VERSION = 1

_SMART_RE = re.compile(r"^smart_(\d+)_(raw|normalized)$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


@dataclass(frozen=True)
class DriveDayRecord:
    date: dt.date
    serial: str
    model: str
    capacity_bytes: int | None
    failure: bool
    smart: dict[int, float | None] = field(default_factory=dict)


@dataclass(frozen=True, order=True)
class PartitionKey:
    model: str
    year: int

    def __post_init__(self):
        if not MIN_YEAR <= self.year <= MAX_YEAR:
            raise DomainError(f"partition year {self.year} outside [{MIN_YEAR}, {MAX_YEAR}]")


@dataclass
class IngestSummary:
    records_read: int = 0
    records_kept: int = 0
    partitions_written: int = 0
    rows_skipped: int = 0
    files_skipped: list[str] = field(default_factory=list)

    def as_dict(self):
        return {
            "records_read": self.records_read,
            "records_kept": self.records_kept,
            "partitions_written": self.partitions_written,
            "rows_skipped": self.rows_skipped,
            "files_skipped": list(self.files_skipped),
        }


@dataclass(frozen=True)
class FailureCensus:
    entries: tuple[tuple[str, int], ...]

    def as_dict(self):
        return dict(self.entries)


def parse_date(token: str) -> dt.date:
    """Strict ``YYYY-MM-DD`` parsing; anything else raises ``ValueError``."""
    token = token.strip()
    if not _DATE_RE.match(token):
        raise ValueError(f"bad date {token!r}")
    return dt.date.fromisoformat(token)


def _parse_failure(token: str) -> bool:
    token = token.strip()
    if token in ("0", "0.0"):
        return False
    if token in ("1", "1.0"):
        return True
    raise ValueError(f"bad failure flag {token!r}")


def _check_number(token: str) -> str:
    token = token.strip()
    if token:
        value = float(token)
        if math.isnan(value):
            return ""
    return token


def _smart_columns(header):
    cols = {}
    for name in header:
        m = _SMART_RE.match(name.strip())
        if m:
            cols[(int(m.group(1)), m.group(2))] = name
    return cols


def _partition_header(smart_ids):
    cols = list(BASE_COLUMNS)
    for n in sorted(smart_ids):
        cols += [f"smart_{n}_normalized", f"smart_{n}_raw"]
    return cols


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class PartitionedStore:
    """File-based store keyed by (drive model, year)."""

    def __init__(self, root):
        self.root = Path(root)
        self._locks: dict[PartitionKey, threading.Lock] = defaultdict(threading.Lock)
        self._manifest_lock = threading.Lock()

    # layout -----------------------------------------------------------------
    def model_dir(self, model: str) -> Path:
        return self.root / quote(model, safe=" ._-")

    def partition_path(self, key: PartitionKey) -> Path:
        return self.model_dir(key.model) / f"{key.year}.csv"

    def partitions(self, model: str | None = None) -> list[PartitionKey]:
        if not self.root.is_dir():
            return []
        keys = []
        for d in sorted(p for p in self.root.iterdir() if p.is_dir()):
            name = unquote(d.name)
            if model is not None and name != model:
                continue
            for f in sorted(d.glob("*.csv")):
                if f.stem.isdigit():
                    keys.append(PartitionKey(name, int(f.stem)))
        return sorted(keys)

    def models(self) -> list[str]:
        return sorted({k.model for k in self.partitions()})

    # manifest ---------------------------------------------------------------
    def load_manifest(self) -> dict:
        path = self.root / MANIFEST
        if not path.exists():
            return {"version": MANIFEST_VERSION, "files": {}, "partitions": {}}
        try:
            with open(path) as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreIOError(f"cannot read manifest {path}: {exc}") from exc

    def save_manifest(self, manifest: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / MANIFEST
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)

    # partition io -----------------------------------------------------------
    def _read_rows(self, key: PartitionKey):
        path = self.partition_path(key)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            return list(reader.fieldnames or []), list(reader)

    def _lock(self, key):
        with self._manifest_lock:
            return self._locks[key]

    def _read_header(self, key: PartitionKey) -> list[str]:
        with open(self.partition_path(key), newline="") as fh:
            return next(csv.reader(fh), [])

    def append(self, key: PartitionKey, rows: list[dict], smart_ids: set[int]) -> int:
        """Append ``rows`` (dicts keyed by partition column names) to a partition.

        The file is rewritten with a widened header when new S.M.A.R.T.
        attributes appear; otherwise rows are appended in place. Returns the
        number of rows added.
        """
        path = self.partition_path(key)
        added = len(rows)
        with self._lock(key):
            path.parent.mkdir(parents=True, exist_ok=True)
            if path.exists():
                header = self._read_header(key)
                known = {int(m.group(1)) for m in map(_SMART_RE.match, header) if m}
                if smart_ids <= known:
                    with open(path, "a", newline="") as fh:
                        w = csv.DictWriter(fh, fieldnames=header, restval="")
                        w.writerows(rows)
                    return added
                _, existing = self._read_rows(key)
                header = _partition_header(known | smart_ids)
                rows = existing + rows
            else:
                header = _partition_header(smart_ids)
            tmp = path.with_suffix(".csv.tmp")
            with open(tmp, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=header, restval="")
                w.writeheader()
                w.writerows(rows)
            os.replace(tmp, path)
            return added

    def read_records(self, key: PartitionKey) -> list[DriveDayRecord]:
        header, rows = self._read_rows(key)
        raw_cols = [
            (int(m.group(1)), name)
            for name in header
            if (m := _SMART_RE.match(name)) and m.group(2) == "raw"
        ]
        out = []
        for row in rows:
            cap = row.get("capacity_bytes", "")
            smart = {}
            for n, name in raw_cols:
                tok = row.get(name, "")
                smart[n] = float(tok) if tok else None
            out.append(
                DriveDayRecord(
                    date=parse_date(row["date"]),
                    serial=row["serial_number"],
                    model=row["model"],
                    capacity_bytes=int(float(cap)) if cap else None,
                    failure=row["failure"] == "1",
                    smart=smart,
                )
            )
        return out


def _parse_file(path, model_filter, summary):
    """Parse one source CSV into ``{PartitionKey: (rows, smart_ids)}``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc}") from exc
    grouped: dict[PartitionKey, list[dict]] = defaultdict(list)
    ids: dict[PartitionKey, set[int]] = defaultdict(set)
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, missing header")
        except (csv.Error, UnicodeDecodeError) as exc:
            raise SchemaError(f"{path}: unreadable header: {exc}") from exc
        header = [h.strip() for h in header]
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
        idx = {name: i for i, name in enumerate(header)}
        smart_cols = _smart_columns(header)
        file_ids = {n for n, _ in smart_cols}
        cap_i = idx.get("capacity_bytes")
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error:
                summary.records_read += 1
                summary.rows_skipped += 1
                continue
            if not row:
                continue
            summary.records_read += 1
            if len(row) != len(header):
                summary.rows_skipped += 1
                continue
            model = row[idx["model"]].strip()
            if model_filter is not None and model != model_filter:
                continue
            try:
                date = parse_date(row[idx["date"]])
                key = PartitionKey(model, date.year)
                failure = _parse_failure(row[idx["failure"]])
                serial = row[idx["serial_number"]].strip()
                if not serial or not model:
                    raise ValueError("empty identifier")
                rec = {
                    "date": date.isoformat(),
                    "serial_number": serial,
                    "model": model,
                    "failure": "1" if failure else "0",
                    "capacity_bytes": "",
                }
                if cap_i is not None:
                    cap = row[cap_i].strip()
                    if cap:
                        if int(float(cap)) < 0:
                            raise ValueError("negative capacity")
                        rec["capacity_bytes"] = cap
                for (n, kind), name in smart_cols.items():
                    rec[f"smart_{n}_{kind}"] = _check_number(row[idx[name]])
            except (ValueError, DomainError):
                summary.rows_skipped += 1
                continue
            grouped[key].append(rec)
            ids[key] |= file_ids
    return {k: (grouped[k], ids[k]) for k in grouped}


def ingest_csv(root, paths, model_filter=None, workers=1) -> IngestSummary:
    """Ingest Backblaze daily CSV files into the store at ``root``.

    Files already ingested under the same ``model_filter`` (matched by
    content hash) are skipped. Malformed rows are counted and skipped; a
    missing required column aborts with :class:`SchemaError`.
    """
    store = PartitionedStore(root)
    manifest = store.load_manifest()
    summary = IngestSummary()
    pending: dict[PartitionKey, tuple[list[dict], set[int]]] = {}
    fresh = []
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise StoreIOError(f"cannot read {path}: no such file")
        digest = file_digest(path)
        tag = f"{digest}:{model_filter or '*'}"
        if tag in manifest["files"]:
            log.info("skipping already ingested %s", path)
            summary.files_skipped.append(str(path))
            continue
        before = summary.records_read, summary.rows_skipped
        parsed = _parse_file(path, model_filter, summary)
        kept = 0
        for key, (rows, ids) in parsed.items():
            acc_rows, acc_ids = pending.setdefault(key, ([], set()))
            acc_rows.extend(rows)
            acc_ids |= ids
            kept += len(rows)
        summary.records_kept += kept
        fresh.append(
            (
                tag,
                {
                    "path": str(path),
                    "model_filter": model_filter,
                    "rows_read": summary.records_read - before[0],
                    "rows_skipped": summary.rows_skipped - before[1],
                    "rows_kept": kept,
                },
            )
        )

    def write(item):
        key, (rows, ids) = item
        return key, store.append(key, rows, ids)

    items = sorted(pending.items())
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(write, items))
    else:
        results = [write(it) for it in items]
    for key, n_added in results:
        entry = manifest["partitions"].setdefault(
            f"{quote(key.model, safe=' ._-')}/{key.year}", {"rows": 0}
        )
        entry["rows"] += n_added
    for tag, entry in fresh:
        manifest["files"][tag] = entry
    summary.partitions_written = len(results)
    if fresh:
        store.save_manifest(manifest)
    return summary


def failure_census(root, models=None) -> FailureCensus:
    """Count distinct failed serials per drive model, sorted by count (desc)."""
    store = PartitionedStore(root)
    wanted = store.models() if models is None else list(models)
    counts = []
    for model in wanted:
        failed = set()
        for key in store.partitions(model):
            header, rows = store._read_rows(key)
            failed.update(r["serial_number"] for r in rows if r["failure"] == "1")
        counts.append((model, len(failed)))
    counts.sort(key=lambda e: (-e[1], e[0]))
    return FailureCensus(tuple(counts))


def extract_histories(root, model, years=None) -> list[list[DriveDayRecord]]:
    """Per-drive record sequences for ``model`` within inclusive ``years``.

    Each sequence is strictly increasing in date; duplicate days keep the
    last stored row and anything after a drive's first failure is dropped.
    Emits a ``UserWarning`` and returns ``[]`` when nothing matches.
    """
    store = PartitionedStore(root)
    lo, hi = (MIN_YEAR, MAX_YEAR) if years is None else years
    if lo > hi:
        raise DomainError(f"empty year range {lo}..{hi}")
    keys = [k for k in store.partitions(model) if lo <= k.year <= hi]
    if not keys:
        warnings.warn(f"no partitions for {model!r} in {lo}..{hi}", stacklevel=2)
        return []
    by_serial: dict[str, dict[dt.date, DriveDayRecord]] = defaultdict(dict)
    for key in keys:
        for rec in store.read_records(key):
            by_serial[rec.serial][rec.date] = rec
    out = []
    for serial in sorted(by_serial):
        days = by_serial[serial]
        seq = []
        for d in sorted(days):
            rec = days[d]
            seq.append(rec)
            if rec.failure:
                break
        out.append(seq)
    return out
