"""Synthetic S.M.A.R.T. fleets with known failure times.

Lifetimes are rounded lognormal draws with mean ``mean_lifetime_days`` and
standard deviation ``0.3 * mean``. Informative attributes ramp monotonically
with the days remaining to failure (linear or mildly convex) at magnitudes
between 1e3 and 1e14; the rest are stationary noise around one fleet-wide
level, so they carry no drive identity. These are testability choices, not a physical model of disks.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .ingest import DriveDayRecord
from .preprocess import DEFAULT_ATTRIBUTES

# extra attribute numbers used after the default set is exhausted
_EXTRA_ATTRIBUTES = (2, 3, 8, 10, 11, 12, 183, 184, 187, 189, 191, 195, 196, 200, 220, 222,
                     223, 224, 225, 226, 240, 250, 251, 252, 254, 255)


@dataclass(frozen=True)
class SynthSpec:
    n_drives: int = 50
    mean_lifetime_days: float = 120.0
    n_features: int = 15
    n_informative: int = 3
    noise_sigma: float = 0.05
    missing_rate: float = 0.0
    seed: int = 0
    model: str = "SYNTH0001"
    serial_prefix: str = "SYN"
    start_date: str = "2021-01-01"
    start_spread_days: int = 365
    first_drive: int = 0  # drives are numbered from here; the fleet layout depends on seed only

    def __post_init__(self):
        if self.n_drives < 0:
            raise DomainError("n_drives must be non-negative")
        if not self.mean_lifetime_days > 0:
            raise DomainError("mean_lifetime_days must be positive")
        if not 1 <= self.n_features <= len(DEFAULT_ATTRIBUTES) + len(_EXTRA_ATTRIBUTES):
            raise DomainError(f"n_features must lie in [1, {len(DEFAULT_ATTRIBUTES) + len(_EXTRA_ATTRIBUTES)}]")
        if not 0 <= self.n_informative <= self.n_features:
            raise DomainError("n_informative must lie in [0, n_features]")
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be non-negative")
        if not 0 <= self.missing_rate < 1:
            raise DomainError("missing_rate must lie in [0, 1)")
        if self.first_drive < 0:
            raise DomainError("first_drive must be non-negative")
        if self.start_spread_days < 0:
            raise DomainError("start_spread_days must be non-negative")
        dt.date.fromisoformat(self.start_date)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def attributes(spec: SynthSpec) -> tuple[int, ...]:
    pool = DEFAULT_ATTRIBUTES + _EXTRA_ATTRIBUTES
    return tuple(sorted(pool[: spec.n_features]))


def _fleet_layout(spec):
    """Fleet-wide choices: which attributes are informative and their shapes."""
    rng = np.random.default_rng([spec.seed, 0x5EED])
    attrs = attributes(spec)
    informative = sorted(rng.choice(attrs, size=spec.n_informative, replace=False).tolist())
    amp = {a: 10.0 ** rng.uniform(3, 14) for a in attrs}
    power = {a: float(rng.choice([1.0, 1.5])) for a in attrs}
    return attrs, set(informative), amp, power


def informative_attributes(spec: SynthSpec) -> tuple[int, ...]:
    return tuple(sorted(_fleet_layout(spec)[1]))


def lifetime_params(mean):
    """Lognormal (mu, sigma) for the given mean and a 0.3 coefficient of variation."""
    sigma2 = np.log1p(0.3**2)
    return np.log(mean) - sigma2 / 2.0, np.sqrt(sigma2)


def generate(spec: SynthSpec) -> list[list[DriveDayRecord]]:
    """Per-drive record sequences; the last record of each drive is its failure."""
    attrs, informative, amp, power = _fleet_layout(spec)
    mu, sigma = lifetime_params(spec.mean_lifetime_days)
    horizon = 3.0 * spec.mean_lifetime_days
    start0 = dt.date.fromisoformat(spec.start_date)
    fleet = []
    for d in range(spec.first_drive, spec.first_drive + spec.n_drives):
        rng = np.random.default_rng([spec.seed, d])
        L = max(1, int(round(rng.lognormal(mu, sigma))))
        start = start0 + dt.timedelta(days=int(rng.integers(0, spec.start_spread_days + 1)))
        rul = np.arange(L - 1, -1, -1, dtype=np.float64)
        cols = {}
        for a in attrs:
            if a in informative:
                progress = np.clip(1.0 - rul / horizon, 0.0, 1.0) ** power[a]
                offset = rng.uniform(0.0, 0.02)
                v = amp[a] * (offset + progress + spec.noise_sigma * rng.standard_normal(L))
            else:
                v = amp[a] * (0.5 + spec.noise_sigma * rng.standard_normal(L))
            v = np.round(np.maximum(v, 0.0))
            if spec.missing_rate > 0:
                v[rng.random(L) < spec.missing_rate] = np.nan
            cols[a] = v
        serial = f"{spec.serial_prefix}{d:07d}"
        seq = []
        for day in range(L):
            smart = {a: (None if np.isnan(cols[a][day]) else float(cols[a][day])) for a in attrs}
            seq.append(
                DriveDayRecord(
                    date=start + dt.timedelta(days=day),
                    serial=serial,
                    model=spec.model,
                    capacity_bytes=4_000_787_030_016,
                    failure=day == L - 1,
                    smart=smart,
                )
            )
        fleet.append(seq)
    return fleet


def _fmt(v):
    if v is None:
        return ""
    return str(int(v)) if float(v).is_integer() and abs(v) < 2**63 else repr(v)


def write_csv(fleet, path, attribute_numbers=None):
    """Write a fleet as one Backblaze-schema CSV, rows ordered by date then serial."""
    attrs = attribute_numbers
    if attrs is None:
        attrs = sorted({a for seq in fleet for rec in seq for a in rec.smart})
    header = ["date", "serial_number", "model", "capacity_bytes", "failure"]
    for a in attrs:
        header += [f"smart_{a}_normalized", f"smart_{a}_raw"]
    rows = [rec for seq in fleet for rec in seq]
    rows.sort(key=lambda r: (r.date, r.serial))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            line = [r.date.isoformat(), r.serial, r.model,
                    "" if r.capacity_bytes is None else r.capacity_bytes, int(r.failure)]
            for a in attrs:
                line += ["", _fmt(r.smart.get(a))]
            w.writerow(line)
    return len(rows)
