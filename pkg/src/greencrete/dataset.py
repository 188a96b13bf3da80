"""Concrete mix dataset: CSV ingestion, impact labelling, normalization, splits.

The raw input is the open concrete compressive-strength table (9 numeric
columns: seven constituent amounts in kg/m3, curing age in days, measured
strength in MPa).  Environmental impact labels (GWP, AP, CBW) are computed
from a user-supplied linear factor table rather than fetched from any
external service, so labels are explicit and auditable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

#: Canonical constituent names, in column order.  This order also fixes the
#: summation order used when computing impact labels.
CONSTITUENTS = (
    "cement",
    "blast_furnace_slag",
    "fly_ash",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
)

#: All normalized columns: constituents, then age, strength and the three impacts.
COLUMNS = CONSTITUENTS + ("age", "strength", "gwp", "ap", "cbw")

IMPACT_NAMES = ("gwp", "ap", "cbw")


class DataError(ValueError):
    """Invalid input data (malformed CSV, bad factor table, bad values)."""


class AgeBucket(Enum):
    """Curing-age groups used throughout the pipeline."""

    LE3 = 3
    D7 = 7
    D14 = 14
    D28 = 28
    D56 = 56
    GE90 = 90

    @property
    def center_days(self) -> int:
        return self.value


BUCKETS = tuple(AgeBucket)


def bucket_age(age_days: int) -> AgeBucket:
    """Map a curing age in days to its age bucket.

    Ages <= 3 map to LE3 and ages >= 90 to GE90; anything else goes to the
    nearest bucket center, ties resolved toward the smaller center.
    """
    if age_days < 1:
        raise DataError(f"age_days must be >= 1, got {age_days}")
    # Lexicographic min gives ties to the smaller center because bucket
    # centers are ascending.
    return min(BUCKETS, key=lambda b: (abs(age_days - b.center_days), b.center_days))


@dataclass(frozen=True)
class Formula:
    """Constituent amounts of one concrete mix, kg per m3."""

    cement: float
    blast_furnace_slag: float
    fly_ash: float
    water: float
    superplasticizer: float
    coarse_aggregate: float
    fine_aggregate: float

    def __post_init__(self) -> None:
        for name in CONSTITUENTS:
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise DataError(f"{name} is not finite: {v}")
            if v < 0:
                raise DataError(f"{name} must be >= 0, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in CONSTITUENTS], dtype=float)

    @classmethod
    def from_array(cls, amounts) -> "Formula":
        values = [float(v) for v in amounts]
        if len(values) != len(CONSTITUENTS):
            raise DataError(f"expected {len(CONSTITUENTS)} amounts, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class RawRecord:
    """One source row: mix, curing age and measured strength."""

    formula: Formula
    age_days: int
    strength_mpa: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "age_days", int(self.age_days))
        object.__setattr__(self, "strength_mpa", float(self.strength_mpa))
        if self.age_days < 1:
            raise DataError(f"age_days must be >= 1, got {self.age_days}")
        if not math.isfinite(self.strength_mpa) or self.strength_mpa <= 0:
            raise DataError(f"strength_mpa must be > 0, got {self.strength_mpa}")


@dataclass(frozen=True)
class ImpactVector:
    """Environmental impacts per m3 of concrete.

    gwp: kg CO2-eq, ap: kg SO2-eq, cbw: m3 of batching water.  ``clamped``
    marks predictor outputs that were raised to zero.
    """

    gwp: float
    ap: float
    cbw: float
    clamped: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        for name in IMPACT_NAMES:
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise DataError(f"{name} is not finite: {v}")
            if v < 0:
                raise DataError(f"{name} must be >= 0, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.gwp, self.ap, self.cbw], dtype=float)


@dataclass(frozen=True)
class FactorTable:
    """Per-kg impact factors for each constituent plus a fixed per-m3 overhead.

    Factors are (gwp, ap, cbw) triples.  The overhead models constant
    batching-plant impacts, making the label function affine in the mix.
    """

    constituents: dict[str, tuple[float, float, float]]
    overhead: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if set(self.constituents) != set(CONSTITUENTS):
            missing = set(CONSTITUENTS) - set(self.constituents)
            extra = set(self.constituents) - set(CONSTITUENTS)
            raise DataError(
                f"factor table must name exactly the 7 constituents"
                f" (missing {sorted(missing)}, unknown {sorted(extra)})"
            )
        for name, triple in list(self.constituents.items()) + [("overhead", self.overhead)]:
            if len(triple) != 3:
                raise DataError(f"{name}: expected 3 factors, got {len(triple)}")
            for v in triple:
                if not math.isfinite(v) or v < 0:
                    raise DataError(f"{name}: factors must be finite and >= 0, got {v}")

    @classmethod
    def from_json(cls, text: str) -> "FactorTable":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"factor table is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError("factor table must be a JSON object")
        unknown = set(doc) - {"constituents", "overhead"}
        if unknown:
            raise DataError(f"unknown keys in factor table: {sorted(unknown)}")
        if "constituents" not in doc:
            raise DataError("factor table is missing 'constituents'")
        constituents = {}
        for name, triple in doc["constituents"].items():
            unknown = set(triple) - set(IMPACT_NAMES)
            if unknown:
                raise DataError(f"{name}: unknown factor keys {sorted(unknown)}")
            try:
                constituents[name] = tuple(float(triple[k]) for k in IMPACT_NAMES)
            except KeyError as exc:
                raise DataError(f"{name}: missing factor {exc}") from exc
        overhead = (0.0, 0.0, 0.0)
        if "overhead" in doc:
            triple = doc["overhead"]
            unknown = set(triple) - set(IMPACT_NAMES)
            if unknown:
                raise DataError(f"overhead: unknown factor keys {sorted(unknown)}")
            overhead = tuple(float(triple.get(k, 0.0)) for k in IMPACT_NAMES)
        return cls(constituents=constituents, overhead=overhead)

    @classmethod
    def load(cls, path: str | Path) -> "FactorTable":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def to_json(self) -> str:
        doc = {
            "constituents": {
                name: dict(zip(IMPACT_NAMES, self.constituents[name]))
                for name in CONSTITUENTS
            },
            "overhead": dict(zip(IMPACT_NAMES, self.overhead)),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def compute_impacts(formula: Formula, factors: FactorTable) -> ImpactVector:
    """Impact labels as a fixed-order dot product plus the constant overhead."""
    totals = list(factors.overhead)
    # Plain sequential loop in declaration order: the summation order is part
    # of the reproducibility contract.
    for name in CONSTITUENTS:
        amount = getattr(formula, name)
        triple = factors.constituents[name]
        for i in range(3):
            totals[i] += amount * triple[i]
    return ImpactVector(*totals)


@dataclass(frozen=True)
class LabeledRecord:
    """A raw record joined with its computed impacts and age bucket."""

    raw: RawRecord
    impacts: ImpactVector
    bucket: AgeBucket

    def column_value(self, column: str) -> float:
        if column in CONSTITUENTS:
            return getattr(self.raw.formula, column)
        if column == "age":
            return float(self.raw.age_days)
        if column == "strength":
            return self.raw.strength_mpa
        if column in IMPACT_NAMES:
            return getattr(self.impacts, column)
        raise KeyError(column)


def label_records(records: list[RawRecord], factors: FactorTable) -> list[LabeledRecord]:
    return [
        LabeledRecord(
            raw=r,
            impacts=compute_impacts(r.formula, factors),
            bucket=bucket_age(r.age_days),
        )
        for r in records
    ]


class NormalizationSpec:
    """Per-column (min, max) ranges mapping values to [0, 1].

    Constant columns (max == min) normalize to 0.5 and denormalize back to
    the constant.
    """

    def __init__(self, ranges: dict[str, tuple[float, float]]):
        for col, (lo, hi) in ranges.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise DataError(f"bad range for column {col}: ({lo}, {hi})")
        self.ranges = dict(ranges)

    def is_constant(self, column: str) -> bool:
        lo, hi = self._range(column)
        return hi == lo

    def _range(self, column: str) -> tuple[float, float]:
        try:
            return self.ranges[column]
        except KeyError:
            raise KeyError(f"unknown column {column!r}") from None

    def normalize(self, value: float, column: str) -> float:
        lo, hi = self._range(column)
        if hi == lo:
            return 0.5
        return min(1.0, max(0.0, (value - lo) / (hi - lo)))

    def denormalize(self, unit: float, column: str) -> float:
        lo, hi = self._range(column)
        if hi == lo:
            return lo
        return lo + unit * (hi - lo)

    def normalize_array(self, values: np.ndarray, columns) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        out = np.empty_like(values)
        for j, col in enumerate(columns):
            lo, hi = self._range(col)
            if hi == lo:
                out[..., j] = 0.5
            else:
                out[..., j] = np.clip((values[..., j] - lo) / (hi - lo), 0.0, 1.0)
        return out

    def denormalize_array(self, units: np.ndarray, columns) -> np.ndarray:
        units = np.asarray(units, dtype=float)
        out = np.empty_like(units)
        for j, col in enumerate(columns):
            lo, hi = self._range(col)
            out[..., j] = lo if hi == lo else lo + units[..., j] * (hi - lo)
        return out

    def to_dict(self) -> dict:
        return {col: list(self.ranges[col]) for col in COLUMNS if col in self.ranges}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationSpec":
        return cls({col: (float(lo), float(hi)) for col, (lo, hi) in doc.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, NormalizationSpec) and self.ranges == other.ranges


def fit_normalizer(records: list[LabeledRecord], train_ids) -> NormalizationSpec:
    """Column ranges over the training subset only."""
    train_ids = list(train_ids)
    if not train_ids:
        raise DataError("cannot fit a normalizer on an empty training set")
    ranges = {}
    for col in COLUMNS:
        values = [records[i].column_value(col) for i in train_ids]
        ranges[col] = (min(values), max(values))
    return NormalizationSpec(ranges)


def parse_uci_csv(data: bytes | str) -> list[RawRecord]:
    """Parse the 9-column source CSV (header row required, UCI column order).

    Raises DataError naming the 1-based data row on any malformed row.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    if not text.strip():
        raise DataError("empty CSV input")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError("empty CSV input")
    header = rows[0]
    if len(header) != 9:
        raise DataError(f"expected 9 columns in header, got {len(header)}")
    records = []
    for rownum, row in enumerate(rows[1:], start=1):
        if len(row) != 9:
            raise DataError(f"row {rownum}: expected 9 columns, got {len(row)}")
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            raise DataError(f"row {rownum}: non-numeric cell") from None
        age = values[7]
        if not age.is_integer():
            raise DataError(f"row {rownum}: age must be a whole number of days, got {age}")
        try:
            formula = Formula(*values[:7])
            record = RawRecord(formula=formula, age_days=int(age), strength_mpa=values[8])
        except DataError as exc:
            raise DataError(f"row {rownum}: {exc}") from None
        records.append(record)
    return records


def export_uci_csv(records: list[RawRecord]) -> str:
    """Serialize records back to the 9-column source layout.

    Floats are written with shortest round-trip precision, so parsing the
    output reproduces every value bit-exactly.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS[:9])
    for r in records:
        writer.writerow(
            [repr(getattr(r.formula, c)) for c in CONSTITUENTS]
            + [r.age_days, repr(r.strength_mpa)]
        )
    return out.getvalue()


def split(records, test_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Deterministic stratified train/test split.

    Stratifies by age bucket: every bucket with at least two members
    contributes at least one record to each side.  Per-bucket test counts are
    round(fraction * size) (half up), clamped so neither side is empty.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if len(records) < 2:
        raise DataError("need at least 2 records to split")
    rng = np.random.Generator(np.random.PCG64(seed))
    by_bucket: dict[AgeBucket, list[int]] = {b: [] for b in BUCKETS}
    for i, rec in enumerate(records):
        bucket = rec.bucket if isinstance(rec, LabeledRecord) else bucket_age(rec.age_days)
        by_bucket[bucket].append(i)
    train_ids: list[int] = []
    test_ids: list[int] = []
    for bucket in BUCKETS:
        ids = by_bucket[bucket]
        if not ids:
            continue
        if len(ids) == 1:
            train_ids.extend(ids)
            continue
        n_test = int(math.floor(test_fraction * len(ids) + 0.5))
        n_test = min(max(n_test, 1), len(ids) - 1)
        order = rng.permutation(len(ids))
        test_ids.extend(ids[j] for j in order[:n_test])
        train_ids.extend(ids[j] for j in order[n_test:])
    return sorted(train_ids), sorted(test_ids)


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled dataset with its fitted normalization and split."""

    records: tuple[LabeledRecord, ...]
    normalization: NormalizationSpec
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        ids = sorted(self.train_ids) + sorted(self.test_ids)
        if sorted(ids) != list(range(len(self.records))):
            raise DataError("split assignments must be disjoint and exhaustive")

    @classmethod
    def build(
        cls,
        raw: list[RawRecord],
        factors: FactorTable,
        test_fraction: float = 0.2,
        seed: int = 42,
    ) -> "Dataset":
        labeled = label_records(raw, factors)
        train_ids, test_ids = split(labeled, test_fraction, seed)
        normalization = fit_normalizer(labeled, train_ids)
        return cls(
            records=tuple(labeled),
            normalization=normalization,
            train_ids=tuple(train_ids),
            test_ids=tuple(test_ids),
        )

    def train_records(self) -> list[LabeledRecord]:
        return [self.records[i] for i in self.train_ids]

    def test_records(self) -> list[LabeledRecord]:
        return [self.records[i] for i in self.test_ids]

    def column_array(self, column: str, ids=None) -> np.ndarray:
        ids = range(len(self.records)) if ids is None else ids
        return np.array([self.records[i].column_value(column) for i in ids], dtype=float)

    def matrix(self, columns, ids=None) -> np.ndarray:
        ids = list(range(len(self.records))) if ids is None else list(ids)
        out = np.empty((len(ids), len(columns)), dtype=float)
        for j, col in enumerate(columns):
            for r, i in enumerate(ids):
                out[r, j] = self.records[i].column_value(col)
        return out

    def bucket_ids(self, bucket: AgeBucket, ids=None) -> list[int]:
        ids = range(len(self.records)) if ids is None else ids
        return [i for i in ids if self.records[i].bucket == bucket]

    # --- persistence -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "schema": "greencrete.dataset/1",
            "records": [
                {
                    "formula": {c: getattr(r.raw.formula, c) for c in CONSTITUENTS},
                    "age_days": r.raw.age_days,
                    "strength_mpa": r.raw.strength_mpa,
                    "impacts": {k: getattr(r.impacts, k) for k in IMPACT_NAMES},
                    "bucket": r.bucket.name,
                }
                for r in self.records
            ],
            "normalization": self.normalization.to_dict(),
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        doc = json.loads(text)
        if doc.get("schema") != "greencrete.dataset/1":
            raise DataError(f"unsupported dataset schema: {doc.get('schema')!r}")
        records = []
        for r in doc["records"]:
            raw = RawRecord(
                formula=Formula(**r["formula"]),
                age_days=int(r["age_days"]),
                strength_mpa=float(r["strength_mpa"]),
            )
            records.append(
                LabeledRecord(
                    raw=raw,
                    impacts=ImpactVector(**r["impacts"]),
                    bucket=AgeBucket[r["bucket"]],
                )
            )
        return cls(
            records=tuple(records),
            normalization=NormalizationSpec.from_dict(doc["normalization"]),
            train_ids=tuple(doc["train_ids"]),
            test_ids=tuple(doc["test_ids"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def export_uci_csv(self) -> str:
        return export_uci_csv([r.raw for r in self.records])

    def export_labeled_csv(self) -> str:
        """The 9 source columns plus gwp, ap, cbw and the bucket name."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(COLUMNS[:9] + ("gwp", "ap", "cbw", "bucket"))
        for r in self.records:
            writer.writerow(
                [repr(getattr(r.raw.formula, c)) for c in CONSTITUENTS]
                + [r.raw.age_days, repr(r.raw.strength_mpa)]
                + [repr(getattr(r.impacts, k)) for k in IMPACT_NAMES]
                + [r.bucket.name]
            )
        return out.getvalue()
