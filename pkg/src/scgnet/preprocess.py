"""One-hot encoding of categorical columns and z-score standardization of numeric ones.

All parameters are fitted on training records only; test records are encoded
with the training-fitted state. Output layout of a feature vector is the
standardized numeric columns (dataset order) followed by one one-hot block per
categorical column (column order, categories sorted lexicographically).
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import DEFAULT_SCHEMA, FEATURE_NAMES, RawRecord, Schema
from .errors import DataError, EmptyTrainingSet

PIPELINE_FORMAT = "scgnet-pipeline"
PIPELINE_VERSION = 1


@dataclass(frozen=True)
class EncoderSpec:
    columns: tuple[int, ...]
    categories: tuple[tuple[str, ...], ...]

    @property
    def width(self) -> int:
        return sum(len(c) for c in self.categories)

    def index(self) -> list[dict[str, int]]:
        return [{v: i for i, v in enumerate(cats)} for cats in self.categories]


@dataclass(frozen=True)
class Standardizer:
    columns: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray

    def position(self, column: int) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise DataError(f"column {column} is not a standardized numeric column") from None


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-column [0, 1] view of the numeric columns, for learners that need non-negative input."""

    columns: tuple[int, ...]
    low: np.ndarray
    high: np.ndarray


def fit_one_hot(train: Sequence[RawRecord], columns: Sequence[int]) -> EncoderSpec:
    if not train:
        raise EmptyTrainingSet("cannot fit one-hot encoder on an empty training set")
    cats = tuple(tuple(sorted({rec.features[c] for rec in train})) for c in columns)
    return EncoderSpec(tuple(columns), cats)


def encode_one_hot(spec: EncoderSpec, record: RawRecord, unknown: Counter | None = None) -> np.ndarray:
    """One-hot segment for a single record. Unseen categories give an all-zero block."""
    out = np.zeros(spec.width, dtype=np.float32)
    offset = 0
    for col, cats, lookup in zip(spec.columns, spec.categories, spec.index()):
        value = record.features[col]
        pos = lookup.get(value)
        if pos is None:
            if unknown is not None:
                unknown[(col, value)] += 1
        else:
            out[offset + pos] = 1.0
        offset += len(cats)
    return out


def _numeric_matrix(records: Sequence[RawRecord], columns: Sequence[int]) -> np.ndarray:
    if not records:
        return np.zeros((0, len(columns)), dtype=np.float64)
    return np.array([[float(rec.features[c]) for c in columns] for rec in records], dtype=np.float64)


def fit_standardizer(train: Sequence[RawRecord], columns: Sequence[int]) -> Standardizer:
    if not train:
        raise EmptyTrainingSet("cannot fit standardizer on an empty training set")
    values = _numeric_matrix(train, columns)
    mean = values.mean(axis=0)
    std = np.sqrt(((values - mean) ** 2).mean(axis=0))
    return Standardizer(tuple(columns), mean, std)


def standardize(std: Standardizer, value: float, column: int) -> float:
    i = std.position(column)
    tau = float(std.std[i])
    if tau == 0.0:
        return 0.0
    return (value - float(std.mean[i])) / tau


def _standardize_matrix(std: Standardizer, values: np.ndarray) -> np.ndarray:
    safe = np.where(std.std > 0, std.std, 1.0)
    out = (values - std.mean) / safe
    out[:, std.std == 0] = 0.0
    return out


def fit_minmax(train: Sequence[RawRecord], columns: Sequence[int]) -> MinMaxScaler:
    if not train:
        raise EmptyTrainingSet("cannot fit min-max scaler on an empty training set")
    values = _numeric_matrix(train, columns)
    return MinMaxScaler(tuple(columns), values.min(axis=0), values.max(axis=0))


@dataclass
class TransformReport:
    n_records: int = 0
    unknown: Counter = field(default_factory=Counter)

    def unknown_by_column(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for (col, value), n in sorted(self.unknown.items()):
            out.setdefault(FEATURE_NAMES[col] if col < len(FEATURE_NAMES) else str(col), {})[value] = n
        return out

    @property
    def n_unknown(self) -> int:
        return sum(self.unknown.values())


@dataclass(frozen=True)
class Pipeline:
    schema: Schema
    encoder: EncoderSpec
    standardizer: Standardizer
    minmax: MinMaxScaler

    @property
    def width(self) -> int:
        return len(self.standardizer.columns) + self.encoder.width

    def feature_names(self) -> list[str]:
        def name(c):
            return FEATURE_NAMES[c] if c < len(FEATURE_NAMES) else f"f{c}"

        names = [name(c) for c in self.standardizer.columns]
        for col, cats in zip(self.encoder.columns, self.encoder.categories):
            names.extend(f"{name(col)}={v}" for v in cats)
        return names

    def _one_hot_matrix(self, records, report: TransformReport | None) -> np.ndarray:
        out = np.zeros((len(records), self.encoder.width), dtype=np.float32)
        offset = 0
        for col, cats, lookup in zip(self.encoder.columns, self.encoder.categories, self.encoder.index()):
            for row, rec in enumerate(records):
                value = rec.features[col]
                pos = lookup.get(value)
                if pos is None:
                    if report is not None:
                        report.unknown[(col, value)] += 1
                else:
                    out[row, offset + pos] = 1.0
            offset += len(cats)
        return out

    def transform(self, records: Sequence[RawRecord], report: TransformReport | None = None) -> np.ndarray:
        """Encode records into a float32 matrix of shape (n, width)."""
        if report is not None:
            report.n_records += len(records)
        numeric = _standardize_matrix(self.standardizer, _numeric_matrix(records, self.standardizer.columns))
        return np.concatenate([numeric.astype(np.float32), self._one_hot_matrix(records, report)], axis=1)

    def transform_nonnegative(self, records: Sequence[RawRecord]) -> np.ndarray:
        """Min-max scaled numerics (clipped to [0, 1]) followed by the one-hot blocks."""
        mm = self.minmax
        values = _numeric_matrix(records, mm.columns)
        span = mm.high - mm.low
        scaled = np.where(span > 0, (values - mm.low) / np.where(span > 0, span, 1.0), 0.0)
        scaled = np.clip(scaled, 0.0, 1.0)
        return np.concatenate([scaled.astype(np.float32), self._one_hot_matrix(records, None)], axis=1)

    def to_dict(self) -> dict:
        return {
            "format": PIPELINE_FORMAT,
            "version": PIPELINE_VERSION,
            "schema": {"n_features": self.schema.n_features, "categorical": list(self.schema.categorical)},
            "one_hot": {
                "columns": list(self.encoder.columns),
                "categories": [list(c) for c in self.encoder.categories],
            },
            "standardizer": {
                "columns": list(self.standardizer.columns),
                "mean": [float(v) for v in self.standardizer.mean],
                "std": [float(v) for v in self.standardizer.std],
            },
            "minmax": {
                "columns": list(self.minmax.columns),
                "low": [float(v) for v in self.minmax.low],
                "high": [float(v) for v in self.minmax.high],
            },
            "width": self.width,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Pipeline":
        if doc.get("format") != PIPELINE_FORMAT:
            raise DataError(f"not a fitted pipeline document (format={doc.get('format')!r})")
        if doc.get("version") != PIPELINE_VERSION:
            raise DataError(f"pipeline version {doc.get('version')}, expected {PIPELINE_VERSION}")
        schema = Schema(doc["schema"]["n_features"], tuple(doc["schema"]["categorical"]))
        oh = doc["one_hot"]
        st = doc["standardizer"]
        mm = doc["minmax"]
        return cls(
            schema,
            EncoderSpec(tuple(oh["columns"]), tuple(tuple(c) for c in oh["categories"])),
            Standardizer(tuple(st["columns"]), np.array(st["mean"], dtype=np.float64),
                         np.array(st["std"], dtype=np.float64)),
            MinMaxScaler(tuple(mm["columns"]), np.array(mm["low"], dtype=np.float64),
                         np.array(mm["high"], dtype=np.float64)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Pipeline":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def fit_pipeline(train: Sequence[RawRecord], schema: Schema = DEFAULT_SCHEMA) -> Pipeline:
    return Pipeline(
        schema,
        fit_one_hot(train, schema.categorical),
        fit_standardizer(train, schema.numeric),
        fit_minmax(train, schema.numeric),
    )
