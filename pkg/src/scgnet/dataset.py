"""NSL-KDD record parsing, attack taxonomy and the columnar intermediate file.

NSL-KDD files are header-less CSV with 43 columns: 41 connection features,
the attack subclass (``neptune``, ``normal``, ...) and a difficulty score.
"""

from __future__ import annotations

import difflib
import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, FieldCountMismatch, NumericParseError, UnknownSubclass

FEATURE_NAMES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)

COLUMNAR_FORMAT = "scgnet-columnar"
COLUMNAR_VERSION = 1
MAX_DIFFICULTY = 21


class ClassLabel(enum.IntEnum):
    NORMAL = 0
    DOS = 1
    PROBE = 2
    R2L = 3
    U2R = 4

    @property
    def display(self) -> str:
        return _CLASS_DISPLAY[self]

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        try:
            return _CLASS_BY_NAME[text.strip().lower()]
        except KeyError:
            raise DataError(f"unknown attack class {text!r}") from None


_CLASS_DISPLAY = {
    ClassLabel.NORMAL: "Normal",
    ClassLabel.DOS: "DoS",
    ClassLabel.PROBE: "Probe",
    ClassLabel.R2L: "R2L",
    ClassLabel.U2R: "U2R",
}
_CLASS_BY_NAME = {v.lower(): k for k, v in _CLASS_DISPLAY.items()}


class BinaryLabel(enum.IntEnum):
    NORMAL = 0
    ATTACK = 1

    @property
    def display(self) -> str:
        return "Normal" if self is BinaryLabel.NORMAL else "Attack"


CLASS_NAMES = tuple(c.display for c in ClassLabel)
BINARY_NAMES = tuple(b.display for b in BinaryLabel)


@dataclass(frozen=True)
class Schema:
    """Column descriptor: feature count and which feature indices are categorical."""

    n_features: int = 41
    categorical: tuple[int, ...] = (1, 2, 3)

    @property
    def numeric(self) -> tuple[int, ...]:
        cat = set(self.categorical)
        return tuple(i for i in range(self.n_features) if i not in cat)

    @property
    def n_columns(self) -> int:
        return self.n_features + 2


DEFAULT_SCHEMA = Schema()


@dataclass(frozen=True)
class RawRecord:
    features: tuple[str, ...]
    subclass: str
    difficulty: int

    def numeric_values(self, schema: Schema = DEFAULT_SCHEMA) -> list[float]:
        return [float(self.features[i]) for i in schema.numeric]


@dataclass(frozen=True)
class LabeledExample:
    raw: RawRecord
    binary_label: BinaryLabel
    class_label: ClassLabel
    coerced: bool = False

    def __post_init__(self):
        if (self.binary_label is BinaryLabel.NORMAL) != (self.class_label is ClassLabel.NORMAL):
            raise DataError(
                f"inconsistent labels: binary {self.binary_label.display}, "
                f"class {self.class_label.display}"
            )


def parse_records(stream: Iterable[str], schema: Schema = DEFAULT_SCHEMA) -> list[RawRecord]:
    """Parse NSL-KDD lines into records. Blank lines are skipped; line numbers are 1-based."""
    records = []
    categorical = set(schema.categorical)
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != schema.n_columns:
            raise FieldCountMismatch(line_no, len(fields), schema.n_columns)
        features = tuple(fields[: schema.n_features])
        for col, value in enumerate(features):
            if col in categorical:
                if not value.strip():
                    raise DataError(f"line {line_no}, column {col + 1}: empty categorical field")
                continue
            if not _is_finite_number(value):
                raise NumericParseError(line_no, col + 1, value)
        diff_text = fields[schema.n_features + 1]
        try:
            difficulty = int(diff_text)
        except ValueError:
            raise NumericParseError(line_no, schema.n_columns, diff_text) from None
        if not 0 <= difficulty <= MAX_DIFFICULTY:
            raise DataError(f"line {line_no}: difficulty {difficulty} outside [0, {MAX_DIFFICULTY}]")
        subclass = fields[schema.n_features]
        if not subclass:
            raise DataError(f"line {line_no}: empty subclass label")
        records.append(RawRecord(features, subclass, difficulty))
    return records


def _is_finite_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def read_records(path, schema: Schema = DEFAULT_SCHEMA) -> list[RawRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh, schema)


def serialize_record(record: RawRecord) -> str:
    return ",".join((*record.features, record.subclass, str(record.difficulty)))


def write_records(path, records: Iterable[RawRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(serialize_record(rec) + "\n")


@dataclass(frozen=True)
class AttackTaxonomy:
    mapping: dict[str, ClassLabel]
    source: str = "<memory>"

    def __post_init__(self):
        if self.mapping.get("normal") is not ClassLabel.NORMAL:
            raise DataError(f"taxonomy {self.source} must map 'normal' to Normal")

    @classmethod
    def load(cls, path) -> "AttackTaxonomy":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh, source=str(path))

    @classmethod
    def parse(cls, lines: Iterable[str], source: str = "<memory>") -> "AttackTaxonomy":
        mapping: dict[str, ClassLabel] = {}
        for line_no, line in enumerate(lines, start=1):
            line = line.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise DataError(f"{source}:{line_no}: expected 'subclass<TAB>class'")
            name, cls_text = parts[0].strip(), parts[1]
            if name in mapping:
                raise DataError(f"{source}:{line_no}: duplicate subclass {name!r}")
            mapping[name] = ClassLabel.parse(cls_text)
        return cls(mapping, source)

    @classmethod
    def default(cls) -> "AttackTaxonomy":
        ref = resources.files("scgnet.data").joinpath("attack_taxonomy.tsv")
        with ref.open(encoding="utf-8") as fh:
            return cls.parse(fh, source="scgnet/data/attack_taxonomy.tsv")


def map_subclass(taxonomy: AttackTaxonomy, subclass: str) -> ClassLabel:
    try:
        return taxonomy.mapping[subclass]
    except KeyError:
        raise UnknownSubclass(subclass) from None


def closest_attack_class(taxonomy: AttackTaxonomy, subclass: str) -> ClassLabel:
    """Attack class of the most similarly named known attack subclass."""
    names = sorted(n for n, c in taxonomy.mapping.items() if c is not ClassLabel.NORMAL)
    if not names:
        raise UnknownSubclass(subclass)
    best = difflib.get_close_matches(subclass, names, n=1, cutoff=0.0)
    return taxonomy.mapping[best[0] if best else names[0]]


def label_records(
    records: Iterable[RawRecord],
    taxonomy: AttackTaxonomy,
    coerce_unknown: bool = False,
) -> list[LabeledExample]:
    out = []
    for rec in records:
        coerced = False
        try:
            cls = map_subclass(taxonomy, rec.subclass)
        except UnknownSubclass:
            if not coerce_unknown:
                raise
            cls = closest_attack_class(taxonomy, rec.subclass)
            coerced = True
        binary = BinaryLabel.NORMAL if cls is ClassLabel.NORMAL else BinaryLabel.ATTACK
        out.append(LabeledExample(rec, binary, cls, coerced))
    return out


def class_histogram(examples: Iterable[LabeledExample]) -> dict[ClassLabel, int]:
    counts = Counter(ex.class_label for ex in examples)
    return {c: counts.get(c, 0) for c in ClassLabel}


def binary_histogram(examples: Iterable[LabeledExample]) -> dict[BinaryLabel, int]:
    counts = Counter(ex.binary_label for ex in examples)
    return {b: counts.get(b, 0) for b in BinaryLabel}


def labels_for_task(examples: Sequence[LabeledExample], task: str) -> np.ndarray:
    if task == "binary":
        return np.array([int(ex.binary_label) for ex in examples], dtype=np.int64)
    if task == "multiclass":
        return np.array([int(ex.class_label) for ex in examples], dtype=np.int64)
    raise ValueError(f"unknown task {task!r}")


def task_class_names(task: str) -> tuple[str, ...]:
    return BINARY_NAMES if task == "binary" else CLASS_NAMES


@dataclass
class IngestSummary:
    source: str
    n_records: int
    class_counts: dict[str, int]
    binary_counts: dict[str, int]
    coerced: int
    subclass_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": COLUMNAR_FORMAT,
                "version": COLUMNAR_VERSION,
                "source": self.source,
                "n_records": self.n_records,
                "class_counts": self.class_counts,
                "binary_counts": self.binary_counts,
                "coerced_unknown_subclasses": self.coerced,
                "subclass_counts": self.subclass_counts,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def summarize(examples: Sequence[LabeledExample], source: str = "") -> IngestSummary:
    return IngestSummary(
        source=source,
        n_records=len(examples),
        class_counts={c.display: n for c, n in class_histogram(examples).items()},
        binary_counts={b.display: n for b, n in binary_histogram(examples).items()},
        coerced=sum(ex.coerced for ex in examples),
        subclass_counts=dict(sorted(Counter(ex.raw.subclass for ex in examples).items())),
    )


def save_columnar(path, examples: Sequence[LabeledExample]) -> None:
    """Write the versioned columnar intermediate (an uncompressed ``.npz``).

    Arrays: ``format_version`` (int64[1]), ``features`` (str[n, 41], raw text),
    ``subclass`` (str[n]), ``difficulty`` (int64[n]), ``class_label`` and
    ``binary_label`` (int64[n]) and ``coerced`` (bool[n]).
    """
    n = len(examples)
    n_feat = len(examples[0].raw.features) if examples else DEFAULT_SCHEMA.n_features
    features = np.array([ex.raw.features for ex in examples], dtype=str).reshape(n, n_feat)
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.array([COLUMNAR_VERSION], dtype=np.int64),
            features=features,
            subclass=np.array([ex.raw.subclass for ex in examples], dtype=str),
            difficulty=np.array([ex.raw.difficulty for ex in examples], dtype=np.int64),
            class_label=np.array([int(ex.class_label) for ex in examples], dtype=np.int64),
            binary_label=np.array([int(ex.binary_label) for ex in examples], dtype=np.int64),
            coerced=np.array([ex.coerced for ex in examples], dtype=bool),
        )


def load_columnar(path) -> list[LabeledExample]:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"][0])
        if version != COLUMNAR_VERSION:
            raise DataError(f"{path}: columnar version {version}, expected {COLUMNAR_VERSION}")
        features = z["features"]
        return [
            LabeledExample(
                RawRecord(tuple(str(v) for v in row), str(sub), int(diff)),
                BinaryLabel(int(b)),
                ClassLabel(int(c)),
                bool(co),
            )
            for row, sub, diff, c, b, co in zip(
                features, z["subclass"], z["difficulty"], z["class_label"],
                z["binary_label"], z["coerced"],
            )
        ]


def load_examples(path, taxonomy: AttackTaxonomy | None = None, coerce_unknown: bool = False,
                  schema: Schema = DEFAULT_SCHEMA) -> list[LabeledExample]:
    """Load either a raw NSL-KDD text file or a columnar ``.npz`` intermediate."""
    if Path(path).suffix == ".npz":
        return load_columnar(path)
    taxonomy = taxonomy or AttackTaxonomy.default()
    return label_records(read_records(path, schema), taxonomy, coerce_unknown)
