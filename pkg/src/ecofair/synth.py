"""Data sources for the experiment harness: synthetic generation and CSV.

The synthetic generator draws standard-normal features and labels them with
a per-group linear threshold rule plus Gaussian noise on the score, so zero
noise means labels are a deterministic threshold of the score.  The
``shared_proxy`` flag collapses every group-0 feature column onto the first
one: independently trained lenders then see the same single signal for
group 0 and their predictions on that group correlate strongly, while
group-1 predictions stay diverse.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingColumn, ParseFailure
from .learners import Dataset


@dataclass(frozen=True)
class SyntheticSpec:
    """Ground-truth description of a synthetic borrower population."""

    n_rows: int
    feature_dim: int = 6
    group1_share: float = 0.5
    weights_g0: tuple = ()
    weights_g1: tuple = ()
    offset_g0: float = 0.0
    offset_g1: float = 0.0
    noise: float = 1.0
    shared_proxy: bool = False

    def __post_init__(self):
        if self.n_rows < 1 or self.feature_dim < 1:
            raise ValueError("n_rows and feature_dim must be positive")
        if not 0.0 <= self.group1_share <= 1.0:
            raise ValueError("group1_share must be in [0, 1]")
        if self.noise < 0.0:
            raise ValueError("noise must be nonnegative")
        for name in ("weights_g0", "weights_g1"):
            w = getattr(self, name)
            w = tuple(float(v) for v in w) if len(w) else tuple([1.0] * self.feature_dim)
            if len(w) != self.feature_dim:
                raise ValueError(f"{name} must have {self.feature_dim} entries")
            object.__setattr__(self, name, w)

    def to_json_dict(self) -> dict:
        return {
            "n_rows": self.n_rows, "feature_dim": self.feature_dim,
            "group1_share": self.group1_share,
            "weights_g0": list(self.weights_g0), "weights_g1": list(self.weights_g1),
            "offset_g0": self.offset_g0, "offset_g1": self.offset_g1,
            "noise": self.noise, "shared_proxy": self.shared_proxy,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SyntheticSpec":
        doc = dict(doc)
        doc["weights_g0"] = tuple(doc.get("weights_g0", ()))
        doc["weights_g1"] = tuple(doc.get("weights_g1", ()))
        return cls(**doc)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Draw a dataset from the spec; deterministic given the seed."""
    rng = np.random.Generator(np.random.Philox(seed))
    n, d = spec.n_rows, spec.feature_dim
    group = (rng.random(n) < spec.group1_share).astype(np.int64)
    features = rng.standard_normal((n, d))
    eps = rng.standard_normal(n)

    if spec.shared_proxy:
        g0 = group == 0
        features[g0] = features[g0, :1]

    w = np.where(group[:, None] == 0, np.asarray(spec.weights_g0),
                 np.asarray(spec.weights_g1))
    offset = np.where(group == 0, spec.offset_g0, spec.offset_g1)
    score = (features * w).sum(axis=1) + offset + spec.noise * eps
    label = (score > 0.0).astype(np.int64)
    return Dataset(features, group, label,
                   tuple(f"x{j}" for j in range(d)))


@dataclass(frozen=True)
class CsvSchema:
    """Which CSV columns feed the dataset and how to read them."""

    feature_columns: tuple
    group_column: str
    group_positive: str
    label_column: str
    label_positive: str
    categorical_columns: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "feature_columns": list(self.feature_columns),
            "group_column": self.group_column,
            "group_positive": self.group_positive,
            "label_column": self.label_column,
            "label_positive": self.label_positive,
            "categorical_columns": list(self.categorical_columns),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CsvSchema":
        return cls(
            feature_columns=tuple(doc["feature_columns"]),
            group_column=doc["group_column"],
            group_positive=str(doc["group_positive"]),
            label_column=doc["label_column"],
            label_positive=str(doc["label_positive"]),
            categorical_columns=tuple(doc.get("categorical_columns", ())),
        )


def load_csv(path: str, schema: CsvSchema) -> Dataset:
    """Read a borrower CSV into a Dataset.

    Numeric feature columns are parsed as floats; each categorical column is
    one-hot expanded (one indicator per level, levels sorted, appended in
    schema order).  Unparseable cells raise :class:`ParseFailure` with the
    offending row number.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = (list(schema.feature_columns) + list(schema.categorical_columns)
                  + [schema.group_column, schema.label_column])
        for col in needed:
            if col not in header:
                raise MissingColumn(f"column {col!r} not in CSV header {header}")

        numeric, cats, groups, labels = [], [], [], []
        for rownum, row in enumerate(reader, start=1):
            vals = []
            for col in schema.feature_columns:
                try:
                    vals.append(float(row[col]))
                except (TypeError, ValueError):
                    raise ParseFailure(rownum, col) from None
            numeric.append(vals)
            cats.append([row[col] for col in schema.categorical_columns])
            groups.append(1 if row[schema.group_column] == schema.group_positive else 0)
            labels.append(1 if row[schema.label_column] == schema.label_positive else 0)

    if not numeric:
        raise ParseFailure(0, "file", "CSV contains no data rows")

    features = np.asarray(numeric, dtype=np.float64)
    names = list(schema.feature_columns)
    for j, col in enumerate(schema.categorical_columns):
        levels = sorted({row[j] for row in cats})
        onehot = np.zeros((len(cats), len(levels)))
        index = {lvl: i for i, lvl in enumerate(levels)}
        for r, row in enumerate(cats):
            onehot[r, index[row[j]]] = 1.0
        features = np.column_stack([features, onehot])
        names.extend(f"{col}={lvl}" for lvl in levels)

    return Dataset(features, np.asarray(groups, dtype=np.int64),
                   np.asarray(labels, dtype=np.int64), tuple(names))
