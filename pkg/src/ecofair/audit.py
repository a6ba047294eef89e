"""Empirical fairness audits of observed prediction tables.

A :class:`PredictionTable` records, per individual: group, true label, which
lenders serve them, and each lender's offer probability (0/1 for
deterministic classifiers, interior after randomized post-processing).
Randomization devices of distinct lenders are independent given the row, so
the no-offer probability of a row is the product of its per-lender
complements.

Strata with zero rows fail loudly (:class:`EmptyGroup`) rather than
returning 0, which would mask unfair comparisons.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, EmptyGroup, ParseFailure
from .joint import EcosystemModel, SampleBatch, sample
from .levels import FairnessLevels, UtilityKind


@dataclass(frozen=True)
class PredictionTable:
    """Columnar table of individuals and per-lender offer probabilities."""

    ids: np.ndarray      # opaque identifiers, shape (rows,)
    group: np.ndarray    # int {0,1}
    label: np.ndarray    # int {0,1}
    served: np.ndarray   # bool, shape (rows, lenders)
    probs: np.ndarray    # float64 in [0,1], shape (rows, lenders)

    def __post_init__(self):
        rows = self.ids.shape[0]
        for name in ("group", "label"):
            col = getattr(self, name)
            if col.shape != (rows,):
                raise ValueError(f"{name} must have shape ({rows},)")
            if not np.isin(col, (0, 1)).all():
                raise ValueError(f"{name} entries must be 0 or 1")
        if self.served.shape != self.probs.shape or self.served.ndim != 2:
            raise ValueError("served and probs must share shape (rows, lenders)")
        if self.probs.shape[0] != rows:
            raise ValueError("probs row count mismatch")
        if ((self.probs < 0.0) | (self.probs > 1.0)).any():
            raise ValueError("offer probabilities must lie in [0, 1]")
        if (self.probs[~self.served] != 0.0).any():
            raise ValueError("offer probability must be 0 wherever served is false")

    @property
    def n_rows(self) -> int:
        return self.ids.shape[0]

    @property
    def n_lenders(self) -> int:
        return self.probs.shape[1]

    def replace_lender(self, lender: int, new_probs: np.ndarray) -> "PredictionTable":
        """Copy of the table with one lender's offer probabilities replaced."""
        probs = self.probs.copy()
        probs[:, lender - 1] = new_probs
        return PredictionTable(self.ids, self.group, self.label, self.served, probs)

    # -- CSV wire format ----------------------------------------------------

    def to_csv(self) -> str:
        n = self.n_lenders
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["id", "group", "label"]
            + [f"served_{i}" for i in range(1, n + 1)]
            + [f"p_{i}" for i in range(1, n + 1)]
        )
        for r in range(self.n_rows):
            writer.writerow(
                [str(self.ids[r]), int(self.group[r]), int(self.label[r])]
                + [int(v) for v in self.served[r]]
                + [f"{v:.17g}" for v in self.probs[r]]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PredictionTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ParseFailure(0, "header", "empty table file") from None
        n = sum(1 for h in header if h.startswith("p_"))
        expected = (["id", "group", "label"]
                    + [f"served_{i}" for i in range(1, n + 1)]
                    + [f"p_{i}" for i in range(1, n + 1)])
        if n < 1 or header != expected:
            raise ParseFailure(0, "header", f"unexpected header {header}")
        ids, groups, labels, served, probs = [], [], [], [], []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(expected):
                raise ParseFailure(rownum, "row", f"expected {len(expected)} cells")
            ids.append(row[0])
            for col, target, caster in (
                (1, groups, int), (2, labels, int),
            ):
                try:
                    target.append(caster(row[col]))
                except ValueError:
                    raise ParseFailure(rownum, header[col]) from None
            try:
                served.append([int(v) for v in row[3:3 + n]])
            except ValueError:
                raise ParseFailure(rownum, "served") from None
            try:
                probs.append([float(v) for v in row[3 + n:]])
            except ValueError:
                raise ParseFailure(rownum, "p") from None
        return cls(
            ids=np.array(ids, dtype=object),
            group=np.array(groups, dtype=np.int64),
            label=np.array(labels, dtype=np.int64),
            served=np.array(served, dtype=bool),
            probs=np.array(probs, dtype=np.float64),
        )


def batch_to_table(batch: SampleBatch) -> PredictionTable:
    """Expand sampled counts into one row per individual.

    Offer indicators are the deterministic bits of each sampled output
    vector; all lenders are marked served (non-service is already encoded as
    a deterministic 0 in the pmfs that produced the batch).
    """
    n = batch.n
    groups, labels, vectors = [], [], []
    for a in (0, 1):
        for y in (0, 1):
            idx = np.nonzero(batch.counts[a, y])[0]
            reps = batch.counts[a, y, idx]
            vectors.append(np.repeat(idx, reps))
            size = int(reps.sum())
            groups.append(np.full(size, a, dtype=np.int64))
            labels.append(np.full(size, y, dtype=np.int64))
    vec = np.concatenate(vectors)
    group = np.concatenate(groups)
    label = np.concatenate(labels)
    bits = np.stack(
        [((vec >> (n - lender)) & 1).astype(np.float64) for lender in range(1, n + 1)],
        axis=1,
    )
    ids = np.array([str(i) for i in range(vec.size)], dtype=object)
    return PredictionTable(ids, group, label, np.ones_like(bits, dtype=bool), bits)


def table_from_model(model: EcosystemModel, total: int, seed: int,
                     group1_share: float = 0.5) -> PredictionTable:
    """Monte-Carlo bridge: sample the model and expand to a table."""
    return batch_to_table(sample(model, total, seed, group1_share))


def _offer_moments(probs: np.ndarray) -> tuple:
    """(d, pr_one) per row: d = Pr[at least one offer], pr_one = Pr[exactly
    one], with independent randomization across lenders."""
    comp = 1.0 - probs
    none = comp.prod(axis=1)
    n = probs.shape[1]
    one = np.zeros(probs.shape[0])
    for lender in range(n):
        others = np.delete(comp, lender, axis=1).prod(axis=1)
        one += probs[:, lender] * others
    return 1.0 - none, one


def _stratum_mean(values: np.ndarray, mask: np.ndarray, group: int, label) -> float:
    count = int(mask.sum())
    if count == 0:
        where = f"(group={group}, label={label})" if label is not None else f"(group={group})"
        raise EmptyGroup(f"no rows in stratum {where}")
    return float(values[mask].sum()) / count


def empirical_fairness(table: PredictionTable,
                       util: UtilityKind = UtilityKind(1.0)) -> FairnessLevels:
    """Per-lender and ecosystem fairness levels of an observed table."""
    d, pr_one = _offer_moments(table.probs)
    welfare = pr_one + util.k * (d - pr_one)

    masks = {(a, y): (table.group == a) & (table.label == y)
             for a in (0, 1) for y in (0, 1)}
    for (a, y), mask in masks.items():
        if not mask.any():
            raise EmptyGroup(f"no rows in stratum (group={a}, label={y})")

    d_y1 = [_stratum_mean(d, masks[(a, 1)], a, 1) for a in (0, 1)]
    d_y0 = [_stratum_mean(d, masks[(a, 0)], a, 0) for a in (0, 1)]
    w_y1 = [_stratum_mean(welfare, masks[(a, 1)], a, 1) for a in (0, 1)]
    d_all = [_stratum_mean(d, table.group == a, a, None) for a in (0, 1)]

    eoc_signed = d_y1[0] - d_y1[1]
    veoc_signed = w_y1[0] - w_y1[1]

    eo, ed, dp = [], [], []
    for lender in range(table.n_lenders):
        p = table.probs[:, lender]
        m_y1 = [_stratum_mean(p, masks[(a, 1)], a, 1) for a in (0, 1)]
        m_y0 = [_stratum_mean(p, masks[(a, 0)], a, 0) for a in (0, 1)]
        m_all = [_stratum_mean(p, table.group == a, a, None) for a in (0, 1)]
        eo.append(abs(m_y1[0] - m_y1[1]))
        ed.append(max(abs(m_y1[0] - m_y1[1]), abs(m_y0[0] - m_y0[1])))
        dp.append(abs(m_all[0] - m_all[1]))

    return FairnessLevels(
        eo_per_lender=tuple(eo), ed_per_lender=tuple(ed), dp_per_lender=tuple(dp),
        eoc=abs(eoc_signed), veoc=abs(veoc_signed),
        edc=max(abs(eoc_signed), abs(d_y0[0] - d_y0[1])),
        dpc=abs(d_all[0] - d_all[1]),
        eoc_signed=eoc_signed, veoc_signed=veoc_signed,
    )


def empirical_correlation(table: PredictionTable) -> dict:
    """Per-group Pearson correlation matrices between lenders' offers.

    Estimated on deserving rows served by both lenders of each pair, with
    population normalization, so full expansions of a pmf reproduce the
    pmf-level correlations exactly.  E[B_l B_m] is the mean of p_l * p_m
    (independent randomization across lenders).
    """
    n = table.n_lenders
    out = {}
    for a in (0, 1):
        mat = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                mask = ((table.group == a) & (table.label == 1)
                        & table.served[:, i] & table.served[:, j])
                count = int(mask.sum())
                if count < 2:
                    raise EmptyGroup(
                        f"need >= 2 deserving rows served by lenders {i + 1} "
                        f"and {j + 1} in group {a}, found {count}"
                    )
                pi = table.probs[mask, i]
                pj = table.probs[mask, j]
                mi, mj = float(pi.mean()), float(pj.mean())
                vi, vj = mi * (1.0 - mi), mj * (1.0 - mj)
                if vi <= 0.0 or vj <= 0.0:
                    which = i + 1 if vi <= 0.0 else j + 1
                    raise DegenerateVariance(
                        f"lender {which} is constant on deserving rows of group {a}"
                    )
                cov = float((pi * pj).mean()) - mi * mj
                mat[i, j] = mat[j, i] = cov / np.sqrt(vi * vj)
        out[a] = mat
    return out
