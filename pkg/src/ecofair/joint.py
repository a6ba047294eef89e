"""Exact joint distributions of n competing classifiers' outputs.

A :class:`JointConditionalPMF` stores the probability of every output vector
``b in {0,1}^n`` of the n lenders, conditional on one (group, label) pair.
Vectors are encoded as integers with lender 1 in the most significant bit.
An :class:`EcosystemModel` bundles the four conditional pmfs plus per-group
base rates and is the analytic ground-truth object: every fairness level is
an exact function of it (:func:`pmf_fairness_levels`).

Constructions cover correlated pairs, the extremal couplings attaining the
worst-case bounds, the shared-classifier monoculture, and partially
overlapping borrower pools.  :func:`sample` bridges to the empirical path
with a counter-based generator, so sampling disjoint index ranges is
reproducible and order-independent.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRate,
    EmptySample,
    InfeasibleCorrelation,
    InvalidDistribution,
)
from .levels import FairnessLevels, OverlapRow, UtilityKind, sigma_product

#: exhaustive enumeration is capped at 2**16 cells; larger n requires sampling
MAX_LENDERS = 16

_CLAMP = 1e-15
_SUM_TOL = 1e-9


def _validated(probs: np.ndarray, n: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64).copy()
    if probs.shape != (2 ** n,):
        raise InvalidDistribution(
            f"pmf for {n} lenders must have {2 ** n} cells, got shape {probs.shape}"
        )
    neg = probs < 0.0
    if neg.any():
        worst = probs[neg].min()
        if worst < -_CLAMP:
            raise InvalidDistribution(f"negative pmf cell {worst}")
        probs[neg] = 0.0
    total = float(probs.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise InvalidDistribution(f"pmf cells sum to {total}, not 1")
    if total != 1.0:
        probs /= total
    return probs


@dataclass(frozen=True)
class JointConditionalPMF:
    """Joint pmf of n lenders' outputs for one (group, label) stratum."""

    n: int
    probs: np.ndarray

    def __post_init__(self):
        if not 2 <= self.n <= MAX_LENDERS:
            raise InvalidDistribution(f"n must be in [2, {MAX_LENDERS}], got {self.n}")
        object.__setattr__(self, "probs", _validated(self.probs, self.n))

    def no_offer_mass(self) -> float:
        """Probability that every lender outputs 0."""
        return float(self.probs[0])

    def at_least_one(self) -> float:
        return 1.0 - float(self.probs[0])

    def marginal(self, lender: int) -> float:
        """Pr[lender's output = 1]; lenders are numbered from 1."""
        bit = self.n - lender
        idx = np.arange(2 ** self.n)
        return float(self.probs[(idx >> bit) & 1 == 1].sum())

    def offer_counts(self) -> np.ndarray:
        return np.bitwise_count(np.arange(2 ** self.n, dtype=np.uint32))

    def expected_utility(self, util: UtilityKind) -> float:
        counts = self.offer_counts()
        values = np.where(counts == 0, 0.0, np.where(counts == 1, 1.0, util.k))
        return float(self.probs @ values)

    def pair_correlation(self, lender_a: int, lender_b: int) -> float:
        """Pearson correlation between two lenders' output indicators."""
        ma, mb = self.marginal(lender_a), self.marginal(lender_b)
        va, vb = ma * (1.0 - ma), mb * (1.0 - mb)
        if va <= 0.0 or vb <= 0.0:
            raise DegenerateRate("constant marginal; correlation undefined")
        idx = np.arange(2 ** self.n)
        both = ((idx >> (self.n - lender_a)) & 1) & ((idx >> (self.n - lender_b)) & 1)
        m_ab = float(self.probs[both == 1].sum())
        return (m_ab - ma * mb) / math.sqrt(va * vb)


@dataclass(frozen=True)
class EcosystemModel:
    """Sufficient statistics of a lending ecosystem: the four conditional
    output pmfs and per-group base rates pi_a = Pr[Y=1 | A=a]."""

    pmf_y1_g0: JointConditionalPMF
    pmf_y1_g1: JointConditionalPMF
    pmf_y0_g0: JointConditionalPMF
    pmf_y0_g1: JointConditionalPMF
    base_rate_g0: float = 0.5
    base_rate_g1: float = 0.5

    def __post_init__(self):
        ns = {p.n for p in (self.pmf_y1_g0, self.pmf_y1_g1,
                            self.pmf_y0_g0, self.pmf_y0_g1)}
        if len(ns) != 1:
            raise InvalidDistribution(f"pmfs disagree on lender count: {sorted(ns)}")
        for name in ("base_rate_g0", "base_rate_g1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidDistribution(f"{name} must be in [0, 1], got {v}")

    @property
    def n(self) -> int:
        return self.pmf_y1_g0.n

    def pmf(self, group: int, label: int) -> JointConditionalPMF:
        return {
            (0, 1): self.pmf_y1_g0, (1, 1): self.pmf_y1_g1,
            (0, 0): self.pmf_y0_g0, (1, 0): self.pmf_y0_g1,
        }[(group, label)]

    def base_rate(self, group: int) -> float:
        return self.base_rate_g0 if group == 0 else self.base_rate_g1

    # -- JSON wire format -------------------------------------------------

    def to_json_dict(self) -> dict:
        def cells(p: JointConditionalPMF) -> dict:
            width = self.n
            return {
                format(i, f"0{width}b"): float(v)
                for i, v in enumerate(p.probs) if v != 0.0
            }

        return {
            "n": self.n,
            "base_rates": [self.base_rate_g0, self.base_rate_g1],
            "pmf": {
                "g0y1": cells(self.pmf_y1_g0),
                "g1y1": cells(self.pmf_y1_g1),
                "g0y0": cells(self.pmf_y0_g0),
                "g1y0": cells(self.pmf_y0_g1),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EcosystemModel":
        n = int(doc["n"])

        def pmf(key: str) -> JointConditionalPMF:
            probs = np.zeros(2 ** n)
            for bits, p in doc["pmf"][key].items():
                if len(bits) != n or set(bits) - {"0", "1"}:
                    raise InvalidDistribution(f"bad output-vector key {bits!r}")
                probs[int(bits, 2)] = float(p)
            return JointConditionalPMF(n, probs)

        br = doc["base_rates"]
        return cls(pmf("g0y1"), pmf("g1y1"), pmf("g0y0"), pmf("g1y0"),
                   float(br[0]), float(br[1]))

    @classmethod
    def from_json(cls, text: str) -> "EcosystemModel":
        return cls.from_json_dict(json.loads(text))


def product_pmf(miss_rates) -> JointConditionalPMF:
    """Independent outputs; lender l offers with probability 1 - miss_rates[l]."""
    miss = np.asarray(list(miss_rates), dtype=np.float64)
    n = miss.size
    probs = np.ones(2 ** n)
    for lender in range(1, n + 1):
        bit = n - lender
        idx = np.arange(2 ** n)
        offered = ((idx >> bit) & 1) == 1
        probs[offered] *= 1.0 - miss[lender - 1]
        probs[~offered] *= miss[lender - 1]
    return JointConditionalPMF(n, probs)


def pair_pmf_from_correlation(beta1: float, beta2: float, rho: float) -> JointConditionalPMF:
    """Two-lender pmf with miss marginals (beta1, beta2) and Pearson
    correlation rho between the offer indicators.

    Cells follow from the both-miss mass r = rho sigma1 sigma2 + beta1 beta2:
    the remaining cells are beta1 - r, beta2 - r and 1 - beta1 - beta2 + r.
    """
    for name, b in (("beta1", beta1), ("beta2", beta2)):
        if not 0.0 < b < 1.0:
            raise DegenerateRate(
                f"{name} must lie strictly inside (0, 1); got {b}. "
                "Build degenerate classifiers with product_pmf or extremal_pmf."
            )
    sig = sigma_product(beta1, beta2)
    r = rho * sig + beta1 * beta2
    cells = np.array([
        r,                          # (0, 0) both miss
        beta1 - r,                  # (0, 1)
        beta2 - r,                  # (1, 0)
        1.0 - beta1 - beta2 + r,    # (1, 1)
    ])
    if (cells < -_CLAMP).any():
        raise InfeasibleCorrelation(
            f"rho={rho} infeasible for rates ({beta1}, {beta2}): "
            f"cell values {cells.tolist()}"
        )
    return JointConditionalPMF(2, cells)


def _segments_pmf(n: int, endpoints, covers) -> JointConditionalPMF:
    """pmf from a partition of [0, 1): ``covers(lo, hi, lender)`` says whether
    lender offers on the segment."""
    pts = sorted(set(endpoints) | {0.0, 1.0})
    probs = np.zeros(2 ** n)
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        idx = 0
        for lender in range(1, n + 1):
            if covers(lo, hi, lender):
                idx |= 1 << (n - lender)
        probs[idx] += hi - lo
    return JointConditionalPMF(n, probs)


def extremal_pmf(betas, mode: str) -> JointConditionalPMF:
    """Coupling attaining an extreme of the all-miss probability.

    ``max-overlap`` nests the miss sets (all-miss mass = min beta);
    ``min-overlap`` packs the correct sets disjointly around a circle
    (all-miss mass = max(0, sum beta - (n - 1))).
    """
    betas = [float(b) for b in betas]
    n = len(betas)
    if n < 2:
        raise ValueError("need at least two classifiers")
    for b in betas:
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"rates must be in [0, 1], got {b}")

    if mode == "max-overlap":
        # lender misses iff U < beta: nested miss sets
        return _segments_pmf(
            n, betas, lambda lo, hi, lender: betas[lender - 1] <= lo
        )
    if mode == "min-overlap":
        # lender correct iff U in [t, t + 1 - beta) mod 1, intervals adjacent
        starts, ends, endpoints = [], [], []
        t = 0.0
        for b in betas:
            span = 1.0 - b
            lo = t % 1.0
            hi = lo + span
            starts.append(lo)
            ends.append(hi)
            endpoints.extend((lo, hi % 1.0) if hi > 1.0 else (lo, hi))
            t = hi

        def covers(lo, hi, lender):
            s, e = starts[lender - 1], ends[lender - 1]
            mid = 0.5 * (lo + hi)
            if e <= 1.0:
                return s <= mid < e
            return mid >= s or mid < e - 1.0

        return _segments_pmf(n, endpoints, covers)
    raise ValueError(f"mode must be 'max-overlap' or 'min-overlap', got {mode!r}")


def monoculture_pmf(beta: float, n: int) -> tuple:
    """(group-0 pmf, group-1 pmf) for the shared-classifier monoculture.

    Group 0: every lender relays one shared classifier, so outputs are all
    equal (all-miss mass beta).  Group 1: lenders miss independently
    (all-miss mass beta ** n).  The EOC level is therefore beta - beta ** n.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    shared = np.zeros(2 ** n)
    shared[0] = beta
    shared[-1] = 1.0 - beta
    return JointConditionalPMF(n, shared), product_pmf([beta] * n)


def overlap_group_pmf(beta1: float, beta2: float, row: OverlapRow) -> JointConditionalPMF:
    """Two-lender pmf for one group under partial pool overlap.

    A lender that does not serve a borrower is encoded as a deterministic 0.
    On the shared region the two classifiers miss independently; the miss
    rate of each classifier is the same on its exclusive and shared regions.
    """
    row = row.validate()
    only1 = row.gamma1 - row.gamma_both
    only2 = row.gamma2 - row.gamma_both
    both = row.gamma_both
    cells = np.array([
        only1 * beta1 + only2 * beta2 + both * beta1 * beta2,
        only2 * (1.0 - beta2) + both * beta1 * (1.0 - beta2),
        only1 * (1.0 - beta1) + both * (1.0 - beta1) * beta2,
        both * (1.0 - beta1) * (1.0 - beta2),
    ])
    return JointConditionalPMF(2, cells)


def overlap_pmf(beta1: float, beta2: float,
                overlap_g0: OverlapRow, overlap_g1: OverlapRow) -> tuple:
    """Deserving-side pmfs (group 0, group 1) of two uncorrelated classifiers
    with per-group overlap profiles."""
    return (overlap_group_pmf(beta1, beta2, overlap_g0),
            overlap_group_pmf(beta1, beta2, overlap_g1))


def build_model(pmf_y1_g0: JointConditionalPMF, pmf_y1_g1: JointConditionalPMF,
                pmf_y0_g0: JointConditionalPMF | None = None,
                pmf_y0_g1: JointConditionalPMF | None = None,
                fp_rates=None,
                base_rate_g0: float = 0.5,
                base_rate_g1: float = 0.5) -> EcosystemModel:
    """Assemble a model from deserving-side pmfs.

    Unless explicit undeserving-side pmfs are given, lenders false-offer
    independently with the supplied ``fp_rates`` (default all zero).
    """
    n = pmf_y1_g0.n
    if pmf_y0_g0 is None or pmf_y0_g1 is None:
        alphas = [0.0] * n if fp_rates is None else list(fp_rates)
        default = product_pmf([1.0 - a for a in alphas])
        pmf_y0_g0 = pmf_y0_g0 or default
        pmf_y0_g1 = pmf_y0_g1 or default
    return EcosystemModel(pmf_y1_g0, pmf_y1_g1, pmf_y0_g0, pmf_y0_g1,
                          base_rate_g0, base_rate_g1)


def pmf_fairness_levels(model: EcosystemModel, util: UtilityKind = UtilityKind(1.0)) -> FairnessLevels:
    """All per-lender and ecosystem fairness levels by exact enumeration."""
    d_y1 = [model.pmf_y1_g0.at_least_one(), model.pmf_y1_g1.at_least_one()]
    d_y0 = [model.pmf_y0_g0.at_least_one(), model.pmf_y0_g1.at_least_one()]
    pis = [model.base_rate_g0, model.base_rate_g1]

    eoc_signed = d_y1[0] - d_y1[1]
    welfare = [model.pmf_y1_g0.expected_utility(util),
               model.pmf_y1_g1.expected_utility(util)]
    veoc_signed = welfare[0] - welfare[1]
    edc = max(abs(eoc_signed), abs(d_y0[0] - d_y0[1]))
    d_uncond = [pis[a] * d_y1[a] + (1.0 - pis[a]) * d_y0[a] for a in (0, 1)]
    dpc = abs(d_uncond[0] - d_uncond[1])

    eo, ed, dp = [], [], []
    for lender in range(1, model.n + 1):
        m_y1 = [model.pmf_y1_g0.marginal(lender), model.pmf_y1_g1.marginal(lender)]
        m_y0 = [model.pmf_y0_g0.marginal(lender), model.pmf_y0_g1.marginal(lender)]
        eo.append(abs(m_y1[0] - m_y1[1]))
        ed.append(max(abs(m_y1[0] - m_y1[1]), abs(m_y0[0] - m_y0[1])))
        approve = [pis[a] * m_y1[a] + (1.0 - pis[a]) * m_y0[a] for a in (0, 1)]
        dp.append(abs(approve[0] - approve[1]))

    return FairnessLevels(
        eo_per_lender=tuple(eo), ed_per_lender=tuple(ed), dp_per_lender=tuple(dp),
        eoc=abs(eoc_signed), veoc=abs(veoc_signed), edc=edc, dpc=dpc,
        eoc_signed=eoc_signed, veoc_signed=veoc_signed,
    )


# -- sampling ---------------------------------------------------------------


@dataclass(frozen=True)
class SampleBatch:
    """Counts of sampled (group, label, output vector) triples."""

    n: int
    counts: np.ndarray  # shape (2 groups, 2 labels, 2**n vectors), int64
    total: int
    seed: int

    def __post_init__(self):
        if int(self.counts.sum()) != self.total:
            raise InvalidDistribution("sample counts do not sum to total")


def _row_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Three uniforms per row index in [start, stop), counter-addressed so
    any chunking of the index range yields identical rows.

    Philox advances in blocks of four 64-bit words; each row consumes one
    whole block (the fourth word is discarded)."""
    bitgen = np.random.Philox(seed)
    bitgen.advance(start)
    return np.random.Generator(bitgen).random((stop - start, 4))[:, :3]


def _sample_range(model: EcosystemModel, seed: int, start: int, stop: int,
                  group1_share: float) -> np.ndarray:
    u = _row_uniforms(seed, start, stop)
    groups = (u[:, 0] < group1_share).astype(np.int64)
    pis = np.where(groups == 1, model.base_rate_g1, model.base_rate_g0)
    labels = (u[:, 1] < pis).astype(np.int64)
    vectors = np.zeros(stop - start, dtype=np.int64)
    for a in (0, 1):
        for y in (0, 1):
            mask = (groups == a) & (labels == y)
            if not mask.any():
                continue
            cdf = np.cumsum(model.pmf(a, y).probs)
            vectors[mask] = np.searchsorted(cdf, u[mask, 2], side="right")
    m = 2 ** model.n
    np.clip(vectors, 0, m - 1, out=vectors)
    counts = np.zeros((2, 2, m), dtype=np.int64)
    np.add.at(counts, (groups, labels, vectors), 1)
    return counts


def sample(model: EcosystemModel, total: int, seed: int,
           group1_share: float = 0.5) -> SampleBatch:
    """Draw ``total`` independent borrowers from the model.

    Deterministic given ``seed``; rows are addressed by a counter-based
    generator, so sampling disjoint ranges in parallel and summing counts
    reproduces the single-pass result exactly.
    """
    if total < 1:
        raise EmptySample(f"sample size must be >= 1, got {total}")
    counts = _sample_range(model, seed, 0, total, group1_share)
    return SampleBatch(model.n, counts, total, seed)


def exact_sample_counts(model: EcosystemModel, rows_per_group: int,
                        tol: float = 1e-9) -> SampleBatch:
    """Noise-free expansion: counts exactly proportional to the model cells.

    Every ``cell * rows`` must be integral (within ``tol``), else ValueError.
    """
    m = 2 ** model.n
    counts = np.zeros((2, 2, m), dtype=np.int64)
    for a in (0, 1):
        pi = model.base_rate(a)
        for y in (0, 1):
            stratum = rows_per_group * (pi if y == 1 else 1.0 - pi)
            raw = model.pmf(a, y).probs * stratum
            rounded = np.rint(raw)
            if np.abs(raw - rounded).max() > tol:
                raise ValueError(
                    "cells are not integral at this row count; "
                    f"worst remainder {np.abs(raw - rounded).max()}"
                )
            counts[a, y] = rounded.astype(np.int64)
    total = int(counts.sum())
    return SampleBatch(model.n, counts, total, seed=0)
