"""Optimal derived Equal-Opportunity classifiers (randomized post-processing).

A derived classifier sees only the group and the base classifier's binary
prediction, and emits 1 with a per-(group, prediction) probability.  Fitting
minimizes the expected disagreement with the base predictions subject to
equal true-positive rates across groups.  With one equality constraint over
the 4-dimensional policy box, an optimum lies at a vertex where at least
three coordinates are binary, so the solver enumerates the finite vertex
set instead of calling an LP library.
"""

import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from .audit import PredictionTable
from .errors import UnfittableStratum
from .joint import EcosystemModel, JointConditionalPMF

_KEYS = ("g0_pred0", "g0_pred1", "g1_pred0", "g1_pred1")


@dataclass(frozen=True)
class RatePoint:
    """(false-positive rate, true-positive rate) of a classifier on one group."""

    fpr: float
    tpr: float

    def __post_init__(self):
        for name, v in (("fpr", self.fpr), ("tpr", self.tpr)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class DerivedPolicy:
    """Probability of emitting 1 for each (group, base prediction) pair."""

    g0_pred0: float
    g0_pred1: float
    g1_pred0: float
    g1_pred1: float

    def __post_init__(self):
        for name in _KEYS:
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def identity(cls) -> "DerivedPolicy":
        return cls(0.0, 1.0, 0.0, 1.0)

    def prob(self, group: int, pred: int) -> float:
        return getattr(self, f"g{group}_pred{pred}")

    def transform(self, point: RatePoint, group: int) -> RatePoint:
        """Rate point of the derived classifier given the base's rates."""
        keep, flip_up = self.prob(group, 1), self.prob(group, 0)
        return RatePoint(
            fpr=keep * point.fpr + flip_up * (1.0 - point.fpr),
            tpr=keep * point.tpr + flip_up * (1.0 - point.tpr),
        )

    def as_tuple(self) -> tuple:
        return (self.g0_pred0, self.g0_pred1, self.g1_pred0, self.g1_pred1)

    def to_json_dict(self) -> dict:
        return {"p": {k: getattr(self, k) for k in _KEYS}}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DerivedPolicy":
        return cls(**{k: float(doc["p"][k]) for k in _KEYS})

    @classmethod
    def from_json(cls, text: str) -> "DerivedPolicy":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class PolicyFitReport:
    """Outcome of fitting a derived EO policy."""

    policy: DerivedPolicy
    achieved_tpr: float
    expected_loss: float
    candidates_examined: int
    degenerate_groups: tuple = ()


def stratum_masses(table: PredictionTable, lender: int,
                   weights: np.ndarray | None = None) -> np.ndarray:
    """Empirical masses w[a, y, yhat] of the lender's served rows.

    The lender's base predictions must be deterministic (0/1) on the table.
    """
    served = table.served[:, lender - 1]
    if not served.any():
        raise UnfittableStratum(f"lender {lender} serves no rows")
    preds = table.probs[:, lender - 1]
    if not np.isin(preds[served], (0.0, 1.0)).all():
        raise ValueError(
            f"lender {lender} has randomized predictions; fit on the base table"
        )
    if weights is None:
        weights = np.ones(table.n_rows)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (table.n_rows,) or (weights < 0).any():
        raise ValueError("weights must be a nonnegative vector, one per row")

    w = np.zeros((2, 2, 2))
    for a in (0, 1):
        for y in (0, 1):
            for yhat in (0, 1):
                mask = served & (table.group == a) & (table.label == y) \
                    & (preds == float(yhat))
                w[a, y, yhat] = weights[mask].sum()
    total = w.sum()
    if total <= 0.0:
        raise UnfittableStratum("all row weights vanish")
    return w / total


def policy_loss(masses: np.ndarray, policy: DerivedPolicy) -> float:
    """Expected disagreement between the derived and base predictions."""
    loss = 0.0
    for a in (0, 1):
        m0 = masses[a, 0, 0] + masses[a, 1, 0]
        m1 = masses[a, 0, 1] + masses[a, 1, 1]
        loss += m0 * policy.prob(a, 0) + m1 * (1.0 - policy.prob(a, 1))
    return loss


def policy_tpr(masses: np.ndarray, policy: DerivedPolicy, group: int) -> float:
    """True-positive rate of the derived classifier on one group."""
    deserving = masses[group, 1, :].sum()
    if deserving <= 0.0:
        raise UnfittableStratum(f"no deserving mass in group {group}")
    q1 = masses[group, 1, 1] / deserving
    return q1 * policy.prob(group, 1) + (1.0 - q1) * policy.prob(group, 0)


def fit_eo_policy_from_masses(masses: np.ndarray, tol: float = 1e-12) -> PolicyFitReport:
    """Vertex enumeration over the equal-TPR polytope slice of the policy box.

    Candidates: the 16 all-binary policies satisfying the TPR equality, plus,
    for each choice of a free coordinate, the solutions of the equality with
    the other three coordinates binary.  Ties in loss are broken
    lexicographically on (g0_pred0, g0_pred1, g1_pred0, g1_pred1).
    """
    q = np.zeros((2, 2))  # q[a, yhat] = Pr[yhat | a, y=1]
    degenerate = []
    for a in (0, 1):
        deserving = masses[a, 1, :].sum()
        if deserving <= 0.0:
            raise UnfittableStratum(f"no deserving rows in group {a}")
        q[a, 0] = masses[a, 1, 0] / deserving
        q[a, 1] = masses[a, 1, 1] / deserving
        if q[a, 0] == 0.0 or q[a, 1] == 0.0:
            degenerate.append(a)

    # constraint coefficients for p = (g0_pred0, g0_pred1, g1_pred0, g1_pred1)
    coeff = np.array([q[0, 0], q[0, 1], -q[1, 0], -q[1, 1]])

    candidates = []
    for point in product((0.0, 1.0), repeat=4):
        if abs(float(coeff @ np.array(point))) <= tol:
            candidates.append(point)
    for free in range(4):
        others = [i for i in range(4) if i != free]
        if coeff[free] == 0.0:
            continue
        for vals in product((0.0, 1.0), repeat=3):
            rhs = -sum(coeff[i] * v for i, v in zip(others, vals))
            x = rhs / coeff[free]
            if -tol <= x <= 1.0 + tol:
                point = [0.0] * 4
                for i, v in zip(others, vals):
                    point[i] = v
                point[free] = min(1.0, max(0.0, x))
                candidates.append(tuple(point))

    if not candidates:
        raise UnfittableStratum("no feasible equal-TPR policy found")

    best = min(
        candidates,
        key=lambda point: (policy_loss(masses, DerivedPolicy(*point)), point),
    )
    policy = DerivedPolicy(*best)
    tpr0 = policy_tpr(masses, policy, 0)
    tpr1 = policy_tpr(masses, policy, 1)
    if abs(tpr0 - tpr1) > 1e-9:
        raise UnfittableStratum(
            f"fitted policy has TPR gap {abs(tpr0 - tpr1)}; inputs degenerate"
        )
    return PolicyFitReport(
        policy=policy,
        achieved_tpr=0.5 * (tpr0 + tpr1),
        expected_loss=policy_loss(masses, policy),
        candidates_examined=len(candidates),
        degenerate_groups=tuple(degenerate),
    )


def fit_eo_policy(table: PredictionTable, lender: int,
                  weights: np.ndarray | None = None) -> PolicyFitReport:
    """Fit the loss-minimal derived EO policy for one lender on a table."""
    return fit_eo_policy_from_masses(stratum_masses(table, lender, weights))


def equalizing_candidates(beta_g0: float, beta_g1: float,
                      alpha_g0: float, alpha_g1: float) -> list:
    """The two closed-form vertex policies under a uniform fitting
    distribution (each (group, label) cell has mass 1/4).

    The first candidate equalizes at the smaller false-negative rate by
    flipping some of the higher-rate group's negative predictions to 1; the
    second equalizes at the larger rate by flipping some of the lower-rate
    group's positive predictions to 0.  Costs are the closed-form flip
    fractions delta_hi (1 - alpha_hi + beta_hi) / 4 and
    delta_lo (alpha_lo + 1 - beta_hi) / 4.
    """
    for name, v in (("beta_g0", beta_g0), ("beta_g1", beta_g1),
                    ("alpha_g0", alpha_g0), ("alpha_g1", alpha_g1)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    if beta_g0 == beta_g1:
        identity = DerivedPolicy.identity()
        return [(identity, 0.0), (identity, 0.0)]

    hi = 0 if beta_g0 > beta_g1 else 1
    lo = 1 - hi
    beta_hi = (beta_g0, beta_g1)[hi]
    beta_lo = (beta_g0, beta_g1)[lo]
    alpha_hi = (alpha_g0, alpha_g1)[hi]
    alpha_lo = (alpha_g0, alpha_g1)[lo]

    entries = {f"g{g}_pred{p}": float(p) for g in (0, 1) for p in (0, 1)}
    delta_hi = (beta_hi - beta_lo) / beta_hi
    entries[f"g{hi}_pred0"] = delta_hi
    to_min = DerivedPolicy(**entries)
    cost_min = delta_hi * (1.0 - alpha_hi + beta_hi) / 4.0

    entries = {f"g{g}_pred{p}": float(p) for g in (0, 1) for p in (0, 1)}
    delta_lo = (beta_hi - beta_lo) / (1.0 - beta_lo)
    entries[f"g{lo}_pred1"] = 1.0 - delta_lo
    to_max = DerivedPolicy(**entries)
    cost_max = delta_lo * (alpha_lo + 1.0 - beta_hi) / 4.0

    return [(to_min, cost_min), (to_max, cost_max)]


def apply_policy(policy: DerivedPolicy, table: PredictionTable,
                 lender: int) -> PredictionTable:
    """Post-process one lender's offer probabilities row by row.

    New probability = p(a, 1) * old + p(a, 0) * (1 - old) on rows the lender
    serves; other lenders and non-served rows are untouched.
    """
    old = table.probs[:, lender - 1]
    keep = np.where(table.group == 0, policy.g0_pred1, policy.g1_pred1)
    flip = np.where(table.group == 0, policy.g0_pred0, policy.g1_pred0)
    new = keep * old + flip * (1.0 - old)
    served = table.served[:, lender - 1]
    return table.replace_lender(lender, np.where(served, new, old))


def _apply_to_pmf(pmf: JointConditionalPMF, group: int, policies) -> JointConditionalPMF:
    """Exact pmf of derived outputs; lenders randomize independently."""
    n = pmf.n
    arr = pmf.probs.reshape((2,) * n).copy()
    for lender, policy in enumerate(policies, start=1):
        if policy is None:
            continue
        keep = policy.prob(group, 1)
        flip = policy.prob(group, 0)
        off = np.take(arr, 0, axis=lender - 1)
        on = np.take(arr, 1, axis=lender - 1)
        new_on = keep * on + flip * off
        new_off = (1.0 - keep) * on + (1.0 - flip) * off
        arr = np.stack([new_off, new_on], axis=lender - 1)
    return JointConditionalPMF(n, arr.reshape(-1))


def apply_policies_to_model(model: EcosystemModel, policies) -> EcosystemModel:
    """Exact ecosystem model after post-processing each lender.

    ``policies`` holds one :class:`DerivedPolicy` or ``None`` per lender.
    """
    policies = list(policies)
    if len(policies) != model.n:
        raise ValueError(f"need one policy (or None) per lender, got {len(policies)}")
    return EcosystemModel(
        pmf_y1_g0=_apply_to_pmf(model.pmf_y1_g0, 0, policies),
        pmf_y1_g1=_apply_to_pmf(model.pmf_y1_g1, 1, policies),
        pmf_y0_g0=_apply_to_pmf(model.pmf_y0_g0, 0, policies),
        pmf_y0_g1=_apply_to_pmf(model.pmf_y0_g1, 1, policies),
        base_rate_g0=model.base_rate_g0,
        base_rate_g1=model.base_rate_g1,
    )
