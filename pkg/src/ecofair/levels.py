"""Closed-form fairness levels and worst-case bounds for competing classifiers.

Conventions used throughout:

* groups are coded 0 and 1; ``beta`` is a false-negative rate, ``alpha`` a
  false-positive rate, ``eta`` an overall approval probability;
* a "level" is the absolute gap of the relevant quantity across groups, so
  0 means perfectly fair and larger means less fair;
* ``sigma(beta) = sqrt(beta * (1 - beta))`` is the standard deviation of a
  Bernoulli offer indicator with miss probability ``beta``.

All functions are pure and thread-safe.
"""

import math
from dataclasses import dataclass

from .errors import DegenerateRate, InfeasibleCorrelation, InvalidOverlap

#: tolerance for exact-formula identities (equal rates, equal correlations)
EXACT_TOL = 1e-12
#: slack absorbed when checking Frechet feasibility of user-supplied rhos
FEASIBILITY_SLACK = 1e-9


def sigma_product(beta1: float, beta2: float) -> float:
    """sqrt(beta1 (1-beta1) beta2 (1-beta2)), computed with a single sqrt."""
    return math.sqrt(beta1 * (1.0 - beta1) * beta2 * (1.0 - beta2))


@dataclass(frozen=True)
class CorrelationPair:
    """Pearson correlation of two lenders' offer indicators, per group."""

    rho_g0: float
    rho_g1: float


@dataclass(frozen=True)
class UtilityKind:
    """0-1-k preferences: 0 offers -> 0, one offer -> 1, two or more -> k.

    ``k = 1`` encodes the flat "any offer is as good as many" preference.
    """

    k: float = 1.0

    def __post_init__(self):
        if self.k < 1.0:
            raise ValueError(f"utility multiplier k must be >= 1, got {self.k}")

    def value_of_count(self, r: int) -> float:
        if r <= 0:
            return 0.0
        return 1.0 if r == 1 else self.k


@dataclass(frozen=True)
class ErrorProfile:
    """Per-group error rates of one classifier."""

    fn_rate_g0: float
    fn_rate_g1: float
    fp_rate_g0: float
    fp_rate_g1: float

    def __post_init__(self):
        for name in ("fn_rate_g0", "fn_rate_g1", "fp_rate_g0", "fp_rate_g1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def is_eo(self, tol: float = EXACT_TOL) -> bool:
        return abs(self.fn_rate_g0 - self.fn_rate_g1) <= tol

    def is_ed(self, tol: float = EXACT_TOL) -> bool:
        return self.is_eo(tol) and abs(self.fp_rate_g0 - self.fp_rate_g1) <= tol


@dataclass(frozen=True)
class OverlapRow:
    """Served-borrower fractions of one group: by lender 1, lender 2, both."""

    gamma1: float
    gamma2: float
    gamma_both: float

    def validate(self, tol: float = EXACT_TOL) -> "OverlapRow":
        for name, v in (("gamma1", self.gamma1), ("gamma2", self.gamma2),
                        ("gamma_both", self.gamma_both)):
            if not 0.0 <= v <= 1.0:
                raise InvalidOverlap(f"{name} must be in [0, 1], got {v}")
        if abs(self.gamma1 + self.gamma2 - self.gamma_both - 1.0) > tol:
            raise InvalidOverlap(
                "gamma1 + gamma2 - gamma_both must equal 1, got "
                f"{self.gamma1} + {self.gamma2} - {self.gamma_both}"
            )
        if self.gamma_both > min(self.gamma1, self.gamma2) + tol:
            raise InvalidOverlap("gamma_both exceeds min(gamma1, gamma2)")
        return self


@dataclass(frozen=True)
class FairnessLevels:
    """Per-lender and ecosystem fairness levels.

    All level fields are absolute gaps.  ``eoc_signed`` and ``veoc_signed``
    keep the group-0-minus-group-1 sign, since which group is worse off under
    0-1-k preferences flips with k.
    """

    eo_per_lender: tuple
    ed_per_lender: tuple
    dp_per_lender: tuple
    eoc: float
    veoc: float
    edc: float
    dpc: float
    eoc_signed: float = 0.0
    veoc_signed: float = 0.0

    def as_dict(self) -> dict:
        return {
            "eo_per_lender": list(self.eo_per_lender),
            "ed_per_lender": list(self.ed_per_lender),
            "dp_per_lender": list(self.dp_per_lender),
            "eoc": self.eoc,
            "veoc": self.veoc,
            "edc": self.edc,
            "dpc": self.dpc,
            "eoc_signed": self.eoc_signed,
            "veoc_signed": self.veoc_signed,
        }


def _check_rate_open(beta: float, name: str) -> None:
    if not 0.0 < beta < 1.0:
        raise DegenerateRate(
            f"{name} must lie strictly inside (0, 1) for correlation-based "
            f"formulas, got {beta}; use the joint-model pmfs for degenerate rates"
        )


def correlation_feasible_range(beta1: float, beta2: float) -> tuple:
    """Frechet feasibility interval [rho_min, rho_max] for the Pearson
    correlation of two Bernoulli misses with marginal rates beta1, beta2.

    The both-miss probability r is bounded by
    max(0, beta1 + beta2 - 1) <= r <= min(beta1, beta2), and
    rho = (r - beta1 beta2) / (sigma1 sigma2).
    """
    _check_rate_open(beta1, "beta1")
    _check_rate_open(beta2, "beta2")
    sig = sigma_product(beta1, beta2)
    r_lo = max(0.0, beta1 + beta2 - 1.0)
    r_hi = min(beta1, beta2)
    return ((r_lo - beta1 * beta2) / sig, (r_hi - beta1 * beta2) / sig)


def _check_rho(rho: float, beta1: float, beta2: float, name: str) -> None:
    lo, hi = correlation_feasible_range(beta1, beta2)
    if rho < lo - FEASIBILITY_SLACK or rho > hi + FEASIBILITY_SLACK:
        raise InfeasibleCorrelation(
            f"{name}={rho} outside feasible range [{lo}, {hi}] "
            f"for rates ({beta1}, {beta2})"
        )


def eoc_correlation_level(beta1: float, beta2: float, corr: CorrelationPair) -> float:
    """EOC level of two EO classifiers: sigma1 sigma2 |rho0 - rho1|."""
    _check_rho(corr.rho_g0, beta1, beta2, "rho_g0")
    _check_rho(corr.rho_g1, beta1, beta2, "rho_g1")
    return sigma_product(beta1, beta2) * abs(corr.rho_g0 - corr.rho_g1)


def eoc_correlation_worst_case(beta1: float, beta2: float) -> float:
    """Worst-case EOC level over all feasible per-group correlations."""
    return min(beta1, beta2) - max(0.0, beta1 + beta2 - 1.0)


def veoc_correlation_level(util: UtilityKind, beta1: float, beta2: float,
                           corr: CorrelationPair) -> float:
    """Welfare-based EOC level under 0-1-k preferences:
    sigma1 sigma2 |(k - 2)(rho0 - rho1)|.  Vanishes identically at k = 2.
    """
    _check_rho(corr.rho_g0, beta1, beta2, "rho_g0")
    _check_rho(corr.rho_g1, beta1, beta2, "rho_g1")
    return sigma_product(beta1, beta2) * abs((util.k - 2.0) * (corr.rho_g0 - corr.rho_g1))


def veoc_worst_case(util: UtilityKind, beta1: float, beta2: float) -> float:
    return abs(util.k - 2.0) * eoc_correlation_worst_case(beta1, beta2)


def eoc_worst_case_n(betas) -> float:
    """Worst-case EOC level for n >= 2 EO classifiers.

    The all-miss probability of n classifiers with rates beta_i ranges over
    [max(0, sum beta_i - (n - 1)), min beta_i] (disjoint correct sets at one
    extreme, nested miss sets at the other), hence the worst-case gap below.
    For all-equal beta <= 1 - 1/n this is exactly beta.
    """
    betas = list(betas)
    if len(betas) < 2:
        raise ValueError("need at least two classifiers")
    for b in betas:
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"rates must be in [0, 1], got {b}")
    return min(betas) - max(0.0, sum(betas) - (len(betas) - 1.0))


def eoc_overlap_level(beta1: float, beta2: float,
                      overlap_g0: OverlapRow, overlap_g1: OverlapRow) -> float:
    """EOC level of two uncorrelated EO classifiers serving partial pools:
    |(g2_0 - g2_1) beta1 + (g1_0 - g1_1) beta2 + (g_1 - g_0) beta1 beta2|.
    """
    g0 = overlap_g0.validate()
    g1 = overlap_g1.validate()
    return abs(
        (g0.gamma2 - g1.gamma2) * beta1
        + (g0.gamma1 - g1.gamma1) * beta2
        + (g1.gamma_both - g0.gamma_both) * beta1 * beta2
    )


def eoc_overlap_worst_case(beta1: float, beta2: float) -> float:
    return max(beta1, beta2) - beta1 * beta2


def dpc_correlation_level(eta1: float, eta2: float, corr: CorrelationPair) -> float:
    """DPC level of two DP classifiers with approval probabilities eta1, eta2.

    Identical to the EOC formula under beta -> 1 - eta: the no-offer
    indicator of approvals has miss probability 1 - eta.
    """
    return eoc_correlation_level(1.0 - eta1, 1.0 - eta2, corr)


def dpc_correlation_worst_case(eta1: float, eta2: float) -> float:
    return eoc_correlation_worst_case(1.0 - eta1, 1.0 - eta2)


def dpc_overlap_level(eta1: float, eta2: float,
                      overlap_g0: OverlapRow, overlap_g1: OverlapRow) -> float:
    return eoc_overlap_level(1.0 - eta1, 1.0 - eta2, overlap_g0, overlap_g1)


def dpc_overlap_worst_case(eta1: float, eta2: float) -> float:
    return eoc_overlap_worst_case(1.0 - eta1, 1.0 - eta2)


def edc_lower_bound(levels: FairnessLevels) -> float:
    """The EDC level is bounded below by the EOC level; returns that bound."""
    if levels.edc < levels.eoc - EXACT_TOL:
        raise ValueError(
            f"inconsistent levels: edc={levels.edc} < eoc={levels.eoc}"
        )
    return levels.eoc
