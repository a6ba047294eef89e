"""Named worked scenarios, runnable from the CLI in one command each.

* ``example1`` / ``monoculture``: every lender relays one shared classifier
  on group 0 and an independent classifier on group 1 (correlation 1 vs 0).
* ``example3``: individually biased but ecosystem-fair classifiers whose EO
  adjustment breaks ecosystem fairness through the correlation gap.
* ``example4``: one lender serves only group 1; adjusting the full-pool
  lender to a common false-negative rate introduces an EOC level of beta.

Undeserving-side false-positive rates and base rates are not part of the
stories; the defaults below (alpha = 0.1 for example3, perfect classifiers
elsewhere, base rates 0.5) are fixed so outputs are reproducible.
"""

from dataclasses import dataclass

import numpy as np

from .joint import (
    EcosystemModel,
    JointConditionalPMF,
    build_model,
    monoculture_pmf,
    pair_pmf_from_correlation,
    product_pmf,
)
from .postprocess import DerivedPolicy, apply_policies_to_model, equalizing_candidates

SCENARIOS = ("example1", "example3", "example4", "monoculture")


@dataclass(frozen=True)
class Scenario:
    """A model plus the post-processing policies its story applies."""

    name: str
    model: EcosystemModel
    policies: tuple  # one DerivedPolicy or None per lender

    def adjusted(self) -> EcosystemModel:
        return apply_policies_to_model(self.model, self.policies)


def monoculture_scenario(beta: float = 0.1, n: int = 2,
                         base_rate: float = 0.5) -> Scenario:
    """Shared third-party classifier on group 0, independent misses on
    group 1; EOC level beta - beta ** n.  No adjustment phase."""
    g0, g1 = monoculture_pmf(beta, n)
    shared_y0 = np.zeros(2 ** n)
    shared_y0[0] = 1.0
    model = EcosystemModel(
        pmf_y1_g0=g0, pmf_y1_g1=g1,
        pmf_y0_g0=JointConditionalPMF(n, shared_y0),
        pmf_y0_g1=product_pmf([1.0] * n),
        base_rate_g0=base_rate, base_rate_g1=base_rate,
    )
    return Scenario("monoculture", model, (None,) * n)


def example3_scenario(alpha: float = 0.1, base_rate: float = 0.5) -> Scenario:
    """Both lenders miss 10% of group-0 and 20% of group-1 deserving
    borrowers, fully correlated on group 0 and 0.375-correlated on group 1,
    so both groups' both-miss mass is exactly 0.1 and the ecosystem is fair.
    The adjustment randomizes each lender's negative predictions on group 1
    upward with probability 1/2, equalizing its rates at 0.1."""
    model = build_model(
        pmf_y1_g0=pair_pmf_from_correlation(0.1, 0.1, 1.0),
        pmf_y1_g1=pair_pmf_from_correlation(0.2, 0.2, 0.375),
        fp_rates=(alpha, alpha),
        base_rate_g0=base_rate, base_rate_g1=base_rate,
    )
    policy = DerivedPolicy(g0_pred0=0.0, g0_pred1=1.0, g1_pred0=0.5, g1_pred1=1.0)
    return Scenario("example3", model, (policy, policy))


def example4_scenario(beta: float = 0.25, base_rate: float = 0.5) -> Scenario:
    """Lender 1 serves everyone, perfectly on group 0 and with miss rate
    beta on group 1; lender 2 serves group 1 only, perfectly.  Everyone
    deserving gets an offer, so EOC is 0.  Equalizing lender 1 at the common
    rate beta randomizes its group-0 offers down to 1 - beta."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    # output vectors (lender1, lender2); lender 2 emits 0 for group 0
    y1_g0 = np.array([0.0, 0.0, 1.0, 0.0])           # always (1, 0)
    y1_g1 = np.array([0.0, beta, 0.0, 1.0 - beta])   # lender 2 always offers
    y0 = np.array([1.0, 0.0, 0.0, 0.0])              # no false offers
    model = EcosystemModel(
        pmf_y1_g0=JointConditionalPMF(2, y1_g0),
        pmf_y1_g1=JointConditionalPMF(2, y1_g1),
        pmf_y0_g0=JointConditionalPMF(2, y0),
        pmf_y0_g1=JointConditionalPMF(2, y0),
        base_rate_g0=base_rate, base_rate_g1=base_rate,
    )
    # the candidate equalizing at the larger rate; flips group-0 positives down
    policy = equalizing_candidates(0.0, beta, 0.0, 0.0)[1][0]
    return Scenario("example4", model, (policy, None))


def get_scenario(name: str, beta: float | None = None, n: int | None = None) -> Scenario:
    if name in ("example1", "monoculture"):
        return monoculture_scenario(beta=0.1 if beta is None else beta,
                                    n=2 if n is None else n)
    if name == "example3":
        return example3_scenario()
    if name == "example4":
        return example4_scenario(beta=0.25 if beta is None else beta)
    raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
