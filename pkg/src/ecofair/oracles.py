"""Independent brute-force oracles backing the verification suite.

Every function here recomputes a quantity from first principles (grid
search, exhaustive enumeration, iterative proportional fitting) without
touching the closed forms it is used to check.
"""

import math
from dataclasses import dataclass

import numpy as np

from .joint import JointConditionalPMF, overlap_group_pmf
from .levels import OverlapRow
from .postprocess import DerivedPolicy


def pearson_range_bruteforce(beta1: float, beta2: float, steps: int = 200000) -> tuple:
    """Min and max Pearson correlation over all 2x2 joint pmfs with the
    given miss marginals, by scanning the one free cell."""
    lo = hi = None
    for k in range(steps + 1):
        p00 = k / steps
        cells = (p00, beta1 - p00, beta2 - p00, 1.0 - beta1 - beta2 + p00)
        if min(cells) < -1e-15:
            continue
        m1 = cells[2] + cells[3]  # Pr[lender1 offers]
        m2 = cells[1] + cells[3]
        v1, v2 = m1 * (1.0 - m1), m2 * (1.0 - m2)
        if v1 <= 0.0 or v2 <= 0.0:
            continue
        rho = (cells[3] - m1 * m2) / math.sqrt(v1 * v2)
        lo = rho if lo is None else min(lo, rho)
        hi = rho if hi is None else max(hi, rho)
    # include the exact boundary cells, which the grid may straddle
    for p00 in (max(0.0, beta1 + beta2 - 1.0), min(beta1, beta2)):
        cells = (p00, beta1 - p00, beta2 - p00, 1.0 - beta1 - beta2 + p00)
        m1 = cells[2] + cells[3]
        m2 = cells[1] + cells[3]
        v1, v2 = m1 * (1.0 - m1), m2 * (1.0 - m2)
        if min(cells) >= -1e-15 and v1 > 0.0 and v2 > 0.0:
            rho = (cells[3] - m1 * m2) / math.sqrt(v1 * v2)
            lo, hi = min(lo, rho), max(hi, rho)
    return lo, hi


def pair_coupling_levels(beta1: float, beta2: float, steps: int = 200) -> tuple:
    """(min, max) both-miss probability over marginal-preserving couplings
    on a grid of step 1/steps, plus the exact extreme cells."""
    masses = []
    for k in range(steps + 1):
        p00 = k / steps
        cells = (p00, beta1 - p00, beta2 - p00, 1.0 - beta1 - beta2 + p00)
        if min(cells) >= -1e-15:
            masses.append(p00)
    masses.extend([max(0.0, beta1 + beta2 - 1.0), min(beta1, beta2)])
    return min(masses), max(masses)


def overlap_no_offer_range(beta1: float, beta2: float, steps: int = 100) -> tuple:
    """(min, max) no-offer probability over the overlap-profile grid of
    step 1/steps, evaluated through the pmf construction."""
    lo, hi = None, None
    for i in range(steps + 1):
        g1 = i / steps
        for j in range(steps + 1):
            g2 = j / steps
            both = g1 + g2 - 1.0
            if both < -1e-12 or both > min(g1, g2) + 1e-12:
                continue
            row = OverlapRow(g1, g2, min(max(both, 0.0), min(g1, g2)))
            mass = overlap_group_pmf(beta1, beta2, row).no_offer_mass()
            lo = mass if lo is None else min(lo, mass)
            hi = mass if hi is None else max(hi, mass)
    return lo, hi


def ipf_coupling(miss_rates, rng: np.random.Generator,
                 iterations: int = 200) -> JointConditionalPMF:
    """Random coupling with the given miss marginals via iterative
    proportional fitting from a random positive start."""
    miss = np.asarray(list(miss_rates), dtype=np.float64)
    n = miss.size
    probs = rng.dirichlet(np.ones(2 ** n))
    probs = np.maximum(probs, 1e-12)
    arr = probs.reshape((2,) * n)
    for _ in range(iterations):
        for lender in range(n):
            s0 = np.take(arr, 0, axis=lender).sum()
            s1 = np.take(arr, 1, axis=lender).sum()
            target0, target1 = miss[lender], 1.0 - miss[lender]
            shape = [1] * n
            shape[lender] = 2
            factors = np.array([target0 / s0 if s0 > 0 else 0.0,
                                target1 / s1 if s1 > 0 else 0.0]).reshape(shape)
            arr = arr * factors
    arr = arr / arr.sum()
    return JointConditionalPMF(n, arr.reshape(-1))


# -- derived-policy grid oracle ----------------------------------------------


@dataclass(frozen=True)
class GridOracleResult:
    best_loss: float
    best_policy: DerivedPolicy
    points_examined: int


def _group_candidates(q0: float, q1: float, t: float) -> list:
    """(p_pred0, p_pred1) pairs achieving group TPR q1 p1 + q0 p0 = t, at
    the box boundary plus the diagonal point."""
    out = [(t, t)]
    if q1 > 0.0:
        for p0 in (0.0, 1.0):
            p1 = (t - q0 * p0) / q1
            if -1e-12 <= p1 <= 1.0 + 1e-12:
                out.append((p0, min(1.0, max(0.0, p1))))
    if q0 > 0.0:
        for p1 in (0.0, 1.0):
            p0 = (t - q1 * p1) / q0
            if -1e-12 <= p0 <= 1.0 + 1e-12:
                out.append((min(1.0, max(0.0, p0)), p1))
    return out


def policy_grid_oracle(masses: np.ndarray, t_steps: int = 1000) -> GridOracleResult:
    """Scan the common target TPR on a grid of step 1/t_steps; at each
    target, minimize each group's disagreement loss over the feasible
    segment's boundary points.  Independent of the vertex-enumeration fit."""
    q = np.zeros((2, 2))
    for a in (0, 1):
        deserving = masses[a, 1, :].sum()
        q[a, 1] = masses[a, 1, 1] / deserving
        q[a, 0] = masses[a, 1, 0] / deserving

    best_loss, best_policy, examined = math.inf, None, 0
    for k in range(t_steps + 1):
        t = k / t_steps
        per_group = []
        for a in (0, 1):
            m0 = masses[a, 0, 0] + masses[a, 1, 0]
            m1 = masses[a, 0, 1] + masses[a, 1, 1]
            cands = _group_candidates(q[a, 0], q[a, 1], t)
            examined += len(cands)
            per_group.append(min(
                (m0 * p0 + m1 * (1.0 - p1), (p0, p1)) for p0, p1 in cands
            ))
        total = per_group[0][0] + per_group[1][0]
        if total < best_loss:
            best_loss = total
            (p00, p01), (p10, p11) = per_group[0][1], per_group[1][1]
            best_policy = DerivedPolicy(p00, p01, p10, p11)
    return GridOracleResult(best_loss, best_policy, examined)


# -- verification suite -------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_frechet(seed: int = 0, draws: int = 25, steps: int = 20000) -> CheckResult:
    """Closed-form correlation range vs brute force over joint pmfs."""
    from .levels import correlation_feasible_range

    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    cases = [(0.5, 0.5), (0.3, 0.4), (0.1, 0.1)]
    cases += [tuple(rng.uniform(0.05, 0.95, 2)) for _ in range(draws)]
    for b1, b2 in cases:
        lo_f, hi_f = correlation_feasible_range(b1, b2)
        lo_b, hi_b = pearson_range_bruteforce(b1, b2, steps)
        worst = max(worst, abs(lo_f - lo_b), abs(hi_f - hi_b))
    passed = worst <= 1e-9
    return CheckResult("frechet-range", passed,
                       f"max deviation {worst:.3e} over {len(cases)} rate pairs")


def check_worst_case(seed: int = 0, draws: int = 50) -> CheckResult:
    """Extremal couplings attain the bounds; grid search never exceeds them."""
    from .joint import extremal_pmf
    from .levels import (
        eoc_correlation_worst_case,
        eoc_overlap_worst_case,
        eoc_worst_case_n,
    )

    rng = np.random.Generator(np.random.Philox(seed))
    worst_attain, worst_excess = 0.0, -math.inf
    for _ in range(draws):
        b1, b2 = rng.uniform(0.05, 0.95, 2)
        bound = eoc_correlation_worst_case(b1, b2)
        nested = extremal_pmf([b1, b2], "max-overlap").no_offer_mass()
        disjoint = extremal_pmf([b1, b2], "min-overlap").no_offer_mass()
        worst_attain = max(worst_attain, abs((nested - disjoint) - bound))
        lo, hi = pair_coupling_levels(b1, b2, steps=200)
        worst_excess = max(worst_excess, (hi - lo) - bound)

        ov_bound = eoc_overlap_worst_case(b1, b2)
        lo_o, hi_o = overlap_no_offer_range(b1, b2, steps=100)
        worst_excess = max(worst_excess, (hi_o - lo_o) - ov_bound)

        betas = rng.uniform(0.05, 0.95, int(rng.integers(2, 5))).tolist()
        bound_n = eoc_worst_case_n(betas)
        nested = extremal_pmf(betas, "max-overlap").no_offer_mass()
        disjoint = extremal_pmf(betas, "min-overlap").no_offer_mass()
        worst_attain = max(worst_attain, abs((nested - disjoint) - bound_n))
        for _ in range(5):
            coupl0 = ipf_coupling(betas, rng).no_offer_mass()
            coupl1 = ipf_coupling(betas, rng).no_offer_mass()
            worst_excess = max(worst_excess, abs(coupl0 - coupl1) - bound_n)
    passed = worst_attain <= 1e-12 and worst_excess <= 1e-9
    return CheckResult(
        "worst-case-attainment", passed,
        f"attainment gap {worst_attain:.3e}, max excess over bounds {worst_excess:.3e}",
    )


def check_lp_dominance(seed: int = 0, draws: int = 20, t_steps: int = 1000) -> CheckResult:
    """Vertex-enumeration fit never loses to the TPR-grid oracle."""
    from .postprocess import fit_eo_policy_from_masses, policy_tpr

    rng = np.random.Generator(np.random.Philox(seed))
    worst_gap, worst_tpr = -math.inf, 0.0
    for _ in range(draws):
        masses = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        if masses[0, 1, :].sum() <= 0.01 or masses[1, 1, :].sum() <= 0.01:
            continue
        report = fit_eo_policy_from_masses(masses)
        oracle = policy_grid_oracle(masses, t_steps)
        worst_gap = max(worst_gap, report.expected_loss - oracle.best_loss)
        worst_tpr = max(worst_tpr, abs(policy_tpr(masses, report.policy, 0)
                                       - policy_tpr(masses, report.policy, 1)))
    passed = worst_gap <= 1e-6 and worst_tpr <= 1e-9
    return CheckResult(
        "lp-grid-dominance", passed,
        f"max loss excess {worst_gap:.3e}, max TPR gap {worst_tpr:.3e}",
    )


def run_suite(which: str = "all", seed: int = 0) -> list:
    checks = {
        "frechet": check_frechet,
        "worst-case": check_worst_case,
        "lp-dominance": check_lp_dominance,
    }
    if which != "all":
        if which not in checks:
            raise ValueError(f"unknown suite {which!r}; choose all or {list(checks)}")
        return [checks[which](seed=seed)]
    return [fn(seed=seed) for fn in checks.values()]
