"""Derived EO policies: closed-form candidates, vertex fit, application."""

import numpy as np
import pytest

from ecofair.audit import PredictionTable, batch_to_table, empirical_fairness
from ecofair.errors import UnfittableStratum
from ecofair.joint import exact_sample_counts, pmf_fairness_levels
from ecofair.oracles import policy_grid_oracle
from ecofair.postprocess import (
    DerivedPolicy,
    RatePoint,
    apply_policies_to_model,
    apply_policy,
    fit_eo_policy,
    fit_eo_policy_from_masses,
    equalizing_candidates,
    policy_loss,
    policy_tpr,
    stratum_masses,
)
from ecofair.scenarios import example3_scenario, example4_scenario


def uniform_masses(beta_g0, beta_g1, alpha_g0, alpha_g1):
    """Each (group, label) cell has mass 1/4; prediction split by the rates."""
    w = np.zeros((2, 2, 2))
    for a, (b, al) in enumerate(((beta_g0, alpha_g0), (beta_g1, alpha_g1))):
        w[a, 1, 0] = 0.25 * b
        w[a, 1, 1] = 0.25 * (1.0 - b)
        w[a, 0, 1] = 0.25 * al
        w[a, 0, 0] = 0.25 * (1.0 - al)
    return w


def random_masses(rng):
    while True:
        w = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        if w[0, 1, :].sum() > 0.02 and w[1, 1, :].sum() > 0.02:
            return w


class TestEqualizingCandidates:
    def test_reference_instance(self):
        (pol_min, cost_min), (pol_max, cost_max) = equalizing_candidates(0.2, 0.1, 0.1, 0.1)
        assert cost_min == pytest.approx(0.1375, abs=1e-12)
        assert cost_max == pytest.approx(0.025, abs=1e-12)
        assert pol_min.g0_pred0 == pytest.approx(0.5)       # delta raising group 0
        assert pol_max.g1_pred1 == pytest.approx(1 - 1 / 9)  # delta lowering group 1

    def test_equal_rates_identity(self):
        for policy, cost in equalizing_candidates(0.3, 0.3, 0.1, 0.2):
            assert policy == DerivedPolicy.identity()
            assert cost == 0.0

    def test_common_rates(self):
        beta_g0, beta_g1 = 0.2, 0.1
        masses = uniform_masses(beta_g0, beta_g1, 0.1, 0.1)
        (pol_min, _), (pol_max, _) = equalizing_candidates(beta_g0, beta_g1, 0.1, 0.1)
        for pol, target in ((pol_min, 1 - 0.1), (pol_max, 1 - 0.2)):
            t0 = policy_tpr(masses, pol, 0)
            t1 = policy_tpr(masses, pol, 1)
            assert t0 == pytest.approx(t1, abs=1e-12)
            assert t0 == pytest.approx(target, abs=1e-12)

    def test_example4_instance(self):
        beta = 0.25
        _, (pol_max, _) = equalizing_candidates(0.0, beta, 0.0, 0.0)
        assert pol_max.g0_pred1 == pytest.approx(1.0 - beta, abs=1e-15)
        # common miss rate beta on both groups
        point0 = pol_max.transform(RatePoint(0.0, 1.0), 0)
        point1 = pol_max.transform(RatePoint(0.0, 1.0 - beta), 1)
        assert point0.tpr == pytest.approx(1.0 - beta, abs=1e-15)
        assert point1.tpr == pytest.approx(1.0 - beta, abs=1e-15)


class TestFit:
    def test_already_eo_identity(self):
        masses = uniform_masses(0.15, 0.15, 0.1, 0.3)
        report = fit_eo_policy_from_masses(masses)
        assert report.policy == DerivedPolicy.identity()
        assert report.expected_loss == 0.0

    def test_reference_instance_selects_cheaper_candidate(self):
        masses = uniform_masses(0.2, 0.1, 0.1, 0.1)
        report = fit_eo_policy_from_masses(masses)
        _, (pol_max, _) = equalizing_candidates(0.2, 0.1, 0.1, 0.1)
        assert report.policy.as_tuple() == pytest.approx(pol_max.as_tuple(), abs=1e-12)
        assert report.achieved_tpr == pytest.approx(0.8, abs=1e-12)

    def test_dominates_candidate_policies(self):
        masses = uniform_masses(0.2, 0.1, 0.1, 0.1)
        report = fit_eo_policy_from_masses(masses)
        for policy, _ in equalizing_candidates(0.2, 0.1, 0.1, 0.1):
            assert report.expected_loss <= policy_loss(masses, policy) + 1e-12

    def test_grid_oracle_dominance(self):
        rng = np.random.Generator(np.random.Philox(21))
        for _ in range(25):
            masses = random_masses(rng)
            report = fit_eo_policy_from_masses(masses)
            oracle = policy_grid_oracle(masses, t_steps=1000)
            assert report.expected_loss <= oracle.best_loss + 1e-6
            gap = abs(policy_tpr(masses, report.policy, 0)
                      - policy_tpr(masses, report.policy, 1))
            assert gap <= 1e-9

    def test_unfittable_stratum(self):
        masses = uniform_masses(0.2, 0.1, 0.1, 0.1)
        masses[1, 1, :] = 0.0
        with pytest.raises(UnfittableStratum):
            fit_eo_policy_from_masses(masses)

    def test_degenerate_base_flagged(self):
        masses = uniform_masses(0.0, 0.3, 0.1, 0.1)  # group 0 predicts 1 on all y=1
        report = fit_eo_policy_from_masses(masses)
        assert 0 in report.degenerate_groups
        gap = abs(policy_tpr(masses, report.policy, 0)
                  - policy_tpr(masses, report.policy, 1))
        assert gap <= 1e-9


class TestStratumMasses:
    def _table(self):
        probs = np.array([[1.0], [0.0], [1.0], [0.0], [1.0], [0.0], [1.0], [0.0]])
        group = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        label = np.array([1, 1, 0, 0, 1, 1, 0, 0])
        ids = np.array([str(i) for i in range(8)], dtype=object)
        return PredictionTable(ids, group, label,
                               np.ones_like(probs, dtype=bool), probs)

    def test_masses_normalized(self):
        w = stratum_masses(self._table(), 1)
        assert w.sum() == pytest.approx(1.0)
        assert w[0, 1, 1] == pytest.approx(1 / 8)

    def test_weights_override(self):
        weights = np.array([3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        w = stratum_masses(self._table(), 1, weights)
        assert w[0, 1, 1] == pytest.approx(3 / 10)

    def test_randomized_base_rejected(self):
        table = self._table()
        table = table.replace_lender(1, np.full(8, 0.5))
        with pytest.raises(ValueError):
            stratum_masses(table, 1)


class TestApplyPolicy:
    def test_identity_noop(self):
        model = example3_scenario().model
        table = batch_to_table(exact_sample_counts(model, 400))
        out = apply_policy(DerivedPolicy.identity(), table, 1)
        assert (out.probs == table.probs).all()

    def test_locality(self):
        model = example3_scenario().model
        table = batch_to_table(exact_sample_counts(model, 400))
        policy = DerivedPolicy(0.2, 0.9, 0.1, 0.8)
        out = apply_policy(policy, table, 1)
        assert (out.probs[:, 1] == table.probs[:, 1]).all()
        assert (out.group == table.group).all()

    def test_unserved_rows_untouched(self):
        probs = np.array([[1.0, 0.0], [0.0, 0.0]])
        served = np.array([[True, False], [True, False]])
        table = PredictionTable(np.array(["a", "b"], dtype=object),
                                np.array([0, 1]), np.array([1, 1]), served, probs)
        out = apply_policy(DerivedPolicy(0.5, 0.5, 0.5, 0.5), table, 2)
        assert (out.probs[:, 1] == 0.0).all()

    def test_analytic_tpr_reproduced(self):
        model = example3_scenario().model
        table = batch_to_table(exact_sample_counts(model, 400))
        policy = DerivedPolicy(0.0, 1.0, 0.5, 1.0)
        out = apply_policy(policy, table, 1)
        emp = empirical_fairness(out)
        # lender 1 deserving rates: group 0 untouched 0.9; group 1 = 0.8 + 0.2 * 0.5
        mask0 = (out.group == 0) & (out.label == 1)
        mask1 = (out.group == 1) & (out.label == 1)
        assert out.probs[mask0, 0].mean() == pytest.approx(0.9, abs=1e-12)
        assert out.probs[mask1, 0].mean() == pytest.approx(0.9, abs=1e-12)
        assert emp.eo_per_lender[0] == pytest.approx(0.0, abs=1e-12)

    def test_example3_table_story(self):
        scenario = example3_scenario()
        table = batch_to_table(exact_sample_counts(scenario.model, 400))
        for lender in (1, 2):
            table = apply_policy(scenario.policies[lender - 1], table, lender)
        emp = empirical_fairness(table)
        assert max(emp.eo_per_lender) <= 1e-12
        assert emp.eoc == pytest.approx(0.075, abs=1e-12)

    def test_example4_model_story(self):
        scenario = example4_scenario(0.25)
        before = pmf_fairness_levels(scenario.model)
        after = pmf_fairness_levels(scenario.adjusted())
        assert before.eoc == pytest.approx(0.0, abs=1e-15)
        assert after.eoc == pytest.approx(0.25, abs=1e-12)
        # group-0 deserving borrowers now hear back with probability 1 - beta
        assert scenario.adjusted().pmf_y1_g0.at_least_one() == pytest.approx(0.75, abs=1e-12)

    def test_policies_length_checked(self):
        with pytest.raises(ValueError):
            apply_policies_to_model(example3_scenario().model, (None,))


class TestFitOnTable:
    def test_fit_example3_before(self):
        model = example3_scenario().model
        table = batch_to_table(exact_sample_counts(model, 400))
        report = fit_eo_policy(table, 1)
        gap_free = apply_policy(report.policy, table, 1)
        emp = empirical_fairness(gap_free)
        assert emp.eo_per_lender[0] <= 1e-9
        assert report.candidates_examined > 0

    def test_policy_json_roundtrip(self):
        policy = DerivedPolicy(0.25, 1.0, 0.0, 0.875)
        assert DerivedPolicy.from_json(policy.to_json()) == policy
