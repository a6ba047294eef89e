"""Empirical audits: exact-expansion identities, CSV round trips, errors."""

import numpy as np
import pytest

from ecofair.audit import (
    PredictionTable,
    batch_to_table,
    empirical_correlation,
    empirical_fairness,
    table_from_model,
)
from ecofair.errors import DegenerateVariance, EmptyGroup, ParseFailure
from ecofair.joint import (
    build_model,
    exact_sample_counts,
    pair_pmf_from_correlation,
    pmf_fairness_levels,
    sample,
)
from ecofair.levels import UtilityKind
from ecofair.scenarios import example3_scenario, monoculture_scenario


def small_table(probs, group, label, served=None):
    probs = np.asarray(probs, dtype=np.float64)
    if served is None:
        served = np.ones_like(probs, dtype=bool)
    ids = np.array([str(i) for i in range(len(group))], dtype=object)
    return PredictionTable(ids, np.asarray(group), np.asarray(label),
                           np.asarray(served, dtype=bool), probs)


def full_strata_table():
    # one row in each (group, label) stratum
    return small_table([[1, 0], [0, 1], [1, 1], [0, 0]],
                       [0, 0, 1, 1], [1, 0, 1, 0])


class TestExactExpansion:
    @pytest.mark.parametrize("scenario,rows", [("example3", 400), ("mono", 200)])
    def test_matches_enumeration(self, scenario, rows):
        model = (example3_scenario().model if scenario == "example3"
                 else monoculture_scenario(0.1, 2).model)
        table = batch_to_table(exact_sample_counts(model, rows))
        emp = empirical_fairness(table, UtilityKind(1.5))
        exact = pmf_fairness_levels(model, UtilityKind(1.5))
        for field in ("eoc", "veoc", "edc", "dpc"):
            assert getattr(emp, field) == pytest.approx(getattr(exact, field), abs=1e-12)
        for a, b in zip(emp.eo_per_lender, exact.eo_per_lender):
            assert a == pytest.approx(b, abs=1e-12)

    def test_adjusted_example3_expansion(self):
        model = example3_scenario().adjusted()
        table = batch_to_table(exact_sample_counts(model, 800))
        emp = empirical_fairness(table)
        exact = pmf_fairness_levels(model)
        assert emp.eoc == pytest.approx(exact.eoc, abs=1e-12)
        assert emp.eoc > 0.0
        assert max(emp.eo_per_lender) <= 1e-12


class TestInvariances:
    def test_row_order_and_ids(self):
        model = example3_scenario().model
        table = batch_to_table(exact_sample_counts(model, 400))
        rng = np.random.Generator(np.random.Philox(3))
        perm = rng.permutation(table.n_rows)
        shuffled = PredictionTable(
            np.array([f"z{i}" for i in range(table.n_rows)], dtype=object),
            table.group[perm], table.label[perm],
            table.served[perm], table.probs[perm],
        )
        a = empirical_fairness(table)
        b = empirical_fairness(shuffled)
        assert a.eoc == b.eoc and a.dpc == b.dpc and a.eo_per_lender == b.eo_per_lender

    def test_deterministic_table_frequency_difference(self):
        table = small_table([[1, 0], [0, 0], [1, 1], [0, 0]],
                            [0, 0, 1, 1], [1, 1, 1, 1])
        # need y=0 rows for the full audit; add one per group
        table = small_table([[1, 0], [0, 0], [1, 1], [0, 0], [0, 0], [0, 0]],
                            [0, 0, 1, 1, 0, 1], [1, 1, 1, 1, 0, 0])
        levels = empirical_fairness(table)
        assert levels.eoc == pytest.approx(abs(0.5 - 0.5), abs=1e-15)

    def test_edc_dominates(self):
        rng = np.random.Generator(np.random.Philox(4))
        for _ in range(30):
            n = 200
            table = small_table(rng.random((n, 2)),
                                rng.integers(0, 2, n), rng.integers(0, 2, n))
            levels = empirical_fairness(table)
            assert levels.edc >= levels.eoc - 1e-15


class TestErrors:
    def test_empty_stratum_named(self):
        table = small_table([[1, 0], [0, 1], [1, 1]], [0, 0, 1], [1, 0, 1])
        with pytest.raises(EmptyGroup, match=r"group=1, label=0"):
            empirical_fairness(table)

    def test_probability_of_unserved_must_be_zero(self):
        with pytest.raises(ValueError):
            small_table([[0.5, 0.0]], [0], [1], served=[[False, True]])

    def test_degenerate_variance(self):
        table = small_table([[1, 1], [1, 0], [1, 1], [1, 0]],
                            [0, 0, 1, 1], [1, 1, 1, 1])
        with pytest.raises(DegenerateVariance):
            empirical_correlation(table)


class TestCorrelation:
    def test_shared_classifier_unit(self):
        rng = np.random.Generator(np.random.Philox(5))
        col = rng.integers(0, 2, 400).astype(np.float64)
        table = small_table(np.column_stack([col, col]),
                            rng.integers(0, 2, 400), np.ones(400, dtype=np.int64))
        corr = empirical_correlation(table)
        assert corr[0][0, 1] == pytest.approx(1.0, abs=1e-12)
        assert corr[1][0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_sampled_rho_recovers_target(self):
        model = build_model(pair_pmf_from_correlation(0.3, 0.4, 0.5),
                            pair_pmf_from_correlation(0.3, 0.4, 0.5))
        table = table_from_model(model, 100000, seed=11)
        corr = empirical_correlation(table)
        se = 4.0 / np.sqrt(100000 / 4)
        assert abs(corr[0][0, 1] - 0.5) < se
        assert abs(corr[1][0, 1] - 0.5) < se

    def test_independent_near_zero(self):
        model = build_model(pair_pmf_from_correlation(0.3, 0.4, 0.0),
                            pair_pmf_from_correlation(0.3, 0.4, 0.0))
        table = table_from_model(model, 100000, seed=12)
        corr = empirical_correlation(table)
        assert abs(corr[0][0, 1]) < 0.03

    def test_full_expansion_matches_pmf_correlation(self):
        from ecofair.joint import JointConditionalPMF

        # rational cells so the expansion is exactly proportional
        pmf = JointConditionalPMF(2, np.array([0.15, 0.15, 0.25, 0.45]))
        model = build_model(pmf, pmf, fp_rates=(0.2, 0.2))
        table = batch_to_table(exact_sample_counts(model, 2000))
        corr = empirical_correlation(table)
        assert corr[0][0, 1] == pytest.approx(pmf.pair_correlation(1, 2), abs=1e-12)


class TestCSV:
    def test_roundtrip_bitexact(self):
        rng = np.random.Generator(np.random.Philox(6))
        probs = rng.random((40, 3))
        probs[0, 0] = 1.0 / 3.0
        probs[1, 1] = 0.1 + 0.2  # 0.30000000000000004
        table = small_table(probs, rng.integers(0, 2, 40), rng.integers(0, 2, 40))
        back = PredictionTable.from_csv(table.to_csv())
        assert (back.probs == table.probs).all()
        assert (back.group == table.group).all()
        assert (back.served == table.served).all()
        assert back.to_csv() == table.to_csv()

    def test_header_contract(self):
        table = full_strata_table()
        first = table.to_csv().splitlines()[0]
        assert first == "id,group,label,served_1,served_2,p_1,p_2"

    def test_parse_failure_locates_cell(self):
        text = "id,group,label,served_1,p_1\n0,zero,1,1,1.0\n"
        with pytest.raises(ParseFailure) as err:
            PredictionTable.from_csv(text)
        assert err.value.row == 1 and err.value.column == "group"

    def test_bad_header(self):
        with pytest.raises(ParseFailure):
            PredictionTable.from_csv("id,who,knows\n")


class TestBatchToTable:
    def test_counts_match(self):
        model = example3_scenario().model
        batch = sample(model, 5000, seed=9)
        table = batch_to_table(batch)
        assert table.n_rows == 5000
        assert table.served.all()
        mask = (table.group == 0) & (table.label == 1)
        assert int(mask.sum()) == int(batch.counts[0, 1].sum())
