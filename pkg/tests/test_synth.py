"""Synthetic data generation and CSV ingestion."""

import numpy as np
import pytest

from ecofair.audit import PredictionTable, empirical_correlation
from ecofair.errors import MissingColumn, ParseFailure
from ecofair.learners import LearnerConfig, predict, train
from ecofair.synth import CsvSchema, SyntheticSpec, generate_synthetic, load_csv


class TestGenerate:
    def test_deterministic(self):
        spec = SyntheticSpec(n_rows=500, feature_dim=3)
        a = generate_synthetic(spec, 7)
        b = generate_synthetic(spec, 7)
        assert (a.features == b.features).all()
        assert (a.label == b.label).all()

    def test_zero_noise_threshold(self):
        spec = SyntheticSpec(n_rows=200, feature_dim=1, noise=0.0)
        ds = generate_synthetic(spec, 9)
        np.testing.assert_array_equal(ds.label, (ds.features[:, 0] > 0).astype(int))

    def test_shared_proxy_collapses_group0(self):
        spec = SyntheticSpec(n_rows=400, feature_dim=4, shared_proxy=True)
        ds = generate_synthetic(spec, 5)
        g0 = ds.group == 0
        assert (ds.features[g0] == ds.features[g0, :1]).all()
        assert not (ds.features[~g0] == ds.features[~g0, :1]).all()

    def test_shared_proxy_raises_group0_correlation(self):
        spec = SyntheticSpec(n_rows=30000, feature_dim=6, shared_proxy=True,
                             weights_g0=(2.2 / 6,) * 6, weights_g1=(1 / 6 ** 0.5,) * 6)
        ds = generate_synthetic(spec, 17)
        rng = np.random.Generator(np.random.Philox(18))
        perm = rng.permutation(ds.n_rows)
        ev, tr1, tr2 = perm[:6000], perm[6000:6800], perm[6800:7600]
        models = [train(ds.take(tr), LearnerConfig(kind="logistic"), 0)
                  for tr in (tr1, tr2)]
        sub = ds.take(ev)
        probs = np.column_stack([predict(m, sub)[1] for m in models]).astype(float)
        table = PredictionTable(
            np.array([str(i) for i in range(len(ev))], dtype=object),
            sub.group, sub.label, np.ones_like(probs, dtype=bool), probs)
        corr = empirical_correlation(table)
        assert corr[0][0, 1] > corr[1][0, 1]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_rows=0)
        with pytest.raises(ValueError):
            SyntheticSpec(n_rows=10, feature_dim=2, weights_g0=(1.0,))

    def test_spec_json_roundtrip(self):
        spec = SyntheticSpec(n_rows=100, feature_dim=2, group1_share=0.3,
                             weights_g0=(1.0, 2.0), weights_g1=(0.5, 0.5),
                             noise=0.7, shared_proxy=True)
        assert SyntheticSpec.from_json_dict(spec.to_json_dict()) == spec


FIXTURE = """amount,rate,term,grade,paid
1000,0.1,36,A,yes
2000,0.2,60,B,no
1500,0.15,36,C,yes
"""

SCHEMA = CsvSchema(
    feature_columns=("amount", "rate"),
    group_column="term", group_positive="36",
    label_column="paid", label_positive="yes",
    categorical_columns=("grade",),
)


class TestLoadCsv:
    def test_fixture_matrix(self, tmp_path):
        path = tmp_path / "loans.csv"
        path.write_text(FIXTURE)
        ds = load_csv(str(path), SCHEMA)
        np.testing.assert_allclose(
            ds.features,
            [[1000, 0.1, 1, 0, 0], [2000, 0.2, 0, 1, 0], [1500, 0.15, 0, 0, 1]],
        )
        assert ds.feature_names == ("amount", "rate", "grade=A", "grade=B", "grade=C")
        np.testing.assert_array_equal(ds.group, [1, 0, 1])
        np.testing.assert_array_equal(ds.label, [1, 0, 1])

    def test_three_level_categorical_appends_three(self, tmp_path):
        path = tmp_path / "loans.csv"
        path.write_text(FIXTURE)
        ds = load_csv(str(path), SCHEMA)
        assert ds.features.shape[1] == 5

    def test_missing_column(self, tmp_path):
        path = tmp_path / "loans.csv"
        path.write_text(FIXTURE)
        schema = CsvSchema(("amount", "нет"), "term", "36", "paid", "yes")
        with pytest.raises(MissingColumn):
            load_csv(str(path), schema)

    def test_parse_failure_row_column(self, tmp_path):
        path = tmp_path / "loans.csv"
        path.write_text("amount,rate,term,grade,paid\n1000,bad,36,A,yes\n")
        with pytest.raises(ParseFailure) as err:
            load_csv(str(path), SCHEMA)
        assert err.value.row == 1 and err.value.column == "rate"
