"""Experiment pipeline: replicate sampling, training, adjustment, audit.

Per replicate the harness draws training data for each lender according to
the experiment mode, trains, predicts on a fixed held-out evaluation split,
audits the ecosystem (before), fits a derived EO policy per eligible lender
on the fit split, applies it, and audits again (after).  A replicate is
"harmed" when the EOC level strictly increased.

Replicates are keyed by index and their randomness derives solely from
(base_seed, index), so results are identical for any worker count, and a
failed replicate is recorded rather than dropped.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import accel
from .audit import PredictionTable, empirical_fairness
from .errors import EcofairError, EmptyData, InsufficientRatios, NoReplicates
from .learners import Dataset, LearnerConfig, predict, train
from .levels import UtilityKind
from .postprocess import apply_policy, fit_eo_policy
from .synth import CsvSchema, SyntheticSpec, generate_synthetic, load_csv

MODES = ("shared-data", "split-by-column", "independent-samples",
         "subset-serving", "third-party")

#: baselines at or below this are excluded from ratio statistics
RATIO_EPS = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment."""

    n_lenders: int
    mode: str
    learners: tuple
    train_size: int
    eval_size: int
    replicates: int = 500
    fit_split: str = "training"         # "training" | "calibration"
    base_seed: int = 0
    synthetic: SyntheticSpec | None = None
    csv_path: str | None = None
    csv_schema: CsvSchema | None = None
    split_column: str | None = None     # split-by-column: feature name
    split_values: tuple = ()            # per-lender tuple of admissible values
    serve_groups: tuple = ()            # subset-serving: per-lender group or None
    third_party_group: int = 0

    def __post_init__(self):
        if self.n_lenders not in (2, 3):
            raise ValueError("n_lenders must be 2 or 3")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.learners) != self.n_lenders:
            raise ValueError("need one LearnerConfig per lender")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.fit_split not in ("training", "calibration"):
            raise ValueError("fit_split must be 'training' or 'calibration'")
        if (self.synthetic is None) == (self.csv_path is None):
            raise ValueError("exactly one of synthetic spec or csv path required")
        if self.mode == "split-by-column":
            if not self.split_column or len(self.split_values) != self.n_lenders:
                raise ValueError("split-by-column needs a column and per-lender values")
        if self.mode == "subset-serving" and len(self.serve_groups) != self.n_lenders:
            raise ValueError("subset-serving needs one group restriction per lender")

    def to_json_dict(self) -> dict:
        doc = {
            "n_lenders": self.n_lenders,
            "mode": self.mode,
            "learners": [lc.to_json_dict() for lc in self.learners],
            "train_size": self.train_size,
            "eval_size": self.eval_size,
            "replicates": self.replicates,
            "fit_split": self.fit_split,
            "base_seed": self.base_seed,
        }
        if self.synthetic is not None:
            doc["data_source"] = {"synthetic": self.synthetic.to_json_dict()}
        else:
            doc["data_source"] = {"csv": {"path": self.csv_path,
                                          "schema": self.csv_schema.to_json_dict()}}
        if self.mode == "split-by-column":
            doc["mode_params"] = {"column": self.split_column,
                                  "values": [list(v) for v in self.split_values]}
        elif self.mode == "subset-serving":
            doc["mode_params"] = {"serve_groups": list(self.serve_groups)}
        elif self.mode == "third-party":
            doc["mode_params"] = {"third_party_group": self.third_party_group}
        else:
            doc["mode_params"] = {}
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        source = doc["data_source"]
        synthetic = csv_path = csv_schema = None
        if "synthetic" in source:
            synthetic = SyntheticSpec.from_json_dict(source["synthetic"])
        else:
            csv_path = source["csv"]["path"]
            csv_schema = CsvSchema.from_json_dict(source["csv"]["schema"])
        params = doc.get("mode_params", {})
        return cls(
            n_lenders=doc["n_lenders"],
            mode=doc["mode"],
            learners=tuple(LearnerConfig.from_json_dict(lc) for lc in doc["learners"]),
            train_size=doc["train_size"],
            eval_size=doc["eval_size"],
            replicates=doc.get("replicates", 500),
            fit_split=doc.get("fit_split", "training"),
            base_seed=doc.get("base_seed", 0),
            synthetic=synthetic,
            csv_path=csv_path,
            csv_schema=csv_schema,
            split_column=params.get("column"),
            split_values=tuple(tuple(v) for v in params.get("values", ())),
            serve_groups=tuple(params.get("serve_groups", ())),
            third_party_group=params.get("third_party_group", 0),
        )


@dataclass(frozen=True)
class ReplicateResult:
    """Before/after measurements of one replicate.

    Numeric fields stay ``None`` on failed replicates so result lists from
    identical runs compare equal.
    """

    replicate: int
    eoc_before: float | None = None
    eoc_after: float | None = None
    eo_before: tuple = ()
    eo_after: tuple = ()
    harmed: bool = False
    ratio: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class IntervalEstimate:
    """Point estimate with a 95% confidence interval."""

    point: float
    lo: float
    hi: float
    n: int
    method: str = "normal-approximation"
    excluded_count: int = 0

    def as_dict(self) -> dict:
        return {"point": self.point, "lo": self.lo, "hi": self.hi, "n": self.n,
                "method": self.method, "excluded_count": self.excluded_count}


def _materialize(cfg: ExperimentConfig) -> Dataset:
    if cfg.synthetic is not None:
        seed = int(np.random.SeedSequence([cfg.base_seed, 0]).generate_state(1)[0])
        return generate_synthetic(cfg.synthetic, seed)
    return load_csv(cfg.csv_path, cfg.csv_schema)


def _eval_split(cfg: ExperimentConfig, ds: Dataset) -> tuple:
    """One fixed evaluation split per experiment, drawn from base_seed."""
    if cfg.eval_size + cfg.train_size > ds.n_rows:
        raise EmptyData(
            f"dataset has {ds.n_rows} rows; need >= eval_size + train_size "
            f"= {cfg.eval_size + cfg.train_size}"
        )
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([cfg.base_seed, 1]))
    )
    perm = rng.permutation(ds.n_rows)
    return perm[:cfg.eval_size], perm[cfg.eval_size:]


def _column_index(ds: Dataset, column: str) -> int:
    try:
        return ds.feature_names.index(column)
    except ValueError:
        raise EmptyData(f"split column {column!r} not among {ds.feature_names}") from None


def _draw(rng: np.random.Generator, pool: np.ndarray, size: int) -> np.ndarray:
    if pool.size < size:
        raise EmptyData(f"pool of {pool.size} rows cannot supply {size} training rows")
    return rng.choice(pool, size=size, replace=False)


def _training_pools(cfg: ExperimentConfig, ds: Dataset, pool: np.ndarray) -> list:
    """Index pool each lender may draw training rows from."""
    if cfg.mode == "split-by-column":
        j = _column_index(ds, cfg.split_column)
        pools = []
        for values in cfg.split_values:
            admissible = np.isin(ds.features[pool, j], np.asarray(values, dtype=float))
            pools.append(pool[admissible])
        return pools
    if cfg.mode == "subset-serving":
        pools = []
        for g in cfg.serve_groups:
            pools.append(pool if g is None else pool[ds.group[pool] == g])
        return pools
    return [pool] * cfg.n_lenders


def _run_replicate(cfg: ExperimentConfig, ds: Dataset, eval_idx: np.ndarray,
                   pool: np.ndarray, r: int) -> ReplicateResult:
    ss = np.random.SeedSequence([cfg.base_seed, 2, r])
    children = ss.spawn(cfg.n_lenders + 2)  # lenders, third party, calibration

    pools = _training_pools(cfg, ds, pool)
    models = []
    train_idx = []
    for lender in range(cfg.n_lenders):
        rng = np.random.Generator(np.random.Philox(children[lender]))
        if cfg.mode == "shared-data" and lender > 0:
            idx = train_idx[0]
        else:
            idx = _draw(rng, pools[lender], cfg.train_size)
        train_idx.append(idx)
        seed = int(children[lender].generate_state(1)[0])
        models.append(train(ds.take(idx), cfg.learners[lender], seed))

    third_model = None
    if cfg.mode == "third-party":
        rng = np.random.Generator(np.random.Philox(children[cfg.n_lenders]))
        idx = _draw(rng, pool, cfg.train_size)
        seed = int(children[cfg.n_lenders].generate_state(1)[0])
        third_model = train(ds.take(idx), cfg.learners[0], seed)

    def lender_outputs(lender: int, idx: np.ndarray) -> tuple:
        sub = ds.take(idx)
        _, binary = predict(models[lender], sub)
        if third_model is not None:
            shared = predict(third_model, sub)[1]
            on_group = sub.group == cfg.third_party_group
            binary = np.where(on_group, shared, binary)
        served = np.ones(idx.size, dtype=bool)
        if cfg.mode == "subset-serving" and cfg.serve_groups[lender] is not None:
            served = sub.group == cfg.serve_groups[lender]
        return np.where(served, binary.astype(np.float64), 0.0), served

    def build_table(idx: np.ndarray) -> PredictionTable:
        probs = np.zeros((idx.size, cfg.n_lenders))
        served = np.zeros((idx.size, cfg.n_lenders), dtype=bool)
        for lender in range(cfg.n_lenders):
            probs[:, lender], served[:, lender] = lender_outputs(lender, idx)
        ids = np.array([str(i) for i in idx], dtype=object)
        return PredictionTable(ids, ds.group[idx], ds.label[idx], served, probs)

    eval_table = build_table(eval_idx)
    before = empirical_fairness(eval_table, UtilityKind(1.0))

    if cfg.fit_split == "calibration":
        rng = np.random.Generator(np.random.Philox(children[cfg.n_lenders + 1]))
        calib_idx = _draw(rng, pool, cfg.train_size)

    adjusted = eval_table
    for lender in range(cfg.n_lenders):
        if cfg.mode == "subset-serving" and cfg.serve_groups[lender] is not None:
            continue  # single-group lenders are not adjusted
        fit_idx = train_idx[lender] if cfg.fit_split == "training" else calib_idx
        fit_probs, fit_served = lender_outputs(lender, fit_idx)
        fit_table = PredictionTable(
            ids=np.array([str(i) for i in fit_idx], dtype=object),
            group=ds.group[fit_idx],
            label=ds.label[fit_idx],
            served=fit_served[:, None],
            probs=fit_probs[:, None],
        )
        report = fit_eo_policy(fit_table, lender=1)
        adjusted = apply_policy(report.policy, adjusted, lender + 1)

    after = empirical_fairness(adjusted, UtilityKind(1.0))
    harmed = bool(after.eoc > before.eoc)
    ratio = after.eoc / before.eoc if before.eoc > RATIO_EPS else None
    return ReplicateResult(
        replicate=r,
        eoc_before=before.eoc,
        eoc_after=after.eoc,
        eo_before=before.eo_per_lender,
        eo_after=after.eo_per_lender,
        harmed=harmed,
        ratio=ratio,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list:
    """All replicate results, ordered by index.

    Deterministic given the config; the worker count changes scheduling
    only, never the results.
    """
    ds = _materialize(cfg)
    eval_idx, pool = _eval_split(cfg, ds)

    def one(r: int) -> ReplicateResult:
        try:
            return _run_replicate(cfg, ds, eval_idx, pool, r)
        except (EcofairError, ValueError) as exc:
            return ReplicateResult(replicate=r, error=f"{type(exc).__name__}: {exc}")

    if workers <= 1:
        return [one(r) for r in range(cfg.replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool_exec:
        return list(pool_exec.map(one, range(cfg.replicates)))


def harm_likelihood(results, wilson: bool = False) -> IntervalEstimate:
    """Fraction of successful replicates in which EOC strictly increased,
    with a 95% CI (normal approximation by default, Wilson behind the flag)."""
    ok = [r for r in results if r.ok]
    if not ok:
        raise NoReplicates("no successful replicates")
    n = len(ok)
    p = sum(r.harmed for r in ok) / n
    if wilson:
        z = 1.959963984540054
        denom = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
        return IntervalEstimate(p, max(0.0, center - half), min(1.0, center + half),
                                n, method="wilson")
    half = 1.959963984540054 * math.sqrt(p * (1.0 - p) / n)
    return IntervalEstimate(p, max(0.0, p - half), min(1.0, p + half), n)


def effect_size(results) -> IntervalEstimate:
    """Mean factor by which EOC increased, over harmed replicates with a
    usable baseline; harmed replicates with baseline <= 1e-12 are counted in
    ``excluded_count``."""
    ok = [r for r in results if r.ok]
    ratios = [r.ratio for r in ok if r.harmed and r.ratio is not None]
    excluded = sum(1 for r in ok if r.harmed and r.ratio is None)
    if len(ratios) < 2:
        raise InsufficientRatios(
            f"need >= 2 qualifying replicates for a CI, found {len(ratios)}"
        )
    arr = np.asarray(ratios)
    m = arr.size
    mean = float(arr.mean())
    half = 1.959963984540054 * float(arr.std(ddof=1)) / math.sqrt(m)
    return IntervalEstimate(mean, mean - half, mean + half, m,
                            excluded_count=excluded)


def results_to_csv(results, n_lenders: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["replicate", "status", "eoc_before", "eoc_after", "harmed", "ratio"]
        + [f"eo_before_{i}" for i in range(1, n_lenders + 1)]
        + [f"eo_after_{i}" for i in range(1, n_lenders + 1)]
    )
    for r in results:
        if r.ok:
            writer.writerow(
                [r.replicate, "ok", repr(r.eoc_before), repr(r.eoc_after),
                 int(r.harmed), "" if r.ratio is None else repr(r.ratio)]
                + [repr(v) for v in r.eo_before]
                + [repr(v) for v in r.eo_after]
            )
        else:
            writer.writerow([r.replicate, f"failed: {r.error}", "", "", "", ""]
                            + [""] * (2 * n_lenders))
    return buf.getvalue()


def summarize(results, cfg: ExperimentConfig) -> dict:
    """JSON-ready summary: harm CI, effect CI, exclusions, failures."""
    failures = [{"replicate": r.replicate, "error": r.error}
                for r in results if not r.ok]
    doc = {
        "harm_ci": None,
        "effect_ci": None,
        "excluded_count": 0,
        "failures": failures,
        "metadata": {
            "mode": cfg.mode,
            "n_lenders": cfg.n_lenders,
            "train_size": cfg.train_size,
            "eval_size": cfg.eval_size,
            "replicates": cfg.replicates,
            "base_seed": cfg.base_seed,
            "fit_split": cfg.fit_split,
            "kernel_backend": accel.backend(),
        },
    }
    try:
        doc["harm_ci"] = harm_likelihood(results).as_dict()
    except NoReplicates:
        pass
    try:
        eff = effect_size(results)
        doc["effect_ci"] = eff.as_dict()
        doc["excluded_count"] = eff.excluded_count
    except InsufficientRatios:
        ok = [r for r in results if r.ok]
        doc["excluded_count"] = sum(1 for r in ok if r.harmed and r.ratio is None)
    return doc
