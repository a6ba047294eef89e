"""Deterministic learners for the experiment pipeline.

Two families: logistic regression fitted by damped Newton iterations on a
ridge-penalized log-likelihood, and a CART-style decision tree grown
greedily on Gini gain with midpoint split candidates.  Both are fully
deterministic given their inputs; the recorded seed only tags the model for
reproducibility audits.  Classifiers see the protected attribute as an extra
feature column by default.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ArityMismatch, EmptyData, SingularFit


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus per-row group and binary outcome."""

    features: np.ndarray      # float64, shape (rows, features)
    group: np.ndarray         # int {0,1}
    label: np.ndarray         # int {0,1}
    feature_names: tuple = ()

    def __post_init__(self):
        rows = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if self.group.shape != (rows,) or self.label.shape != (rows,):
            raise ValueError("group and label must have one entry per row")
        if np.isnan(self.features).any():
            raise ValueError("features contain missing values")
        names = self.feature_names or tuple(
            f"x{j}" for j in range(self.features.shape[1])
        )
        if len(names) != self.features.shape[1]:
            raise ValueError("feature_names length mismatch")
        object.__setattr__(self, "feature_names", tuple(names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.group[idx], self.label[idx],
                       self.feature_names)


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters for either learner family."""

    kind: str = "logistic"          # "logistic" | "tree"
    max_iter: int = 50              # Newton iterations
    ridge: float = 1e-6
    tol: float = 1e-8
    max_depth: int = 5
    min_leaf: int = 10
    threshold: float = 0.5          # score cutoff; prediction is score >= threshold
    use_protected_feature: bool = True

    def __post_init__(self):
        if self.kind not in ("logistic", "tree"):
            raise ValueError(f"kind must be 'logistic' or 'tree', got {self.kind!r}")
        if self.max_iter < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("iteration, depth and leaf bounds must be positive")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind, "max_iter": self.max_iter, "ridge": self.ridge,
            "tol": self.tol, "max_depth": self.max_depth, "min_leaf": self.min_leaf,
            "threshold": self.threshold,
            "use_protected_feature": self.use_protected_feature,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LearnerConfig":
        return cls(**doc)


@dataclass(frozen=True)
class FittedModel:
    """A trained classifier: logistic coefficients or flattened tree arrays."""

    kind: str
    n_features_in: int
    uses_group: bool
    threshold: float
    params: dict = field(repr=False)
    training_seed: int = 0

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "n_features_in": self.n_features_in,
            "uses_group": self.uses_group,
            "threshold": self.threshold,
            "training_seed": self.training_seed,
            "params": {
                k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.params.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        doc = json.loads(text)
        params = doc["params"]
        if doc["kind"] == "logistic":
            params = {"coef": np.asarray(params["coef"], dtype=np.float64),
                      "intercept": float(params["intercept"])}
        else:
            params = {
                "feature": np.asarray(params["feature"], dtype=np.int64),
                "threshold": np.asarray(params["threshold"], dtype=np.float64),
                "left": np.asarray(params["left"], dtype=np.int64),
                "right": np.asarray(params["right"], dtype=np.int64),
                "value": np.asarray(params["value"], dtype=np.float64),
            }
        return cls(doc["kind"], doc["n_features_in"], doc["uses_group"],
                   doc["threshold"], params, doc["training_seed"])


def _design(ds: Dataset, uses_group: bool) -> np.ndarray:
    if uses_group:
        return np.column_stack([ds.features, ds.group.astype(np.float64)])
    return np.asarray(ds.features, dtype=np.float64)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_objective(X, y, w, intercept, ridge):
    z = X @ w + intercept
    # log(1 + exp(z)) - y z, computed stably
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    return nll + 0.5 * ridge * float(w @ w)


def _train_logistic(X, y, cfg: LearnerConfig):
    n, d = X.shape
    if len(np.unique(y)) < 2:
        raise EmptyData("logistic training requires both label values")
    w = np.zeros(d)
    intercept = 0.0
    ridge = cfg.ridge
    obj = _logistic_objective(X, y, w, intercept, ridge)
    for _ in range(cfg.max_iter):
        z = X @ w + intercept
        p = _sigmoid(z)
        grad_w = X.T @ (p - y) + ridge * w
        grad_b = float(np.sum(p - y))
        wt = p * (1.0 - p)
        Xa = np.column_stack([X, np.ones(n)])
        hess = Xa.T @ (Xa * wt[:, None])
        hess[np.arange(d), np.arange(d)] += ridge
        grad = np.append(grad_w, grad_b)
        step = None
        bump = 0.0
        for _ in range(12):
            try:
                step = np.linalg.solve(hess + bump * np.eye(d + 1), grad)
                break
            except np.linalg.LinAlgError:
                bump = max(ridge, 10.0 * bump)
        if step is None:
            raise SingularFit("Newton system remained singular after ridge rescue")
        # halving line search keeps the penalized objective non-increasing
        t = 1.0
        improved = False
        for _ in range(40):
            w_new = w - t * step[:d]
            b_new = intercept - t * step[d]
            obj_new = _logistic_objective(X, y, w_new, b_new, ridge)
            if obj_new <= obj:
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        delta = obj - obj_new
        w, intercept, obj = w_new, b_new, obj_new
        if delta <= cfg.tol * (1.0 + abs(obj)):
            break
    if not np.isfinite(w).all() or not np.isfinite(intercept):
        raise SingularFit("logistic coefficients diverged")
    return {"coef": w, "intercept": intercept}


def _train_tree(X, y, cfg: LearnerConfig):
    feature, threshold, left, right, value = [], [], [], [], []

    def add_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    yf = y.astype(np.float64)

    def grow(idx: np.ndarray, depth: int) -> int:
        node = add_node()
        value[node] = float(yf[idx].sum() / idx.size)
        if depth >= cfg.max_depth or idx.size < 2 * cfg.min_leaf \
                or value[node] in (0.0, 1.0):
            return node
        best = (-1.0, -1, 0.0)  # (decrease, feature, threshold)
        for j in range(X.shape[1]):
            order = np.argsort(X[idx, j], kind="stable")
            vals = np.ascontiguousarray(X[idx[order], j])
            labs = np.ascontiguousarray(yf[idx[order]])
            dec, thr = kernels.best_split(vals, labs, cfg.min_leaf)
            if dec > best[0]:
                best = (dec, j, thr)
        if best[0] <= 0.0:
            return node
        _, j, thr = best
        go_left = X[idx, j] <= thr
        feature[node] = j
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return {
        "feature": np.asarray(feature, dtype=np.int64),
        "threshold": np.asarray(threshold, dtype=np.float64),
        "left": np.asarray(left, dtype=np.int64),
        "right": np.asarray(right, dtype=np.int64),
        "value": np.asarray(value, dtype=np.float64),
    }


def train(ds: Dataset, cfg: LearnerConfig, seed: int = 0) -> FittedModel:
    """Fit a learner; deterministic given (dataset, config, seed)."""
    if ds.n_rows < 2:
        raise EmptyData(f"need at least 2 rows, got {ds.n_rows}")
    X = _design(ds, cfg.use_protected_feature)
    y = ds.label.astype(np.float64)
    if cfg.kind == "logistic":
        params = _train_logistic(X, y, cfg)
    else:
        params = _train_tree(X, y, cfg)
    return FittedModel(
        kind=cfg.kind,
        n_features_in=ds.features.shape[1],
        uses_group=cfg.use_protected_feature,
        threshold=cfg.threshold,
        params=params,
        training_seed=seed,
    )


def predict(model: FittedModel, ds: Dataset) -> tuple:
    """(scores in [0, 1], binary predictions at the model threshold)."""
    if ds.features.shape[1] != model.n_features_in:
        raise ArityMismatch(
            f"model expects {model.n_features_in} features, "
            f"dataset has {ds.features.shape[1]}"
        )
    X = _design(ds, model.uses_group)
    if model.kind == "logistic":
        z = X @ model.params["coef"] + model.params["intercept"]
        scores = _sigmoid(z)
    else:
        p = model.params
        scores = kernels.tree_predict(
            p["feature"], p["threshold"], p["left"], p["right"], p["value"],
            np.ascontiguousarray(X),
        )
    return scores, (scores >= model.threshold).astype(np.int64)


def tree_depth(model: FittedModel) -> int:
    """Maximum root-to-leaf depth of a fitted tree."""
    p = model.params

    def depth(node: int) -> int:
        if p["feature"][node] < 0:
            return 0
        return 1 + max(depth(p["left"][node]), depth(p["right"][node]))

    return depth(0)


def alternate_tree_config(base: LearnerConfig) -> LearnerConfig:
    """A differently-configured tree, used where a third lender would
    otherwise duplicate an existing tree (deeper, smaller leaves)."""
    return replace(base, kind="tree", max_depth=base.max_depth + 2,
                   min_leaf=max(2, base.min_leaf // 2))
