"""Binary classifiers for next-period reception, written against numpy only.

Three kinds are supported: ``logistic`` (Newton/IRLS with a small ridge
term), ``tree`` (CART, Gini impurity, depth limited) and ``forest``
(bootstrapped CART trees with feature subsampling).  Every kind outputs a
probability of reception; the decision threshold is fixed at 0.5.
"""
from __future__ import annotations

import math
from operator import mul
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .features import Dataset, FeatureWindow

KINDS = ("logistic", "tree", "forest")
THRESHOLD = 0.5
FORMAT_TAG = "lqsdwsn-model"
FORMAT_VERSION = 1


class DegenerateDatasetError(ValueError):
    """Training data holds a single label, so no decision boundary exists."""


class Prediction(NamedTuple):
    decision: int
    score: float


@dataclass
class TrainParams:
    l2: float = 1e-4
    max_iter: int = 50
    tol: float = 1e-10
    max_depth: int = 8
    min_samples_leaf: int = 20
    n_trees: int = 10
    forest_depth: int = 10
    max_features: int | None = None  # None -> round(sqrt(n_features))


# -- trees ---------------------------------------------------------------


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # P(label=1) at the node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return self.value[node]

    def as_lists(self):
        return (self.feature.tolist(), self.threshold.tolist(), self.left.tolist(), self.right.tolist(), self.value.tolist())


def _best_split(X, y, idx, features, min_leaf):
    n = len(idx)
    total_pos = float(y[idx].sum())
    best = (math.inf, -1, 0.0)
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cum = np.cumsum(y[idx][order], dtype=float)[:-1]
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        ok = (vs[1:] > vs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        pos_r = total_pos - cum
        # weighted Gini: n_l*2p_l(1-p_l) + n_r*2p_r(1-p_r), constant factor dropped
        imp = cum * (n_left - cum) / n_left + pos_r * (n_right - pos_r) / n_right
        imp = np.where(ok, imp, math.inf)
        i = int(np.argmin(imp))
        if imp[i] < best[0]:
            best = (float(imp[i]), int(f), 0.5 * (vs[i] + vs[i + 1]))
    return best


def fit_tree(X, y, max_depth, min_leaf, rng=None, max_features=None, sample_idx=None) -> Tree:
    n_feat = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []
    root = np.arange(len(y)) if sample_idx is None else np.asarray(sample_idx)
    stack = [(root, 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node_id
        pos = float(y[idx].sum())
        value.append(pos / len(idx))
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if depth >= max_depth or pos == 0 or pos == len(idx) or len(idx) < 2 * min_leaf:
            continue
        if max_features is not None and rng is not None:
            feats = np.sort(rng.choice(n_feat, size=max_features, replace=False))
        else:
            feats = range(n_feat)
        parent_imp = pos * (len(idx) - pos) / len(idx)
        imp, f, thr = _best_split(X, y, idx, feats, min_leaf)
        if f < 0 or imp >= parent_imp:
            continue
        feature[node_id] = f
        threshold[node_id] = thr
        mask = X[idx, f] <= thr
        # right pushed first so the left subtree is numbered first
        stack.append((idx[~mask], depth + 1, node_id, True))
        stack.append((idx[mask], depth + 1, node_id, False))
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


# -- logistic regression -------------------------------------------------


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def fit_logistic(X, y, l2=1e-4, max_iter=50, tol=1e-10):
    """Newton-Raphson on the mean log-loss plus ``l2/2 * |w|^2``."""
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    reg = np.full(d + 1, l2)
    reg[-1] = 0.0
    for _ in range(max_iter):
        p = _sigmoid(A @ theta)
        grad = A.T @ (p - y) / n + reg * theta
        H = (A * (p * (1 - p))[:, None]).T @ A / n + np.diag(reg)
        step = np.linalg.solve(H, grad)
        theta -= step
        if np.max(np.abs(step)) < tol:
            break
    return theta[:-1].copy(), float(theta[-1])


# -- model ---------------------------------------------------------------


@dataclass
class Model:
    kind: str
    k: int
    shift: np.ndarray
    scale: np.ndarray
    weights: np.ndarray | None = None
    bias: float = 0.0
    trees: list[Tree] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")

    def _normalize(self, X):
        return (X - self.shift) / self.scale

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != 2 * self.k:
            raise ValueError(f"model expects windows of k={self.k}, got {X.shape[1] // 2}")
        Z = self._normalize(X)
        if self.kind == "logistic":
            return _sigmoid(Z @ self.weights + self.bias)
        return np.mean([t.predict_proba(Z) for t in self.trees], axis=0)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= THRESHOLD).astype(np.int8)

    def predict(self, window: FeatureWindow) -> Prediction:
        if window.k != self.k:
            raise ValueError(f"window has k={window.k}, model was trained with k={self.k}")
        s = float(self.predict_proba(window.as_vector())[0])
        return Prediction(int(s >= THRESHOLD), s)

    def scorer(self):
        """Fast scalar scorer ``f(rssi_seq, recv_seq) -> probability``.

        Used on the per-packet path of the simulator; agrees with
        :meth:`predict_proba` up to float rounding.
        """
        k = self.k
        shift = self.shift.tolist()
        inv = (1.0 / self.scale).tolist()
        if self.kind == "logistic":
            w = (self.weights / self.scale).tolist()
            b = self.bias - float(np.dot(self.weights, self.shift / self.scale))
            w_rssi, w_recv = w[:k], w[k:]

            def score(rssi, recv):
                z = b + sum(map(mul, w_rssi, rssi)) + sum(map(mul, w_recv, recv))
                return 0.5 * (1.0 + math.tanh(0.5 * z))

            return score

        tables = [t.as_lists() for t in self.trees]
        n_trees = len(tables)

        def score(rssi, recv):
            x = [(v - s) * i for v, s, i in zip(list(rssi) + list(recv), shift, inv)]
            total = 0.0
            for feat, thr, lft, rgt, val in tables:
                n = 0
                while feat[n] >= 0:
                    n = lft[n] if x[feat[n]] <= thr[n] else rgt[n]
                total += val[n]
            return total / n_trees

        return score

    # -- serialization ---------------------------------------------------

    def dumps(self) -> str:
        def vec(a):
            return " ".join(float(v).hex() for v in a)

        lines = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"kind {self.kind}", f"k {self.k}", f"shift {vec(self.shift)}", f"scale {vec(self.scale)}"]
        if self.kind == "logistic":
            lines += [f"weights {vec(self.weights)}", f"bias {float(self.bias).hex()}"]
        else:
            lines.append(f"trees {len(self.trees)}")
            for t in self.trees:
                lines.append(f"nodes {len(t.feature)}")
                for i in range(len(t.feature)):
                    lines.append(
                        f"{int(t.feature[i])} {float(t.threshold[i]).hex()} {int(t.left[i])} {int(t.right[i])} {float(t.value[i]).hex()}"
                    )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Model":
        try:
            return cls._parse(iter(text.splitlines()))
        except (StopIteration, IndexError):
            raise ValueError("model file is truncated") from None

    @classmethod
    def _parse(cls, lines) -> "Model":

        def expect(key):
            parts = next(lines).split()
            if not parts or parts[0] != key:
                raise ValueError(f"model file: expected {key!r}")
            return parts[1:]

        tag = next(lines).split()
        if tag != [FORMAT_TAG, str(FORMAT_VERSION)]:
            raise ValueError("not a model file or unsupported version")
        kind = expect("kind")[0]
        k = int(expect("k")[0])
        shift = np.array([float.fromhex(v) for v in expect("shift")])
        scale = np.array([float.fromhex(v) for v in expect("scale")])
        if kind == "logistic":
            w = np.array([float.fromhex(v) for v in expect("weights")])
            b = float.fromhex(expect("bias")[0])
            return cls(kind, k, shift, scale, weights=w, bias=b)
        trees = []
        for _ in range(int(expect("trees")[0])):
            n = int(expect("nodes")[0])
            rows = [next(lines).split() for _ in range(n)]
            trees.append(
                Tree(
                    np.array([int(r[0]) for r in rows], dtype=np.int64),
                    np.array([float.fromhex(r[1]) for r in rows]),
                    np.array([int(r[2]) for r in rows], dtype=np.int64),
                    np.array([int(r[3]) for r in rows], dtype=np.int64),
                    np.array([float.fromhex(r[4]) for r in rows]),
                )
            )
        return cls(kind, k, shift, scale, trees=trees)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        return cls.loads(Path(path).read_text())


def normalization(X: np.ndarray, k: int):
    """RSSI columns standardised with training statistics; RECV left raw."""
    shift = np.zeros(2 * k)
    scale = np.ones(2 * k)
    shift[:k] = X[:, :k].mean(axis=0)
    sd = X[:, :k].std(axis=0)
    scale[:k] = np.where(sd > 0, sd, 1.0)
    return shift, scale


def train(dataset: Dataset, kind: str, params: TrainParams | None = None, rng: np.random.Generator | None = None) -> Model:
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    y = dataset.y.astype(float)
    if y.min() == y.max():
        raise DegenerateDatasetError(f"dataset holds only label {int(y[0])}; cannot train a classifier")
    params = params or TrainParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    k = dataset.k
    shift, scale = normalization(dataset.X, k)
    Z = (dataset.X - shift) / scale
    if kind == "logistic":
        w, b = fit_logistic(Z, y, params.l2, params.max_iter, params.tol)
        return Model(kind, k, shift, scale, weights=w, bias=b)
    if kind == "tree":
        tree = fit_tree(Z, y, params.max_depth, params.min_samples_leaf)
        return Model(kind, k, shift, scale, trees=[tree])
    m = params.max_features or max(1, int(round(math.sqrt(Z.shape[1]))))
    trees = []
    for _ in range(params.n_trees):
        boot = rng.integers(0, len(y), size=len(y))
        trees.append(fit_tree(Z, y, params.forest_depth, params.min_samples_leaf, rng=rng, max_features=m, sample_idx=boot))
    return Model(kind, k, shift, scale, trees=trees)


def predict(model: Model, window: FeatureWindow) -> Prediction:
    return model.predict(window)


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def acc(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def lines(self) -> list[str]:
        return [
            f"ACC       {self.acc:.4f}",
            f"F1        {self.f1:.4f}",
            f"Precision {self.precision:.4f}",
            f"Recall    {self.recall:.4f}",
            f"TP {self.tp} FP {self.fp} TN {self.tn} FN {self.fn}",
        ]


def report_from_predictions(y_true: Sequence[int], y_pred: Sequence[int]) -> EvalReport:
    t = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    return EvalReport(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))


def evaluate(model: Model, dataset: Dataset) -> EvalReport:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return report_from_predictions(dataset.y, model.predict_batch(dataset.X))
