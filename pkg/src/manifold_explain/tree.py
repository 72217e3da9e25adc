"""CART regression tree used as the black-box model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from manifold_explain.errors import SchemaError, ValidationError

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = 16
    min_samples_leaf: int = 40
    min_samples_split: int = 2

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ValidationError("min_samples_split must be >= 2")


class RegressionTree:
    """Binary tree stored as flat node arrays.

    Node ``i`` is internal when ``feature[i] >= 0``; samples with
    ``x[feature] <= threshold`` go to ``left[i]``, the rest to ``right[i]``.
    Leaves carry the mean target ``value[i]`` and the training ``count[i]``.
    """

    def __init__(self, feature, threshold, left, right, value, count, n_features):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.count = np.asarray(count, dtype=np.int64)
        self.n_features = int(n_features)
        for a in (self.feature, self.threshold, self.left, self.right, self.value, self.count):
            a.setflags(write=False)

    @property
    def node_count(self):
        return len(self.feature)

    @property
    def leaf_count(self):
        return int(np.sum(self.feature == LEAF))

    def depth(self):
        depths = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, x):
        """Predict one feature vector (returns float) or a batch (returns array)."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.n_features:
            raise ValidationError(f"expected {self.n_features} features, got {arr.shape[1]}")
        node = np.zeros(len(arr), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = arr[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] != LEAF
        out = self.value[node]
        return float(out[0]) if single else out

    __call__ = predict

    def to_dict(self, i=0):
        if self.feature[i] == LEAF:
            return {"value": float(self.value[i]), "count": int(self.count[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_dict(int(self.left[i])),
            "right": self.to_dict(int(self.right[i])),
        }

    @classmethod
    def from_dict(cls, root, n_features=None):
        if not isinstance(root, dict) or not root:
            raise SchemaError("tree must be a non-empty JSON object")
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "count")}
        max_feature = -1
        stack = [(root, None, None)]
        while stack:
            node, parent, side = stack.pop()
            i = len(cols["feature"])
            if parent is not None:
                cols[side][parent] = i
            if not isinstance(node, dict):
                raise SchemaError(f"node {i}: expected an object")
            if "feature" in node:
                missing = {"feature", "threshold", "left", "right"} - node.keys()
                if missing:
                    raise SchemaError(f"node {i}: internal node missing {sorted(missing)}")
                feat, thr = node["feature"], node["threshold"]
                if not isinstance(feat, int) or isinstance(feat, bool) or feat < 0:
                    raise SchemaError(f"node {i}: feature must be a non-negative integer")
                if not isinstance(thr, (int, float)) or isinstance(thr, bool) or not math.isfinite(thr):
                    raise SchemaError(f"node {i}: threshold must be a finite number")
                max_feature = max(max_feature, feat)
                for k, v in (("feature", feat), ("threshold", float(thr)), ("left", -1), ("right", -1), ("value", math.nan), ("count", 0)):
                    cols[k].append(v)
                # right pushed first so the left subtree gets the next index
                stack.append((node["right"], i, "right"))
                stack.append((node["left"], i, "left"))
            elif "value" in node:
                val, cnt = node["value"], node.get("count", 0)
                if not isinstance(val, (int, float)) or isinstance(val, bool):
                    raise SchemaError(f"node {i}: value must be a number")
                if not isinstance(cnt, int) or isinstance(cnt, bool) or cnt < 0:
                    raise SchemaError(f"node {i}: count must be a non-negative integer")
                for k, v in (("feature", LEAF), ("threshold", math.nan), ("left", -1), ("right", -1), ("value", float(val)), ("count", cnt)):
                    cols[k].append(v)
            else:
                raise SchemaError(f"node {i}: expected 'feature' or 'value' key")
        if n_features is None:
            n_features = max(max_feature + 1, 1)
        elif max_feature >= n_features:
            raise SchemaError(f"feature index {max_feature} out of range for {n_features} features")
        return cls(n_features=n_features, **cols)


def _best_split(x, y, min_leaf):
    """Exhaustive split search on one node.

    Returns ``(gain, feature, threshold, left_mask)`` or None. ``y`` is
    centred on the node mean before accumulation to keep the SSE differences
    well conditioned.
    """
    n, d = x.shape
    yc = y - y.mean()
    total = yc.sum()
    parent_sse = float(yc @ yc)
    best = None
    lo, hi = min_leaf - 1, n - min_leaf  # split after sorted position i, i in [lo, hi)
    if hi <= lo:
        return None
    for f in range(d):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = yc[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        i = np.arange(lo, hi)
        valid = xs[i] < xs[i + 1]
        if not valid.any():
            continue
        i = i[valid]
        nl = i + 1.0
        nr = n - nl
        sl = csum[i]
        sr = total - sl
        sse = (csq[i] - sl * sl / nl) + ((csq[-1] - csq[i]) - sr * sr / nr)
        k = int(np.argmin(sse))
        gain = parent_sse - float(sse[k])
        if best is None or gain > best[0]:
            a, b = xs[i[k]], xs[i[k] + 1]
            thr = 0.5 * (a + b)
            if not a <= thr < b:
                thr = a
            best = (gain, f, float(thr))
    if best is None or best[0] <= 0.0:
        return None
    gain, f, thr = best
    return gain, f, thr, x[:, f] <= thr


def fit_tree(x, y=None, params: TreeParams = TreeParams()) -> RegressionTree:
    """Grow a regression tree by greedy SSE-minimizing splits.

    ``x`` may be a :class:`~manifold_explain.spiral_data.Dataset`, in which case
    ``y`` is taken from it. Ties in SSE reduction keep the lowest feature
    index, then the smallest threshold.
    """
    if y is None:
        x, y = x.x, x.y
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise ValidationError("cannot fit a tree on an empty dataset")
    if len(y) != len(x):
        raise ValidationError("x and y lengths differ")

    cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "count")}

    def new_node(idx):
        cols["feature"].append(LEAF)
        cols["threshold"].append(math.nan)
        cols["left"].append(-1)
        cols["right"].append(-1)
        cols["value"].append(float(y[idx].mean()))
        cols["count"].append(len(idx))
        return len(cols["feature"]) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = len(idx)
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if n < params.min_samples_split or n < 2 * params.min_samples_leaf:
            continue
        found = _best_split(x[idx], y[idx], params.min_samples_leaf)
        if found is None:
            continue
        _, f, thr, mask = found
        left_idx, right_idx = idx[mask], idx[~mask]
        cols["feature"][node] = f
        cols["threshold"][node] = thr
        left = new_node(left_idx)
        right = new_node(right_idx)
        cols["left"][node] = left
        cols["right"][node] = right
        stack.append((right, right_idx, depth + 1))
        stack.append((left, left_idx, depth + 1))
    for i, f in enumerate(cols["feature"]):
        if f != LEAF:
            cols["value"][i] = math.nan
    return RegressionTree(n_features=x.shape[1], **cols)


def save_tree(tree: RegressionTree, path) -> None:
    doc = {"n_features": tree.n_features, "root": tree.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_tree(path) -> RegressionTree:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid tree JSON: {exc}") from None
    if not isinstance(doc, dict) or "root" not in doc:
        raise SchemaError("tree file must be an object with a 'root' node")
    n_features = doc.get("n_features")
    if n_features is not None and (not isinstance(n_features, int) or n_features < 1):
        raise SchemaError("n_features must be a positive integer")
    return RegressionTree.from_dict(doc["root"], n_features)
