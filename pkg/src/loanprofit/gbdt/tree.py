"""Regression trees grown leaf-wise from gradient/hessian histograms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from ..errors import ConsistencyError
from . import _kernels
from .config import GbdtConfig


class SplitCandidate(NamedTuple):
    feature: int
    bin: int
    gain: float


@dataclass
class Tree:
    """Flat node arrays; node 0 is the root and ``feature == -1`` marks a leaf.

    An internal node sends a row left when its bin index for ``feature`` is
    ``<= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def add_output(self, binned: np.ndarray, out: np.ndarray) -> None:
        _kernels.add_tree_output(binned, self.feature, self.threshold, self.left, self.right, self.value, out)

    def predict_binned(self, binned: np.ndarray) -> np.ndarray:
        out = np.zeros(binned.shape[1])
        self.add_output(binned, out)
        return out

    def to_preorder(self) -> list:
        """Nested-free dump: ``["s", feature, bin]`` for splits, ``["l", value]`` for leaves."""
        out, stack = [], [0]
        while stack:
            node = stack.pop()
            if self.feature[node] < 0:
                out.append(["l", float(self.value[node])])
            else:
                out.append(["s", int(self.feature[node]), int(self.threshold[node])])
                stack.append(int(self.right[node]))
                stack.append(int(self.left[node]))
        return out

    @classmethod
    def from_preorder(cls, dump: list) -> "Tree":
        n = len(dump)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n, dtype=np.int64)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros(n)
        pos = 0

        def build():
            nonlocal pos
            node = pos
            pos += 1
            entry = dump[node]
            if entry[0] == "l":
                value[node] = float(entry[1])
            else:
                feature[node], threshold[node] = int(entry[1]), int(entry[2])
                left[node] = build()
                right[node] = build()
            return node

        build()
        if pos != n:
            raise ValueError("malformed tree dump")
        return cls(feature, threshold, left, right, value)

    @classmethod
    def constant(cls, value: float) -> "Tree":
        return cls(np.array([-1]), np.array([0]), np.array([-1]), np.array([-1]), np.array([float(value)]))


class BinnedDataset:
    """Feature-major bin indices plus the bookkeeping histogram building needs.

    Features whose most frequent bin holds at least ``sparse_threshold`` of the
    rows also keep the list of rows outside that bin.
    """

    def __init__(self, binned, n_bins=None, sparse_threshold: float = 0.5):
        self.binned = np.ascontiguousarray(binned, dtype=np.uint8)
        n_features, n_rows = self.binned.shape
        if n_bins is None:
            n_bins = self.binned.max(axis=1).astype(np.int64) + 1
        self.n_bins = np.asarray(n_bins, dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.n_bins)]).astype(np.int64)
        default_bin = np.full(n_features, -1, dtype=np.int64)
        indptr = [0]
        sparse_rows = []
        for f in range(n_features):
            counts = np.bincount(self.binned[f], minlength=int(self.n_bins[f]))
            mode = int(np.argmax(counts))
            if counts[mode] >= sparse_threshold * n_rows:
                default_bin[f] = mode
                sparse_rows.append(np.flatnonzero(self.binned[f] != mode))
                indptr.append(indptr[-1] + len(sparse_rows[-1]))
            else:
                indptr.append(indptr[-1])
        self.default_bin = default_bin
        self.sp_indptr = np.asarray(indptr, dtype=np.int64)
        self.sp_rows = np.concatenate(sparse_rows).astype(np.int64) if sparse_rows else np.zeros(0, dtype=np.int64)
        self.in_node = np.zeros(n_rows, dtype=np.uint8)

    @property
    def n_features(self) -> int:
        return self.binned.shape[0]

    @property
    def n_rows(self) -> int:
        return self.binned.shape[1]

    def histogram(self, rows, grads, hessians, features, stats) -> np.ndarray:
        G, H, C = stats
        _kernels.mark_rows(self.in_node, rows, 1)
        try:
            return _kernels.build_histogram(self.binned, rows, grads, hessians, features, self.offsets, G, H, C,
                                            self.sp_indptr, self.sp_rows, self.default_bin, self.in_node)
        finally:
            _kernels.mark_rows(self.in_node, rows, 0)


def _split_flat(hist, offsets, features, stats, config: GbdtConfig) -> Optional[SplitCandidate]:
    G, H, C = stats
    if _kernels.histogram_discrepancy(hist, offsets, features, G, H, C) > 1e-6:
        raise ConsistencyError("histogram totals do not match the parent statistics")
    f, b, gain, _, _, _ = _kernels.best_split(hist, offsets, features, G, H, C, float(config.lambda_l2),
                                              float(config.min_samples_leaf))
    if f < 0:
        return None
    return SplitCandidate(int(f), int(b), float(gain))


def find_best_split(histogram, parent_stats, config: GbdtConfig, n_bins=None, features=None) -> Optional[SplitCandidate]:
    """Best (feature, bin) by second-order gain, or ``None`` if no split has positive gain.

    ``histogram`` has shape ``(n_features, n_bins, 3)`` holding per-bin
    gradient sums, hessian sums and counts; ``parent_stats`` is the node's
    ``(grad_sum, hess_sum, count)``. Children smaller than
    ``config.min_samples_leaf`` are not allowed. Ties go to the lowest feature
    index, then the lowest bin.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    n_feat, n_bins_max = hist.shape[0], hist.shape[1]
    if n_bins is None:
        n_bins = np.full(n_feat, n_bins_max, dtype=np.int64)
    n_bins = np.asarray(n_bins, dtype=np.int64)
    features = np.arange(n_feat, dtype=np.int64) if features is None else np.asarray(features, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(n_bins)]).astype(np.int64)
    flat = np.concatenate([hist[f, : n_bins[f]] for f in range(n_feat)]) if n_feat else np.zeros((0, 3))
    stats = tuple(float(v) for v in parent_stats)
    return _split_flat(flat, offsets, features, stats, config)


class _Leaf:
    __slots__ = ("node", "rows", "hist", "stats", "depth", "split")

    def __init__(self, node, rows, hist, stats, depth):
        self.node, self.rows, self.hist, self.stats, self.depth = node, rows, hist, stats, depth
        self.split = None


def sample_features(n_features: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(n_features, dtype=np.int64)
    k = max(1, int(round(fraction * n_features)))
    return np.sort(rng.choice(n_features, size=k, replace=False)).astype(np.int64)


def grow_tree(data, grads, hessians, config: GbdtConfig, rng: np.random.Generator, rows=None) -> Tree:
    """Grow one tree best-gain-first until the leaf budget or depth limit stops it.

    ``data`` is a ``BinnedDataset`` or a feature-major ``(n_features, n_rows)``
    array of bin indices; ``rows`` restricts growth to a subsample. Leaf
    values are Newton steps shrunk by the learning rate.
    """
    if not isinstance(data, BinnedDataset):
        data = BinnedDataset(data)
    grads = np.ascontiguousarray(grads, dtype=np.float64)
    hessians = np.ascontiguousarray(hessians, dtype=np.float64)
    if grads.shape != (data.n_rows,) or hessians.shape != (data.n_rows,):
        raise ValueError("gradients and hessians must have one entry per row")
    rows = np.arange(data.n_rows, dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    features = sample_features(data.n_features, config.feature_fraction, rng)
    lam = config.lambda_l2

    feature: List[int] = []
    threshold: List[int] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(stats):
        G, H, _ = stats
        feature.append(-1)
        threshold.append(0)
        left.append(-1)
        right.append(-1)
        value.append(-G / (H + lam) * config.learning_rate if H + lam > 0 else 0.0)
        return len(feature) - 1

    def stats_of(r):
        G, H = _kernels.node_stats(grads, hessians, r)
        return G, H, float(len(r))

    def evaluate(leaf):
        if leaf.depth < config.max_depth:
            leaf.split = _split_flat(leaf.hist, data.offsets, features, leaf.stats, config)

    root_stats = stats_of(rows)
    root = _Leaf(new_node(root_stats), rows, data.histogram(rows, grads, hessians, features, root_stats),
                 root_stats, 0)
    evaluate(root)
    frontier = [root]
    n_leaves = 1
    while n_leaves < config.num_leaves:
        best = None
        for leaf in frontier:
            if leaf.split is not None and (best is None or leaf.split.gain > best.split.gain):
                best = leaf
        if best is None:
            break
        f, b, _ = best.split
        rows_l, rows_r = _kernels.partition_rows(data.binned[f], best.rows, b)
        stats_l, stats_r = stats_of(rows_l), stats_of(rows_r)
        if len(rows_l) <= len(rows_r):
            hist_l = data.histogram(rows_l, grads, hessians, features, stats_l)
            hist_r = best.hist - hist_l
        else:
            hist_r = data.histogram(rows_r, grads, hessians, features, stats_r)
            hist_l = best.hist - hist_r

        node = best.node
        feature[node], threshold[node] = f, b
        child_l = _Leaf(new_node(stats_l), rows_l, hist_l, stats_l, best.depth + 1)
        child_r = _Leaf(new_node(stats_r), rows_r, hist_r, stats_r, best.depth + 1)
        left[node], right[node] = child_l.node, child_r.node
        value[node] = 0.0
        frontier.remove(best)
        for child in (child_l, child_r):
            try:
                evaluate(child)
            except ConsistencyError:
                # subtraction drift: rebuild this child's histogram directly
                child.hist = data.histogram(child.rows, grads, hessians, features, child.stats)
                evaluate(child)
            frontier.append(child)
        n_leaves += 1

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.int64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )
