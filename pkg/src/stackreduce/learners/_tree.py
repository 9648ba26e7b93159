"""CART split search, tree growth and batched tree traversal.

Node arrays are laid out in preorder. A node with ``feature < 0`` is a leaf;
child indices are relative to the tree's first node. Categorical features
split by equality (``x == code`` goes left), continuous ones by ``x <= t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GINI = 0
MSE = 1
MIN_DECREASE = 1e-12
# presorted scans replace node sorts once n_node*log2(n_node) exceeds this share of N
SCAN_RATIO = 0.5


@njit(cache=True, nogil=True, inline="always")
def _impurity(sums, sumsq, count, criterion):
    if count <= 0:
        return 0.0
    acc = 0.0
    if criterion == GINI:
        for k in range(sums.shape[0]):
            p = sums[k] / count
            acc += p * p
        return 1.0 - acc
    for k in range(sums.shape[0]):
        m = sums[k] / count
        acc += sumsq[k] / count - m * m
    return max(acc, 0.0)


@njit(cache=True, nogil=True, inline="always")
def _child_impurity(left, leftsq, tot, totsq, nl, n, criterion):
    """Weighted impurity of the two children, ``(n_l*imp_l + n_r*imp_r)/n``."""
    inv_l = 1.0 / nl
    inv_r = 1.0 / (n - nl)
    acc = 0.0
    base = 0.0
    for k in range(left.shape[0]):
        lk = left[k]
        rk = tot[k] - lk
        acc += lk * lk * inv_l + rk * rk * inv_r
        if criterion == MSE:
            base += totsq[k]
    if criterion == GINI:
        base = n
    return (base - acc) / n


@njit(cache=True, nogil=True)
def _node_split(X, Y, idx, start, end, features, is_cat, n_levels, criterion, random_mode,
                parent_imp, tmp_vals, tmp_ord, order, key, mult, use_scan):
    """Best (feature, threshold, decrease) among ``features`` for the node
    holding ``idx[start:end]``. Returns feature -1 when nothing beats the
    minimum decrease."""
    n = end - start
    K = Y.shape[1]
    best_f = -1
    best_t = 0.0
    best_dec = MIN_DECREASE
    tot = np.zeros(K)
    totsq = np.zeros(K)
    for i in range(start, end):
        r = idx[i]
        for k in range(K):
            tot[k] += Y[r, k]
            totsq[k] += Y[r, k] * Y[r, k]
    left = np.zeros(K)
    leftsq = np.zeros(K)
    for fi in range(features.shape[0]):
        f = features[fi]
        if is_cat[f]:
            L = n_levels[f]
            lsum = np.zeros((L, K))
            lsq = np.zeros((L, K))
            lcnt = np.zeros(L)
            for i in range(start, end):
                r = idx[i]
                c = int(X[r, f])
                lcnt[c] += 1.0
                for k in range(K):
                    lsum[c, k] += Y[r, k]
                    lsq[c, k] += Y[r, k] * Y[r, k]
            if random_mode:
                present = 0
                for c in range(L):
                    if lcnt[c] > 0:
                        present += 1
                if present < 2:
                    continue
                pick = np.random.randint(present)
                c_lo = 0
                for c in range(L):
                    if lcnt[c] > 0:
                        if pick == 0:
                            c_lo = c
                            break
                        pick -= 1
                c_hi = c_lo + 1
            else:
                c_lo = 0
                c_hi = L
            for c in range(c_lo, c_hi):
                nl = lcnt[c]
                if nl <= 0 or nl >= n:
                    continue
                imp = _child_impurity(lsum[c], lsq[c], tot, totsq, nl, n, criterion)
                dec = parent_imp - imp
                if dec > best_dec:
                    best_dec = dec
                    best_f = f
                    best_t = float(c)
            continue

        if random_mode:
            lo = np.inf
            hi = -np.inf
            for i in range(start, end):
                v = X[idx[i], f]
                lo = min(lo, v)
                hi = max(hi, v)
            if not hi > lo:
                continue
            t = lo + np.random.random() * (hi - lo)
            if t >= hi:
                t = lo
            for k in range(K):
                left[k] = 0.0
                leftsq[k] = 0.0
            nl = 0.0
            for i in range(start, end):
                r = idx[i]
                if X[r, f] <= t:
                    nl += 1.0
                    for k in range(K):
                        left[k] += Y[r, k]
                        leftsq[k] += Y[r, k] * Y[r, k]
            if nl >= n:
                continue
            imp = _child_impurity(left, leftsq, tot, totsq, nl, n, criterion)
            dec = parent_imp - imp
            if dec > best_dec:
                best_dec = dec
                best_f = f
                best_t = t
            continue

        if use_scan:
            # filter the presorted column instead of sorting the node
            pos = 0
            for p in range(order.shape[1]):
                r = order[f, p]
                if key[r] == start:
                    for _ in range(mult[r]):
                        tmp_ord[pos] = r
                        pos += 1
        else:
            for i in range(n):
                tmp_vals[i] = X[idx[start + i], f]
            srt = np.argsort(tmp_vals[:n])
            for i in range(n):
                tmp_ord[i] = idx[start + srt[i]]
        for k in range(K):
            left[k] = 0.0
        for i in range(n - 1):
            r = tmp_ord[i]
            for k in range(K):
                left[k] += Y[r, k]
            v = X[r, f]
            v_next = X[tmp_ord[i + 1], f]
            if v_next <= v:
                continue
            imp = _child_impurity(left, leftsq, tot, totsq, i + 1.0, n, criterion)
            dec = parent_imp - imp
            if dec > best_dec:
                t = 0.5 * (v + v_next)
                if t >= v_next:
                    t = v
                best_dec = dec
                best_f = f
                best_t = t
    return best_f, best_t, best_dec


@njit(cache=True, nogil=True)
def _split_once(X, Y, idx, features, is_cat, n_levels, criterion, random_mode, seed):
    np.random.seed(seed)
    n = idx.shape[0]
    K = Y.shape[1]
    tot = np.zeros(K)
    totsq = np.zeros(K)
    for i in range(n):
        for k in range(K):
            tot[k] += Y[idx[i], k]
            totsq[k] += Y[idx[i], k] * Y[idx[i], k]
    parent = _impurity(tot, totsq, float(n), criterion)
    dummy = np.zeros((0, 0), dtype=np.int64)
    none = np.zeros(0, dtype=np.int64)
    return _node_split(X, Y, idx, 0, n, features, is_cat, n_levels, criterion, random_mode,
                       parent, np.empty(n), np.empty(n, dtype=np.int64), dummy, none, none,
                       False)


@njit(cache=True, nogil=True)
def _grow(X, Y, sample_idx, is_cat, n_levels, criterion, random_mode, max_depth,
          min_samples_split, max_features, seed, order):
    np.random.seed(seed)
    idx = sample_idx.copy()
    n = idx.shape[0]
    N = X.shape[0]
    key = np.full(N, -1, dtype=np.int64)
    mult = np.zeros(N, dtype=np.int64)
    for i in range(n):
        key[idx[i]] = 0
        mult[idx[i]] += 1
    have_order = order.shape[0] == X.shape[1] and order.shape[1] == N
    d = X.shape[1]
    K = Y.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left_child = np.full(cap, -1, dtype=np.int64)
    right_child = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, K))
    n_samples = np.zeros(cap, dtype=np.int64)
    tmp_vals = np.empty(n)
    tmp_ord = np.empty(n, dtype=np.int64)
    all_feats = np.arange(d)
    pool = np.arange(d)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_parent = np.empty(cap, dtype=np.int64)
    st_left = np.empty(cap, dtype=np.bool_)
    top = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    st_parent[0] = -1
    st_left[0] = True
    top = 1
    n_nodes = 0
    sums = np.zeros(K)
    sumsq = np.zeros(K)
    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        parent = st_parent[top]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if st_left[top]:
                left_child[parent] = node
            else:
                right_child[parent] = node
        cnt = end - start
        for k in range(K):
            sums[k] = 0.0
            sumsq[k] = 0.0
        for i in range(start, end):
            r = idx[i]
            for k in range(K):
                sums[k] += Y[r, k]
                sumsq[k] += Y[r, k] * Y[r, k]
        for k in range(K):
            value[node, k] = sums[k] / cnt
        n_samples[node] = cnt
        imp = _impurity(sums, sumsq, float(cnt), criterion)
        if depth >= max_depth or cnt < min_samples_split or imp <= MIN_DECREASE:
            continue
        if max_features < d:
            for j in range(max_features):
                swap = j + np.random.randint(d - j)
                tmp = pool[j]
                pool[j] = pool[swap]
                pool[swap] = tmp
            feats = np.sort(pool[:max_features])
        else:
            feats = all_feats
        use_scan = have_order and not random_mode and cnt * np.log2(cnt) > SCAN_RATIO * N
        f, t, dec = _node_split(X, Y, idx, start, end, feats, is_cat, n_levels, criterion,
                                random_mode, imp, tmp_vals, tmp_ord, order, key, mult, use_scan)
        if f < 0:
            continue
        # partition idx[start:end] so left-going rows come first, keeping order
        nl = 0
        for i in range(start, end):
            r = idx[i]
            go_left = X[r, f] == t if is_cat[f] else X[r, f] <= t
            if go_left:
                tmp_ord[nl] = r
                nl += 1
        nr = nl
        for i in range(start, end):
            r = idx[i]
            go_left = X[r, f] == t if is_cat[f] else X[r, f] <= t
            if not go_left:
                tmp_ord[nr] = r
                nr += 1
        for i in range(cnt):
            idx[start + i] = tmp_ord[i]
        for i in range(start + nl, end):
            key[idx[i]] = start + nl
        feature[node] = f
        threshold[node] = t
        # right pushed first so the left subtree is numbered first (preorder)
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_left[top] = False
        top += 1
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_left[top] = True
        top += 1
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left_child[:n_nodes].copy(),
            right_child[:n_nodes].copy(), value[:n_nodes].copy(), n_samples[:n_nodes].copy())


@njit(cache=True, nogil=True)
def _leaf_index(X, offsets, feature, threshold, left, right, is_cat, out):
    """Absolute leaf node reached by every row in every tree."""
    n = X.shape[0]
    T = offsets.shape[0]
    for i in range(n):
        for t in range(T):
            base = offsets[t]
            node = base
            while feature[node] >= 0:
                f = feature[node]
                v = X[i, f]
                if is_cat[f]:
                    go_left = v == threshold[node]
                else:
                    go_left = v <= threshold[node]
                node = base + (left[node] if go_left else right[node])
            out[i, t] = node


@njit(cache=True, nogil=True)
def _forest_mean(X, offsets, feature, threshold, left, right, is_cat, value):
    n = X.shape[0]
    T = offsets.shape[0]
    K = value.shape[1]
    out = np.zeros((n, K))
    acc = np.zeros(K)
    for i in range(n):
        for k in range(K):
            acc[k] = 0.0
        for t in range(T):
            base = offsets[t]
            node = base
            while feature[node] >= 0:
                f = feature[node]
                v = X[i, f]
                if is_cat[f]:
                    go_left = v == threshold[node]
                else:
                    go_left = v <= threshold[node]
                node = base + (left[node] if go_left else right[node])
            for k in range(K):
                acc[k] += value[node, k]
        for k in range(K):
            out[i, k] = acc[k] / T
    return out


@njit(cache=True, nogil=True)
def _boosted_sum(X, offsets, feature, threshold, left, right, is_cat, value, out_col, init,
                 rate):
    """``init + rate * sum`` of single-output trees, each tree adding into
    column ``out_col[t]``; trees are accumulated in order."""
    n = X.shape[0]
    T = offsets.shape[0]
    K = init.shape[0]
    out = np.empty((n, K))
    for i in range(n):
        for k in range(K):
            out[i, k] = init[k]
        for t in range(T):
            base = offsets[t]
            node = base
            while feature[node] >= 0:
                f = feature[node]
                v = X[i, f]
                if is_cat[f]:
                    go_left = v == threshold[node]
                else:
                    go_left = v <= threshold[node]
                node = base + (left[node] if go_left else right[node])
            out[i, out_col[t]] += rate * value[node, 0]
    return out


@dataclass
class TreeNodes:
    """One fitted tree as flat preorder arrays."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0


@dataclass
class TreeStack:
    """Several trees concatenated for a single traversal call."""

    offsets: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def from_trees(cls, trees: list[TreeNodes]) -> "TreeStack":
        sizes = np.array([t.n_nodes for t in trees], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        return cls(
            offsets=offsets,
            feature=np.concatenate([t.feature for t in trees]).astype(np.int64),
            threshold=np.concatenate([t.threshold for t in trees]).astype(np.float64),
            left=np.concatenate([t.left for t in trees]).astype(np.int64),
            right=np.concatenate([t.right for t in trees]).astype(np.int64),
            value=np.ascontiguousarray(np.concatenate([t.value for t in trees], axis=0)),
        )

    def tree(self, t: int) -> TreeNodes:
        lo = self.offsets[t]
        hi = self.offsets[t + 1] if t + 1 < len(self.offsets) else self.feature.shape[0]
        return TreeNodes(self.feature[lo:hi], self.threshold[lo:hi], self.left[lo:hi],
                         self.right[lo:hi], self.value[lo:hi], np.zeros(hi - lo, dtype=np.int64))

    def mean(self, X, is_cat) -> np.ndarray:
        return _forest_mean(X, self.offsets, self.feature, self.threshold, self.left,
                            self.right, is_cat, self.value)

    def boosted(self, X, is_cat, out_col, init, rate) -> np.ndarray:
        return _boosted_sum(X, self.offsets, self.feature, self.threshold, self.left,
                            self.right, is_cat, self.value, out_col, init, float(rate))


def _cat_arrays(d: int, cardinalities) -> tuple[np.ndarray, np.ndarray]:
    is_cat = np.zeros(d, dtype=np.bool_)
    n_levels = np.zeros(d, dtype=np.int64)
    for j, card in dict(cardinalities or {}).items():
        is_cat[int(j)] = True
        n_levels[int(j)] = int(card)
    return is_cat, n_levels


def find_best_split(rows, targets, candidate_features=None, criterion="gini",
                    mode="exhaustive", seed=0, cardinalities=None, n_classes=None):
    """Best single split of ``rows`` or ``None`` when no split decreases
    impurity by more than ``1e-12``.

    ``targets`` are class indices for ``gini`` and reals for ``mse``. The
    decrease is ``parent - (n_l/n) left - (n_r/n) right``. Ties go to the
    lowest feature index, then the lowest threshold.
    """
    X = np.ascontiguousarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n < 2:
        return None
    Y = encode_targets(targets, criterion, n_classes)
    feats = np.arange(d) if candidate_features is None else np.unique(
        np.asarray(candidate_features, dtype=np.int64))
    if feats.size == 0:
        raise ValueError("candidate_features must be non-empty")
    is_cat, n_levels = _cat_arrays(d, cardinalities)
    f, t, dec = _split_once(X, Y, np.arange(n, dtype=np.int64), feats, is_cat, n_levels,
                            _criterion_code(criterion), mode == "random_threshold", int(seed))
    if f < 0:
        return None
    return int(f), float(t), float(dec)


def _criterion_code(criterion: str) -> int:
    if criterion == "gini":
        return GINI
    if criterion == "mse":
        return MSE
    raise ValueError(f"unknown criterion {criterion!r}")


def encode_targets(targets, criterion, n_classes=None) -> np.ndarray:
    targets = np.asarray(targets)
    if criterion == "gini":
        labels = targets.astype(np.int64)
        k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
        Y = np.zeros((labels.shape[0], k))
        Y[np.arange(labels.shape[0]), labels] = 1.0
        return Y
    Y = np.asarray(targets, dtype=np.float64)
    return np.ascontiguousarray(Y[:, None] if Y.ndim == 1 else Y)


def presort(X) -> np.ndarray:
    """Per-feature ascending row order, shared by every tree grown on ``X``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def grow_tree(rows, targets, criterion="gini", max_depth=16, min_samples_split=2,
              max_features=None, mode="exhaustive", seed=0, cardinalities=None,
              sample_idx=None, n_classes=None, order=None) -> TreeNodes:
    """Grow one CART tree; leaves hold class frequencies (gini) or means (mse)."""
    X = np.ascontiguousarray(rows, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on an empty training set")
    Y = encode_targets(targets, criterion, n_classes)
    is_cat, n_levels = _cat_arrays(d, cardinalities)
    if sample_idx is None:
        sample_idx = np.arange(n, dtype=np.int64)
    mf = d if max_features is None else int(min(max(max_features, 1), d))
    if order is None:
        order = presort(X) if mode == "exhaustive" else np.zeros((0, 0), dtype=np.int64)
    return TreeNodes(*_grow(X, Y, np.asarray(sample_idx, dtype=np.int64), is_cat, n_levels,
                            _criterion_code(criterion), mode == "random_threshold",
                            int(max_depth), int(min_samples_split), mf, int(seed), order))


def predict_tree(tree: TreeNodes, rows, cardinalities=None) -> np.ndarray:
    X = np.ascontiguousarray(rows, dtype=np.float64)
    is_cat, _ = _cat_arrays(X.shape[1], cardinalities)
    return TreeStack.from_trees([tree]).mean(X, is_cat)
