"""Numba kernels for histogram accumulation, split search and tree evaluation.

Histograms are flat ``(total_bins, 3)`` arrays of (gradient sum, hessian sum,
row count); feature ``f`` owns rows ``offsets[f]:offsets[f + 1]``.
"""
import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# the bundled TBB is often too old; try OpenMP first
_numba_config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


@njit(parallel=True, cache=True)
def build_histogram(binned, rows, grads, hess, features, offsets, G, H, C,
                    sp_indptr, sp_rows, default_bin, in_node):
    """Accumulate one node's histogram.

    A feature with ``default_bin[f] >= 0`` stores its rows outside the default
    bin in ``sp_rows[sp_indptr[f]:sp_indptr[f + 1]]``; when that list is shorter
    than the node, only those rows are visited (filtered by ``in_node``) and the
    default bin is filled from the node totals.
    """
    hist = np.zeros((offsets[-1], 3))
    m = rows.shape[0]
    g = np.empty(m)
    h = np.empty(m)
    for i in range(m):
        g[i] = grads[rows[i]]
        h[i] = hess[rows[i]]
    # one feature per task, each sum in a fixed order: independent of thread count
    for k in prange(features.shape[0]):
        f = features[k]
        base = offsets[f]
        start = sp_indptr[f]
        stop = sp_indptr[f + 1]
        if default_bin[f] >= 0 and stop - start < m:
            sg = 0.0
            sh = 0.0
            sc = 0.0
            for j in range(start, stop):
                r = sp_rows[j]
                if in_node[r]:
                    b = base + binned[f, r]
                    hist[b, 0] += grads[r]
                    hist[b, 1] += hess[r]
                    hist[b, 2] += 1.0
                    sg += grads[r]
                    sh += hess[r]
                    sc += 1.0
            d = base + default_bin[f]
            hist[d, 0] = G - sg
            hist[d, 1] = H - sh
            hist[d, 2] = C - sc
        else:
            col = binned[f]
            for i in range(m):
                b = base + col[rows[i]]
                hist[b, 0] += g[i]
                hist[b, 1] += h[i]
                hist[b, 2] += 1.0
    return hist


@njit(cache=True)
def histogram_discrepancy(hist, offsets, features, G, H, C):
    worst = 0.0
    for k in range(features.shape[0]):
        f = features[k]
        sg = 0.0
        sh = 0.0
        sc = 0.0
        for b in range(offsets[f], offsets[f + 1]):
            sg += hist[b, 0]
            sh += hist[b, 1]
            sc += hist[b, 2]
        d = max(abs(sg - G) / (1.0 + abs(G)), abs(sh - H) / (1.0 + abs(H)), abs(sc - C))
        if d > worst:
            worst = d
    return worst


@njit(cache=True)
def best_split(hist, offsets, features, G, H, C, lam, min_leaf):
    """Scan features in the given (ascending) order; strict ``>`` keeps the first maximum.

    Returns (feature, bin, gain, left grad sum, left hess sum, left count);
    feature is -1 when no split has positive gain.
    """
    best_gain = 0.0
    best_f = -1
    best_b = -1
    best_gl = 0.0
    best_hl = 0.0
    best_cl = 0.0
    parent = G * G / (H + lam) if H + lam > 0 else 0.0
    for k in range(features.shape[0]):
        f = features[k]
        gl = 0.0
        hl = 0.0
        cl = 0.0
        base = offsets[f]
        for b in range(offsets[f + 1] - base - 1):
            gl += hist[base + b, 0]
            hl += hist[base + b, 1]
            cl += hist[base + b, 2]
            if cl < min_leaf:
                continue
            if C - cl < min_leaf:
                break
            gr = G - gl
            hr = H - hl
            if hl + lam <= 0 or hr + lam <= 0:
                continue
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_b = b
                best_gl = gl
                best_hl = hl
                best_cl = cl
    return best_f, best_b, best_gain, best_gl, best_hl, best_cl


@njit(cache=True)
def add_tree_output(binned, feature, threshold, left, right, value, out):
    n = binned.shape[1]
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if binned[feature[node], i] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


@njit(cache=True)
def partition_rows(binned_col, rows, threshold):
    n_left = 0
    for i in range(rows.shape[0]):
        if binned_col[rows[i]] <= threshold:
            n_left += 1
    left = np.empty(n_left, dtype=rows.dtype)
    right = np.empty(rows.shape[0] - n_left, dtype=rows.dtype)
    a = 0
    c = 0
    for i in range(rows.shape[0]):
        r = rows[i]
        if binned_col[r] <= threshold:
            left[a] = r
            a += 1
        else:
            right[c] = r
            c += 1
    return left, right


@njit(cache=True)
def mark_rows(in_node, rows, flag):
    for i in range(rows.shape[0]):
        in_node[rows[i]] = flag


@njit(cache=True)
def node_stats(grads, hess, rows):
    G = 0.0
    H = 0.0
    for i in range(rows.shape[0]):
        G += grads[rows[i]]
        H += hess[rows[i]]
    return G, H
