"""Independent reference implementations used by the tests."""
import numpy as np


def brute_force_split(X, grads, hess, lam, min_leaf, features=None):
    """Exhaustive search over every feature and every cut between distinct values.

    Returns (feature, bin, gain) where ``bin`` is the index of the largest
    distinct value sent left, or None when no cut has positive gain.
    Gains are compared exactly; the first maximum in (feature, bin) order wins.
    """
    X = np.asarray(X, dtype=float)
    n, F = X.shape
    GP, HP = float(np.sum(grads)), float(np.sum(hess))
    parent = GP * GP / (HP + lam)
    best = None
    for f in range(F) if features is None else features:
        distinct = np.unique(X[:, f])
        for b, cut in enumerate(distinct[:-1]):
            mask = X[:, f] <= cut
            nl = int(mask.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            GL, HL = float(np.sum(grads[mask])), float(np.sum(hess[mask]))
            GR, HR = GP - GL, HP - HL
            gain = GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent
            if gain > 0 and (best is None or gain > best[2]):
                best = (f, b, gain)
    return best


def histogram_of(binned, grads, hess, n_bins):
    """(F, B, 3) array of per-bin gradient sums, hessian sums and counts."""
    F = binned.shape[0]
    hist = np.zeros((F, int(max(n_bins)), 3))
    for f in range(F):
        np.add.at(hist[f, :, 0], binned[f], grads)
        np.add.at(hist[f, :, 1], binned[f], hess)
        np.add.at(hist[f, :, 2], binned[f], 1.0)
    return hist


def random_split_problem(rng, dyadic=True):
    n = int(rng.integers(2, 257))
    F = int(rng.integers(1, 9))
    cols = []
    for _ in range(F):
        levels = int(rng.integers(1, 12))
        kind = rng.integers(3)
        if kind == 0:
            cols.append(rng.integers(0, levels + 1, n).astype(float))
        elif kind == 1:
            cols.append(np.round(rng.normal(size=n), 1))
        else:
            cols.append(rng.uniform(size=n))
    X = np.column_stack(cols)
    if dyadic:
        grads = rng.integers(-64, 65, n) / 16.0
        hess = rng.integers(1, 33, n) / 16.0
    else:
        grads = rng.normal(size=n)
        hess = rng.uniform(0.05, 1.0, n)
    lam = float(rng.choice([0.0, 0.5, 1.0, 3.0]))
    min_leaf = int(rng.integers(1, 6))
    return X, grads, hess, lam, min_leaf


def arr_oracle(total_payment, principal, months):
    """ARR by logarithms, independent of the library's power form."""
    if total_payment == 0:
        return 0.0
    return float(np.exp(np.log(total_payment / principal) * 12.0 / months))
