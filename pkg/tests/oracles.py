"""Independent reference implementations used by the tests.

Nothing here imports the code it checks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np


def rbf_gram(X, gamma):
    X = np.asarray(X, dtype=float)
    n = len(X)
    K = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            K[a, b] = math.exp(-gamma * sum((X[a, k] - X[b, k]) ** 2 for k in range(X.shape[1])))
    return K


def dual_value(alpha, y, K):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def brute_force_dual(K, y, C, feas_tol=1e-10):
    """Global optimum of the C-SVC dual by enumerating active sets.

    Every index is at 0, at C, or free. For a given split the free
    multipliers solve the stationarity system

        Q_FF a_F + y_F b = 1 - Q_FU C,   y_F . a_F = -y_U . C

    (Q_ij = y_i y_j K_ij). The dual is concave, so the best feasible
    candidate over all splits is the maximum.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    Q = np.outer(y, y) * K
    best, best_alpha = -np.inf, None
    for states in itertools.product((0, 1, 2), repeat=n):
        alpha = np.zeros(n)
        upper = [i for i, s in enumerate(states) if s == 1]
        free = [i for i, s in enumerate(states) if s == 2]
        alpha[upper] = C
        if not free:
            if abs(y @ alpha) > feas_tol:
                continue
        else:
            m = len(free)
            A = np.zeros((m + 1, m + 1))
            A[:m, :m] = Q[np.ix_(free, free)]
            A[:m, m] = y[free]
            A[m, :m] = y[free]
            rhs = np.empty(m + 1)
            rhs[:m] = 1.0 - Q[np.ix_(free, upper)].sum(axis=1) * C if upper else 1.0
            rhs[m] = -(y[upper].sum() * C) if upper else 0.0
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if not np.allclose(A @ sol, rhs, atol=1e-9):
                continue
            a_free = sol[:m]
            if a_free.min() < -feas_tol or a_free.max() > C + feas_tol:
                continue
            alpha[free] = np.clip(a_free, 0.0, C)
            if abs(y @ alpha) > 1e-8:
                continue
        val = dual_value(alpha, y, K)
        if val > best:
            best, best_alpha = val, alpha
    return best, best_alpha


def naive_similar_pairs(word_lists, threshold):
    """Double loop over all pairs with a from-scratch multiset overlap."""
    total = 0
    for i in range(len(word_lists)):
        for j in range(i + 1, len(word_lists)):
            a, b = word_lists[i], word_lists[j]
            if not a or not b:
                continue
            remaining = list(b)
            common = 0
            for w in a:
                if w in remaining:
                    remaining.remove(w)
                    common += 1
            if common / min(len(a), len(b)) >= threshold:
                total += 1
    return total


def multiset_overlap(a, b):
    return sum((Counter(a) & Counter(b)).values())
