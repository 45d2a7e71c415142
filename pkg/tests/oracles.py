"""Independent reference implementations used only by the tests.

Everything here is written from the textbook formulas with plain loops and
dense solves, sharing no code with the package.
"""

import math

import numpy as np


def kernel_value(family, length_scale, variance, x, x2):
    r = math.sqrt(sum((a - b) ** 2 for a, b in zip(x, x2)))
    s = r / length_scale
    if family == "se":
        return variance * math.exp(-0.5 * s * s)
    return variance * (1.0 + math.sqrt(3.0) * s) * math.exp(-math.sqrt(3.0) * s)


def dense_gp(family, length_scale, variance, noise, X, y, Xq):
    """Posterior mean and variance via ``numpy.linalg.solve`` on the full system."""
    n = len(X)
    K = np.array([[kernel_value(family, length_scale, variance, X[i], X[j]) for j in range(n)] for i in range(n)])
    A = K + noise * np.eye(n)
    means, variances = [], []
    for q in Xq:
        k = np.array([kernel_value(family, length_scale, variance, q, X[i]) for i in range(n)])
        means.append(float(k @ np.linalg.solve(A, y)))
        variances.append(float(variance - k @ np.linalg.solve(A, k)))
    return np.array(means), np.array(variances)


def fold_cumsum(values):
    out, acc = [], 0.0
    for v in values:
        acc = acc + v
        out.append(acc)
    return out
