"""1D Lagrange bases and Gauss-Legendre rules on the reference interval [0, 1]."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """``n``-point Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def lagrange_1d(degree, x):
    """Values and derivatives of the equispaced Lagrange basis at points ``x``.

    Returns two arrays of shape ``(len(x), degree + 1)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nodes = np.linspace(0.0, 1.0, degree + 1)
    n = degree + 1
    V = np.ones((len(x), n))
    D = np.zeros((len(x), n))
    for i in range(n):
        others = [k for k in range(n) if k != i]
        denom = np.prod([nodes[i] - nodes[k] for k in others])
        for k in others:
            V[:, i] *= x - nodes[k]
        for m in others:
            term = np.ones(len(x))
            for k in others:
                if k != m:
                    term *= x - nodes[k]
            D[:, i] += term
        V[:, i] /= denom
        D[:, i] /= denom
    return V, D
