"""Parameter presets for the worked examples and figure data."""
from __future__ import annotations

import math

import numpy as np

from .cartan_munzner import CliffordQuadric, LinearCM
from .skew import SkewGenerator

FIG1_ABC = (0.0, 0.5, 0.0)
FIG1_SPAN = 4 * math.pi
FIG2_ABC = (0.0, 1.0 - 1.0 / math.sqrt(2.0), 0.0)
FIG2_SPAN = 29 * math.pi


def fig34_generator() -> SkewGenerator:
    """The generator of the F_Q family picture: only q13 = 1/2 nonzero."""
    return SkewGenerator.from_abc(0.0, 0.5, 0.0)


def example_g1(Q: SkewGenerator | None = None):
    """phi = <x, e1> on R^3 with the figure generator unless Q is given."""
    phi = LinearCM([1.0, 0.0, 0.0])
    return phi, fig34_generator() if Q is None else Q


def g2_blocks(n: int) -> tuple[int, int]:
    """(p, q) with p + q + 1 = n, split as evenly as possible."""
    if n < 1:
        raise ValueError("g = 2 example needs n >= 1")
    p = (n - 1) // 2
    return p, n - 1 - p


def example_g2(n: int = 4, a: float = 0.3, p: int | None = None):
    """Clifford quadric on R^(p+1) x R^(q+1) with a single rotation mixing
    the last coordinate of the first factor and the first of the second."""
    if p is None:
        p, q = g2_blocks(n)
    else:
        q = n - 1 - p
        if q < 0:
            raise ValueError("p must be at most n - 1")
    if not abs(a) < 1.0:
        raise ValueError("rate a must satisfy |a| < 1")
    M = np.zeros((n + 1, n + 1))
    M[p, p + 1] = a
    M[p + 1, p] = -a
    return CliffordQuadric(p, q), SkewGenerator(M)


def g1_focal_points(Q: SkewGenerator) -> tuple[np.ndarray, np.ndarray]:
    """Predicted M_+ and M_- for phi = <x, e1>: exp(+-pi/2 Q)(+-e1)."""
    e1 = np.zeros(Q.dim)
    e1[0] = 1.0
    return Q.exp(math.pi / 2) @ e1, -(Q.exp(-math.pi / 2) @ e1)


def g2_plus_constraint(X, p: int, a: float) -> np.ndarray:
    """Residual of the linear equation cutting out M_+ for ``example_g2``:
    the (p+2)-th coordinate plus tan(pi a / 4) times the (p+1)-th (1-based)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return X[:, p + 1] + math.tan(math.pi * a / 4) * X[:, p]
