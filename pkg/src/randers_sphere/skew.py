"""Skew-symmetric generators Q in o(n+1), their exponentials and the
Killing field V = Qx on the unit sphere.

Points and tangent vectors are plain numpy arrays; the ``as_sphere_point``
and ``as_tangent`` helpers enforce the unit-norm and tangency invariants at
API boundaries.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

ANTISYM_TOL = 1e-12
ADMISSIBLE_EIG_TOL = 1e-12
SPHERE_TOL = 1e-12
TANGENT_TOL = 1e-10


class InadmissibleGenerator(ValueError):
    """Raised when I + Q^2 is not positive definite (|Qx| reaches 1)."""


def as_sphere_point(x, tol: float = SPHERE_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(r - 1.0) > tol):
        raise ValueError(f"point not on the unit sphere (|x|-1 = {np.max(np.abs(r - 1.0)):.3e})")
    return x


def as_tangent(x, v, tol: float = TANGENT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    dot = np.einsum("...i,...i->...", np.asarray(x, dtype=float), v)
    if np.any(np.abs(dot) > tol * np.maximum(1.0, np.linalg.norm(v, axis=-1))):
        raise ValueError(f"vector not tangent to the sphere (<x,v> = {np.max(np.abs(dot)):.3e})")
    return v


def tangent_projection(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Remove the component of ``v`` along ``x`` (``x`` need not be unit)."""
    x = np.asarray(x, dtype=float)
    coef = np.einsum("...i,...i->...", x, v) / np.einsum("...i,...i->...", x, x)
    return v - coef[..., None] * x


@dataclass(frozen=True, eq=False)
class StandardForm:
    """Q = P blockdiag(Q_1, ..., Q_j, 0) P^T with Q_i = [[0, a_i], [-a_i, 0]].

    The pair for block i occupies columns 2i, 2i+1 of P; rates are
    nonnegative and sorted descending.
    """

    P: np.ndarray
    rates: np.ndarray

    @property
    def n_blocks(self) -> int:
        return len(self.rates)

    @property
    def zero_block(self) -> int:
        return self.P.shape[0] - 2 * len(self.rates)

    def block_matrix(self) -> np.ndarray:
        d = self.P.shape[0]
        B = np.zeros((d, d))
        for i, a in enumerate(self.rates):
            B[2 * i, 2 * i + 1] = a
            B[2 * i + 1, 2 * i] = -a
        return B

    def reconstruct(self) -> np.ndarray:
        return self.P @ self.block_matrix() @ self.P.T


def _compute_standard_form(Q: np.ndarray) -> StandardForm:
    d = Q.shape[0]
    T, Z = scipy.linalg.schur(Q, output="real")
    zero_tol = 1e-13 * max(1.0, np.abs(Q).max())
    pairs, singles = [], []
    i = 0
    while i < d:
        if i + 1 < d and abs(T[i + 1, i]) > zero_tol:
            a = 0.5 * (T[i, i + 1] - T[i + 1, i])
            u, v = Z[:, i].copy(), Z[:, i + 1].copy()
            if a < 0:
                v = -v
                a = -a
            if a <= zero_tol:
                singles.extend([u, v])
            else:
                pairs.append((a, u, v))
            i += 2
        else:
            singles.append(Z[:, i].copy())
            i += 1
    pairs.sort(key=lambda item: -item[0])
    cols = []
    for _, u, v in pairs:
        cols.extend([u, v])
    cols.extend(singles)
    P = np.column_stack(cols) if cols else np.eye(d)
    return StandardForm(P=P, rates=np.array([a for a, _, _ in pairs], dtype=float))


class SkewGenerator:
    """An antisymmetric (n+1)x(n+1) matrix Q defining V = Qx and F_Q.

    Inputs with antisymmetry defect up to ``ANTISYM_TOL`` are projected to
    (Q - Q^T)/2; anything worse is rejected.
    """

    def __init__(self, entries):
        Q = np.array(entries, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"generator must be a square matrix, got shape {Q.shape}")
        if Q.shape[0] < 2:
            raise ValueError("generator must be at least 2x2")
        defect = np.abs(Q + Q.T).max()
        if defect > ANTISYM_TOL:
            raise ValueError(f"matrix is not antisymmetric (defect {defect:.3e})")
        Q = 0.5 * (Q - Q.T)
        Q.setflags(write=False)
        self._Q = Q

    @property
    def entries(self) -> np.ndarray:
        return self._Q

    @property
    def dim(self) -> int:
        """Ambient dimension n+1."""
        return self._Q.shape[0]

    @property
    def n(self) -> int:
        """Sphere dimension."""
        return self._Q.shape[0] - 1

    def __repr__(self) -> str:
        return f"SkewGenerator(n={self.n}, rates={np.round(self.rates, 6).tolist()})"

    @classmethod
    def zero(cls, n: int) -> "SkewGenerator":
        return cls(np.zeros((n + 1, n + 1)))

    @classmethod
    def from_abc(cls, a: float, b: float, c: float) -> "SkewGenerator":
        """The 3x3 generator [[0, a, b], [-a, 0, c], [-b, -c, 0]]."""
        return cls([[0.0, a, b], [-a, 0.0, c], [-b, -c, 0.0]])

    @classmethod
    def from_rates(cls, rates, n: int) -> "SkewGenerator":
        """Block-diagonal generator with Q[2i, 2i+1] = a_i, remaining block zero."""
        rates = list(rates)
        if 2 * len(rates) > n + 1:
            raise ValueError("too many rotation blocks for this dimension")
        Q = np.zeros((n + 1, n + 1))
        for i, a in enumerate(rates):
            Q[2 * i, 2 * i + 1] = a
            Q[2 * i + 1, 2 * i] = -a
        return cls(Q)

    @classmethod
    def from_json(cls, data) -> "SkewGenerator":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        entries = data["entries"]
        gen = cls(entries)
        if "n" in data and int(data["n"]) != gen.n:
            raise ValueError(f"declared n={data['n']} does not match a {gen.dim}x{gen.dim} matrix")
        return gen

    def to_json(self) -> dict:
        return {"n": self.n, "entries": self._Q.tolist()}

    # -- cached spectral data ------------------------------------------------

    @cached_property
    def standard(self) -> StandardForm:
        return _compute_standard_form(self._Q)

    @property
    def rates(self) -> np.ndarray:
        return self.standard.rates

    @cached_property
    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(np.eye(self.dim) + self._Q @ self._Q).min())

    @property
    def admissible(self) -> bool:
        return self.min_eig > ADMISSIBLE_EIG_TOL

    def require_admissible(self) -> None:
        if not self.admissible:
            raise InadmissibleGenerator(
                f"I + Q^2 is not positive definite (min eigenvalue {self.min_eig:.3e})"
            )

    # -- group action --------------------------------------------------------

    def exp(self, t: float) -> np.ndarray:
        sf = self.standard
        B = np.eye(self.dim)
        for i, a in enumerate(sf.rates):
            c, s = np.cos(t * a), np.sin(t * a)
            B[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[c, s], [-s, c]]
        return sf.P @ B @ sf.P.T

    def rotate(self, X, t) -> np.ndarray:
        """exp(t_k Q) applied to rows X_k; ``t`` is a scalar or one angle per row."""
        X = np.asarray(X, dtype=float)
        sf = self.standard
        Z = X @ sf.P
        t = np.asarray(t, dtype=float)
        out = Z.copy()
        for i, a in enumerate(sf.rates):
            c, s = np.cos(t * a), np.sin(t * a)
            z0, z1 = Z[..., 2 * i], Z[..., 2 * i + 1]
            out[..., 2 * i] = c * z0 + s * z1
            out[..., 2 * i + 1] = -s * z0 + c * z1
        return out @ sf.P.T

    def apply(self, X) -> np.ndarray:
        """Q x for a point or a stack of points (rows)."""
        return np.asarray(X, dtype=float) @ self._Q.T


def validate_admissible(Q) -> tuple[bool, float]:
    """Return (I + Q^2 positive definite, smallest eigenvalue of I + Q^2)."""
    gen = Q if isinstance(Q, SkewGenerator) else SkewGenerator(Q)
    return gen.admissible, gen.min_eig


def mat_exp(Q: SkewGenerator, t: float) -> np.ndarray:
    return Q.exp(t)


def standard_form(Q: SkewGenerator) -> StandardForm:
    return Q.standard


def killing_field(Q: SkewGenerator, x) -> np.ndarray:
    Q.require_admissible()
    x = as_sphere_point(x)
    return Q.apply(x)


def flow(Q: SkewGenerator, t: float, x) -> np.ndarray:
    Q.require_admissible()
    x = as_sphere_point(x)
    return Q.rotate(x, t)
