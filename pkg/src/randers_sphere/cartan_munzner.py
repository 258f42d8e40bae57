"""Homogeneous polynomials satisfying the Cartan-Muenzner equations

    |grad phi|^2 = g^2 r^(2g-2),    lap phi = c r^(g-2),

with exact value, gradient and Laplacian. Degrees 1 and 2 ship as named
families; any homogeneous polynomial can be entered as a monomial table.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CMPolynomial:
    """Base class. Subclasses provide ``value``, ``grad`` and ``laplacian``
    for arrays of shape (..., dim), plus a monomial table via ``terms``."""

    degree: int
    dim: int
    multiplicities: tuple[int, int] | None = None

    def value(self, X) -> np.ndarray:
        raise NotImplementedError

    def grad(self, X) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, X) -> np.ndarray:
        raise NotImplementedError

    def terms(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __call__(self, X):
        return self.value(X)

    @property
    def n(self) -> int:
        return self.dim - 1

    def sphere_value(self, X) -> np.ndarray:
        """phi(x) / |x|^g, the degree-0 extension of the sphere restriction."""
        X = np.asarray(X, dtype=float)
        return self.value(X) / np.linalg.norm(X, axis=-1) ** self.degree

    def sphere_grad(self, X) -> np.ndarray:
        """Round gradient of the restriction at unit X: grad phi - g phi x."""
        X = np.asarray(X, dtype=float)
        return self.grad(X) - self.degree * self.value(X)[..., None] * X

    def to_generic(self) -> "GenericPolynomial":
        exps, coeffs = self.terms()
        return GenericPolynomial(self.degree, exps, coeffs, multiplicities=self.multiplicities)


class LinearCM(CMPolynomial):
    """phi(x) = <x, p> with |p| = 1 (g = 1)."""

    degree = 1

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise ValueError("linear Cartan-Muenzner polynomial needs a unit vector p")
        self.p = p
        self.dim = len(p)
        self.multiplicities = (self.dim - 2, self.dim - 2)

    def value(self, X):
        return np.asarray(X, dtype=float) @ self.p

    def grad(self, X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(self.p, X.shape).copy()

    def laplacian(self, X):
        return np.zeros(np.shape(X)[:-1])

    def terms(self):
        exps = np.eye(self.dim, dtype=np.int64)
        keep = self.p != 0
        return exps[keep], self.p[keep].copy()

    def __repr__(self):
        return f"LinearCM(p={self.p.tolist()})"


class CliffordQuadric(CMPolynomial):
    """phi(x) = |x_1|^2 - |x_2|^2 on R^(p+1) x R^(q+1) (g = 2, n = p+q+1).

    Declared multiplicities are (p, q), the dimensions of the two sphere
    factors of the level sets.
    """

    degree = 2

    def __init__(self, p: int, q: int):
        if p < 0 or q < 0:
            raise ValueError("block sizes p, q must be nonnegative")
        self.p, self.q = int(p), int(q)
        self.dim = self.p + self.q + 2
        self.multiplicities = (self.p, self.q)
        self._sign = np.concatenate([np.ones(self.p + 1), -np.ones(self.q + 1)])

    def value(self, X):
        X = np.asarray(X, dtype=float)
        return (X * X) @ self._sign

    def grad(self, X):
        return 2.0 * np.asarray(X, dtype=float) * self._sign

    def laplacian(self, X):
        return np.full(np.shape(X)[:-1], 2.0 * (self.p - self.q))

    def terms(self):
        return 2 * np.eye(self.dim, dtype=np.int64), self._sign.copy()

    def __repr__(self):
        return f"CliffordQuadric(p={self.p}, q={self.q})"


class GenericPolynomial(CMPolynomial):
    """sum_k c_k prod_j x_j^(e_kj), homogeneous of degree g."""

    def __init__(self, g: int, exponents, coeffs, multiplicities=None):
        exps = np.asarray(exponents, dtype=np.int64)
        coeffs = np.asarray(coeffs, dtype=float)
        if exps.ndim != 2 or len(exps) != len(coeffs):
            raise ValueError("exponent table must be (terms, dim) with one coefficient per term")
        if np.any(exps < 0):
            raise ValueError("negative exponents")
        if np.any(exps.sum(axis=1) != g):
            raise ValueError(f"every monomial must have total degree {g}")
        self.degree = int(g)
        self.dim = exps.shape[1]
        self.exps = exps
        self.coeffs = coeffs
        self.multiplicities = tuple(multiplicities) if multiplicities is not None else None

    def _monomials(self, X, exps):
        X = np.asarray(X, dtype=float)
        return np.prod(X[..., None, :] ** exps, axis=-1)

    def value(self, X):
        return self._monomials(X, self.exps) @ self.coeffs

    def grad(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape)
        for j in range(self.dim):
            e = self.exps[:, j]
            mask = e > 0
            if not mask.any():
                continue
            lowered = self.exps[mask].copy()
            lowered[:, j] -= 1
            out[..., j] = self._monomials(X, lowered) @ (self.coeffs[mask] * e[mask])
        return out

    def laplacian(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1])
        for j in range(self.dim):
            e = self.exps[:, j]
            mask = e > 1
            if not mask.any():
                continue
            lowered = self.exps[mask].copy()
            lowered[:, j] -= 2
            out += self._monomials(X, lowered) @ (self.coeffs[mask] * e[mask] * (e[mask] - 1))
        return out

    def terms(self):
        return self.exps.copy(), self.coeffs.copy()

    @classmethod
    def from_json(cls, data) -> "GenericPolynomial":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        terms = data["terms"]
        if not terms:
            raise ValueError("polynomial needs at least one term")
        return cls(int(data["g"]), [t["exponents"] for t in terms], [t["coeff"] for t in terms],
                   multiplicities=data.get("multiplicities"))

    def to_json(self) -> dict:
        out = {
            "g": self.degree,
            "terms": [{"exponents": e.tolist(), "coeff": float(c)} for e, c in zip(self.exps, self.coeffs)],
        }
        if self.multiplicities is not None:
            out["multiplicities"] = list(self.multiplicities)
        return out

    def __repr__(self):
        return f"GenericPolynomial(g={self.degree}, dim={self.dim}, terms={len(self.coeffs)})"


def grad_E(phi: CMPolynomial, x) -> np.ndarray:
    return phi.grad(x)


def laplacian_E(phi: CMPolynomial, x) -> np.ndarray:
    out = phi.laplacian(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class CMReport:
    degree: int
    samples: int
    seed: int
    max_grad_residual: float
    c_fit: float
    max_laplacian_residual: float
    c_predicted: float | None = None
    orientation: str = "undeclared"
    notes: list[str] = field(default_factory=list)

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_grad_residual < tol and self.max_laplacian_residual < tol

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def cm_check(phi: CMPolynomial, samples: int = 200, seed: int = 0) -> CMReport:
    """Test the Cartan-Muenzner equations at random points with |x| in [0.5, 2].

    The Laplacian constant is fitted by least squares; with declared
    multiplicities (m1, m2) the predicted g^2 (m2 - m1) / 2 is compared up to
    sign, since which multiplicity is called m1 is a labeling choice.
    """
    rng = np.random.default_rng(seed)
    g = phi.degree
    U = rng.standard_normal((samples, phi.dim))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    r = rng.uniform(0.5, 2.0, samples)
    X = U * r[:, None]
    G = phi.grad(X)
    res1 = np.abs(np.einsum("mi,mi->m", G, G) - g**2 * r ** (2 * g - 2))
    lap = phi.laplacian(X)
    basis = r ** (g - 2)
    c_fit = float(basis @ lap / (basis @ basis))
    res2 = np.abs(lap - c_fit * basis)
    report = CMReport(
        degree=g, samples=samples, seed=seed,
        max_grad_residual=float(res1.max()), c_fit=c_fit,
        max_laplacian_residual=float(res2.max()),
    )
    if phi.multiplicities is not None:
        m1, m2 = phi.multiplicities
        c_pred = g**2 * (m2 - m1) / 2
        report.c_predicted = float(c_pred)
        if abs(c_fit - c_pred) <= 1e-8 * max(1.0, abs(c_pred)):
            report.orientation = "consistent"
        elif abs(c_fit + c_pred) <= 1e-8 * max(1.0, abs(c_pred)):
            report.orientation = "reversed"
            report.notes.append("fitted c matches the prediction with the multiplicity labels swapped")
        else:
            report.orientation = "mismatch"
    return report


def project_to_level(phi: CMPolynomial, X, t0: float, tol: float = 1e-12, max_iter: int = 50):
    """Newton-project unit points X onto {phi/|x|^g = t0} on the sphere.

    Step: x <- x - (f - t0) grad_h f / |grad_h f|^2, renormalized each
    iteration. Returns (points, converged mask).
    """
    X = np.array(X, dtype=float)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    done = np.zeros(len(X), dtype=bool)
    for _ in range(max_iter):
        f = phi.value(X)
        err = f - t0
        done = np.abs(err) < tol
        if done.all():
            break
        G = phi.sphere_grad(X)
        gg = np.einsum("mi,mi->m", G, G)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (err / gg)[:, None] * G
        step[done] = 0.0
        step[~np.isfinite(step)] = 0.0
        X = X - step
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    f = phi.value(X)
    done = np.abs(f - t0) < tol
    return X, done
