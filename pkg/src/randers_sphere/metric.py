"""The Randers metric F_Q obtained by navigation on the round sphere with
wind V = Qx, and sphere differential operators computed from ambient
finite differences of degree-0 extensions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .skew import SkewGenerator, as_sphere_point, as_tangent, tangent_projection

GRAD_STEP = 1e-5
HESS_STEP = 1e-4
DEGENERATE_GRAD = 1e-7


class DegeneratePoint(ValueError):
    """Raised where |du|_h is numerically zero (critical or focal point)."""


def randers_norm(Q: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """F(x, y) = (sqrt(lam |y|^2 + V0^2) - V0) / lam with V = Qx, for any
    ambient x, y (no tangency or unit-norm checks).

    Uses the conjugate form |y|^2 / (sqrt(.) + V0) when V0 > 0 to avoid
    cancellation.
    """
    V = x @ Q.T
    lam = 1.0 - np.einsum("...i,...i->...", V, V)
    V0 = np.einsum("...i,...i->...", V, y)
    yy = np.einsum("...i,...i->...", y, y)
    root = np.sqrt(lam * yy + V0 * V0)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (root - V0) / lam
        conj = yy / (root + V0)
    out = np.where(V0 > 0, conj, direct)
    return np.where(yy == 0.0, 0.0, out)


def metric_eval(Q: SkewGenerator, x, y) -> np.ndarray:
    """Randers norm F_Q(x, y) of a tangent vector y at a sphere point x."""
    Q.require_admissible()
    x = as_sphere_point(x)
    y = as_tangent(x, y)
    out = randers_norm(Q.entries, x, y)
    return float(out) if np.ndim(out) == 0 else out


def dual_norm(Q: SkewGenerator, x, gradh) -> np.ndarray:
    """F_Q of the Legendre gradient of u, given the round gradient of u.

    For navigation data the dual norm of du is |du|_h + du(V), so the
    Legendre transform itself is never needed.
    """
    x = np.asarray(x, dtype=float)
    gradh = np.asarray(gradh, dtype=float)
    out = np.linalg.norm(gradh, axis=-1) + np.einsum("...i,...i->...", gradh, Q.apply(x))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ScalarField:
    """A function on ambient space with declared positive homogeneity degree.

    ``func`` must accept an array of shape (..., n+1) and return shape (...).
    """

    func: Callable[[np.ndarray], np.ndarray]
    degree: float = 0.0

    def __call__(self, X):
        return self.func(np.asarray(X, dtype=float))

    def degree0(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.degree == 0:
            return self.func
        k = self.degree

        def u(X):
            r = np.linalg.norm(X, axis=-1)
            return self.func(X) / r**k

        return u

    def homogeneity_defect(self, dim: int, samples: int = 50, seed: int = 0,
                           scales=(0.5, 2.0, 10.0)) -> float:
        """Max |f(tx) - t^k f(x)| / max(1, |t^k f(x)|) over random rays."""
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((samples, dim))
        base = self(X)
        worst = 0.0
        for t in scales:
            ref = t**self.degree * base
            err = np.abs(self(t * X) - ref) / np.maximum(1.0, np.abs(ref))
            worst = max(worst, float(err.max()))
        return worst


def _as_func(u) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(u, ScalarField):
        return u.degree0()
    return u


def fd_gradient(func, X: np.ndarray, h: float = GRAD_STEP) -> np.ndarray:
    """Central-difference ambient gradient of a vectorized ``func`` at rows X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, d = X.shape
    E = h * np.eye(d)
    stencil = np.concatenate([X[:, None, :] + E[None], X[:, None, :] - E[None]], axis=1)
    vals = np.asarray(func(stencil.reshape(-1, d))).reshape(m, 2 * d)
    return (vals[:, :d] - vals[:, d:]) / (2 * h)


def fd_derivatives(func, X: np.ndarray, h1: float = GRAD_STEP, h2: float = HESS_STEP,
                   order: int = 2):
    """Value, gradient and Hessian of ``func`` at rows X in one batched call.

    Gradient uses a central stencil at ``h1``; the Hessian uses second-order
    (``order=2``) or fourth-order (``order=4``) central stencils at ``h2``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, d = X.shape
    I = np.eye(d)
    pts = [X[:, None, :]]
    pts.append(X[:, None, :] + h1 * I[None])
    pts.append(X[:, None, :] - h1 * I[None])
    offsets = [1, 2] if order == 4 else [1]
    for k in offsets:
        pts.append(X[:, None, :] + k * h2 * I[None])
        pts.append(X[:, None, :] - k * h2 * I[None])
    iu, ju = np.triu_indices(d, 1)
    npair = len(iu)
    if npair:
        for k in offsets:
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                vec = sa * I[iu] + sb * I[ju]
                pts.append(X[:, None, :] + k * h2 * vec[None])
    stencil = np.concatenate(pts, axis=1)
    vals = np.asarray(func(stencil.reshape(-1, d)), dtype=float).reshape(m, -1)

    f0 = vals[:, 0]
    c = 1
    fp1, fm1 = vals[:, c : c + d], vals[:, c + d : c + 2 * d]
    c += 2 * d
    grad = (fp1 - fm1) / (2 * h1)
    axial = {}
    for k in offsets:
        axial[k] = (vals[:, c : c + d], vals[:, c + d : c + 2 * d])
        c += 2 * d
    diag_terms = {}
    for k in offsets:
        p, q = axial[k]
        diag_terms[k] = p + q - 2 * f0[:, None]
    if order == 4:
        diag = (16 * diag_terms[1] - diag_terms[2]) / (12 * h2**2)
    else:
        diag = diag_terms[1] / h2**2
    H = np.zeros((m, d, d))
    H[:, np.arange(d), np.arange(d)] = diag
    if npair:
        mixed = {}
        for k in offsets:
            pp = vals[:, c : c + npair]
            pm = vals[:, c + npair : c + 2 * npair]
            mp = vals[:, c + 2 * npair : c + 3 * npair]
            mm = vals[:, c + 3 * npair : c + 4 * npair]
            c += 4 * npair
            mixed[k] = (pp - pm - mp + mm) / (4 * (k * h2) ** 2)
        if order == 4:
            off = (4 * mixed[1] - mixed[2]) / 3
        else:
            off = mixed[1]
        H[:, iu, ju] = off
        H[:, ju, iu] = off
    return f0, grad, H


def sphere_gradient(u, x, h: float = GRAD_STEP) -> np.ndarray:
    """Round-sphere gradient of u at x from its degree-0 extension.

    ``u`` is a ScalarField (any degree; the degree-0 extension is formed) or a
    vectorized callable already of degree 0.
    """
    x = as_sphere_point(x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    g = fd_gradient(_as_func(u), X, h)
    g = tangent_projection(X, g)
    return g[0] if single else g


def sphere_laplacian(u, x, h: float = HESS_STEP, order: int = 2) -> np.ndarray:
    """Round-sphere Laplacian of u at x: the ambient Laplacian of the
    degree-0 extension."""
    if h < 1e-7:
        raise ValueError("second-difference step below 1e-7 loses all precision")
    x = as_sphere_point(x)
    single = x.ndim == 1
    _, _, H = fd_derivatives(_as_func(u), np.atleast_2d(x), h2=h, order=order)
    lap = np.trace(H, axis1=1, axis2=2)
    return float(lap[0]) if single else lap


def system_lhs_from_derivatives(Q: np.ndarray, X: np.ndarray, grad: np.ndarray,
                                H: np.ndarray):
    """(A, B) of the Randers isoparametric system from ambient derivatives of
    a degree-0 function. Returns also |du|_h."""
    V = X @ Q.T
    gnorm = np.linalg.norm(grad, axis=-1)
    A = gnorm + np.einsum("mi,mi->m", grad, V)
    lap = np.trace(H, axis1=1, axis2=2)
    # D_{grad u} <grad u, Qx> = grad^T H Qx  (the Q-term vanishes by skewness)
    dw = np.einsum("mi,mij,mj->m", grad, H, V)
    with np.errstate(divide="ignore", invalid="ignore"):
        B = lap / gnorm + dw / gnorm**2
    return A, B, gnorm


def iso_system_lhs(Q: SkewGenerator, u, x, order: int = 2):
    """Left-hand sides (A, B) of the Randers isoparametric system at x.

    A = |du|_h + <du, V> is F_Q(grad u); B = lap_h u / |du|_h
    + <d<du, V>, du> / |du|^2 (div V = 0 for Killing V). u is isoparametric
    iff both are functions of u alone.
    """
    Q.require_admissible()
    x = as_sphere_point(x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    _, grad, H = fd_derivatives(_as_func(u), X, order=order)
    grad = tangent_projection(X, grad)
    A, B, gnorm = system_lhs_from_derivatives(Q.entries, X, grad, H)
    if np.any(gnorm < DEGENERATE_GRAD):
        raise DegeneratePoint(f"|du|_h = {gnorm.min():.3e} below {DEGENERATE_GRAD:g}")
    if single:
        return float(A[0]), float(B[0])
    return A, B
