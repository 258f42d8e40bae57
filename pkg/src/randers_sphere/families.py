"""Level-set samples, the normal tube map and the isoparametric family
{M_t} it sweeps out, with focal submanifolds and focal-rank tests.

For the zero level M of phi/|x|^g with Finsler unit normal n = nbar + Qx,

    tau_s(x) = exp(sQ) ((cos s) x + (sin s) (n - Qx)),

and the family member f^{-1}(t) is tau_s(M) with s = arcsin(t)/g.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cartan_munzner import CMPolynomial, project_to_level
from .isoparametric import IsoFunction
from .metric import DEGENERATE_GRAD, randers_norm
from .skew import SkewGenerator

FD_STEP = 1e-5
FOCAL_SV_TOL = 1e-4
REGULAR_SV_TOL = 1e-3
LEVEL_TOL = 1e-10
MIN_ACCEPTANCE = 0.01


class SamplingError(RuntimeError):
    pass


def riemannian_normal(phi: CMPolynomial, X) -> np.ndarray:
    """Round unit normal grad_h fbar / |grad_h fbar| at unit X (toward increasing fbar)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    G = phi.sphere_grad(X)
    norm = np.linalg.norm(G, axis=1, keepdims=True)
    if np.any(norm < DEGENERATE_GRAD):
        raise ValueError("normal undefined: round gradient of the level function vanishes")
    return G / norm


def finsler_normal(phi: CMPolynomial, Q: SkewGenerator, X) -> np.ndarray:
    """n = nbar + Qx, the F_Q unit normal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return riemannian_normal(phi, X) + Q.apply(X)


@dataclass
class LevelSample:
    phi: CMPolynomial
    Q: SkewGenerator
    level: float
    seed: int
    points: np.ndarray
    normals: np.ndarray
    drawn: int = 0

    @property
    def acceptance(self) -> float:
        return len(self.points) / self.drawn if self.drawn else 1.0

    def level_error(self) -> float:
        return float(np.abs(self.phi.value(self.points) - self.level).max())

    def normal_errors(self) -> dict:
        """Navigation identities: F_Q(x, n) = 1, |n - Qx| = 1, n - Qx normal to M."""
        nbar = self.normals - self.Q.apply(self.points)
        F = randers_norm(self.Q.entries, self.points, self.normals)
        worst_tangent = 0.0
        for x, nb in zip(self.points, nbar):
            B = level_tangent_basis(self.phi, x)
            worst_tangent = max(worst_tangent, float(np.abs(B @ nb).max(initial=0.0)))
        return {
            "finsler_unit": float(np.abs(F - 1.0).max()),
            "round_unit": float(np.abs(np.linalg.norm(nbar, axis=1) - 1.0).max()),
            "tangential": worst_tangent,
        }


def sample_level(phi: CMPolynomial, t0: float, count: int, seed: int = 0,
                 Q: SkewGenerator | None = None, batch: int | None = None) -> LevelSample:
    """``count`` points of {phi/|x|^g = t0} on the unit sphere, with normals for Q.

    Random sphere points are Newton-projected along the round gradient; draws
    that fail to converge in 50 steps, or land where the gradient degenerates,
    are discarded. Q defaults to zero (Riemannian normals).
    """
    if not abs(t0) < 1.0:
        raise ValueError("level t0 must satisfy |t0| < 1")
    if count < 1:
        raise ValueError("count must be positive")
    Q = SkewGenerator.zero(phi.n) if Q is None else Q
    if Q.dim != phi.dim:
        raise ValueError(f"generator dimension {Q.dim} does not match polynomial dimension {phi.dim}")
    Q.require_admissible()
    rng = np.random.default_rng(seed)
    batch = batch or max(2 * count, 16)
    kept: list[np.ndarray] = []
    have = 0
    drawn = 0
    while have < count:
        X = rng.standard_normal((batch, phi.dim))
        X, ok = project_to_level(phi, X, t0)
        drawn += batch
        ok &= np.linalg.norm(phi.sphere_grad(X), axis=1) >= DEGENERATE_GRAD
        kept.append(X[ok])
        have += int(ok.sum())
        if have / drawn < MIN_ACCEPTANCE and drawn >= 100 * count:
            raise SamplingError(f"acceptance {have / drawn:.3%} below 1% at level {t0}")
        if drawn > 1000 * count and have < count:
            raise SamplingError(f"could not collect {count} points at level {t0}")
    P = np.concatenate(kept)[:count]
    return LevelSample(phi, Q, float(t0), seed, P, finsler_normal(phi, Q, P), drawn)


def tube_map(Q: SkewGenerator, x, n, s) -> np.ndarray:
    """tau_s(x) = exp(sQ)((cos s) x + (sin s)(n - Qx)); rows of x, n; scalar or per-row s."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    c, sn = np.cos(s), np.sin(s)
    if s.ndim:
        c, sn = c[..., None], sn[..., None]
    base = c * x + sn * (n - Q.apply(x))
    return Q.rotate(base, s)


@dataclass
class FamilySnapshot:
    t: float | str
    points: np.ndarray
    s: float

    def to_csv(self) -> str:
        return snapshots_to_csv([self])


def _require_zero_level(F: IsoFunction, L: LevelSample):
    if L.level != 0.0:
        raise ValueError("family construction starts from the zero level set")
    if L.phi is not F.phi or L.Q is not F.Q:
        if L.Q.dim != F.Q.dim or not np.array_equal(L.Q.entries, F.Q.entries):
            raise ValueError("level sample normals were built for a different generator")


def family_snapshot(F: IsoFunction, L: LevelSample, t: float) -> FamilySnapshot:
    """M_t = tau_s(M) with s = arcsin(t)/g."""
    if not abs(t) < 1.0:
        raise ValueError("family parameter must satisfy |t| < 1; use focal_submanifolds for t = +-1")
    _require_zero_level(F, L)
    s = float(F.zeta(t))
    return FamilySnapshot(float(t), tube_map(F.Q, L.points, L.normals, s), s)


def focal_submanifolds(F: IsoFunction, L: LevelSample) -> tuple[FamilySnapshot, FamilySnapshot]:
    """(M_+, M_-) = tau_{+-pi/(2g)}(M)."""
    _require_zero_level(F, L)
    s = math.pi / (2 * F.phi.degree)
    plus = FamilySnapshot("+", tube_map(F.Q, L.points, L.normals, s), s)
    minus = FamilySnapshot("-", tube_map(F.Q, L.points, L.normals, -s), -s)
    return plus, minus


def unique_points(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Rows of P with near-duplicates (within tol) removed, in first-seen order."""
    out: list[np.ndarray] = []
    for p in np.asarray(P, dtype=float):
        if all(np.linalg.norm(p - q) > tol for q in out):
            out.append(p)
    return np.array(out)


def focal_gradient_proxy(F: IsoFunction, P, h: float = FD_STEP) -> np.ndarray:
    """|grad_h f| at P by central differences of iso_eval (vanishes on focal sets)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    m, d = P.shape
    out = np.zeros((m, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[:, j] = (F.iso_eval(P + e) - F.iso_eval(P - e)) / (2 * h)
    out -= np.einsum("mi,mi->m", out, P)[:, None] * P
    return np.linalg.norm(out, axis=1)


def level_tangent_basis(phi: CMPolynomial, x) -> np.ndarray:
    """Orthonormal basis (rows) of T_x M: orthogonal to x and to grad_h fbar."""
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    nbar = riemannian_normal(phi, x)[0]
    N = np.stack([x, nbar])
    # the last d-2 right singular vectors of N span its orthogonal complement
    _, _, Vt = np.linalg.svd(N)
    return Vt[2:]


def tube_jacobian(phi: CMPolynomial, Q: SkewGenerator, x, s: float, basis=None,
                  h: float = FD_STEP) -> np.ndarray:
    """Central-difference d tau_s along an orthonormal tangent basis of M at x.

    The normal is recomputed at each displaced point, so this is the
    differential of x -> tau_s(x, n(x)). Returns the (d, k) matrix of images.
    """
    x = np.asarray(x, dtype=float)
    B = level_tangent_basis(phi, x) if basis is None else np.asarray(basis, dtype=float)
    Xp = x + h * B
    Xm = x - h * B
    Xp /= np.linalg.norm(Xp, axis=1, keepdims=True)
    Xm /= np.linalg.norm(Xm, axis=1, keepdims=True)
    Tp = tube_map(Q, Xp, finsler_normal(phi, Q, Xp), s)
    Tm = tube_map(Q, Xm, finsler_normal(phi, Q, Xm), s)
    return ((Tp - Tm) / (2 * h)).T


def focal_rank_test(F: IsoFunction, x, n=None, basis=None, s: float | None = None,
                    h: float = FD_STEP) -> np.ndarray:
    """Singular values of d tau_s restricted to the tangent space of M at x.

    ``n`` is accepted for symmetry with ``tube_map``; the normal field is
    rebuilt from phi so the differential includes its variation. s defaults
    to the focal distance pi/(2g).
    """
    x = np.asarray(x, dtype=float)
    if n is not None:
        n_expected = finsler_normal(F.phi, F.Q, x)[0]
        if np.linalg.norm(np.asarray(n, dtype=float) - n_expected) > 1e-8:
            raise ValueError("supplied normal does not match the level-set normal at x")
    s = math.pi / (2 * F.phi.degree) if s is None else float(s)
    J = tube_jacobian(F.phi, F.Q, x, s, basis, h)
    return np.linalg.svd(J, compute_uv=False)


@dataclass
class RankReport:
    s: float
    singular_values: np.ndarray
    collapsed: int
    expected: int | None
    status: str  # "match" | "mismatch" | "ambiguous" | "undeclared"

    def to_dict(self) -> dict:
        return {"s": self.s, "singular_values": self.singular_values.tolist(),
                "collapsed": self.collapsed, "expected": self.expected, "status": self.status}


def classify_rank(sv: np.ndarray, s: float, expected: int | None = None,
                  focal_tol: float = FOCAL_SV_TOL, regular_tol: float = REGULAR_SV_TOL) -> RankReport:
    """Count collapsed directions; values between the two thresholds are ambiguous."""
    collapsed = int((sv < focal_tol).sum())
    if np.any((sv >= focal_tol) & (sv <= regular_tol)):
        status = "ambiguous"
    elif expected is None:
        status = "undeclared"
    else:
        status = "match" if collapsed == expected else "mismatch"
    return RankReport(float(s), sv, collapsed, expected, status)


def principal_curvatures_riemannian(phi: CMPolynomial, x, h: float = FD_STEP) -> np.ndarray:
    """Eigenvalues of the round shape operator of M at x, S = -d nbar, by central differences."""
    B = level_tangent_basis(phi, x)
    x = np.asarray(x, dtype=float)
    Xp = x + h * B
    Xm = x - h * B
    Xp /= np.linalg.norm(Xp, axis=1, keepdims=True)
    Xm /= np.linalg.norm(Xm, axis=1, keepdims=True)
    dn = (riemannian_normal(phi, Xp) - riemannian_normal(phi, Xm)) / (2 * h)
    S = -(B @ dn.T)
    S = 0.5 * (S + S.T)
    return np.sort(np.linalg.eigvalsh(S))[::-1]


def focal_distances(F: IsoFunction, x, grid: int = 720, tol: float = FOCAL_SV_TOL):
    """Parameters s in (0, pi) where d tau_s loses rank at x, with collapse counts.

    The smallest singular value is scanned on a grid and each dip is refined
    by a bounded scalar minimization.
    """
    from scipy.optimize import minimize_scalar

    B = level_tangent_basis(F.phi, x)

    def smin(s):
        return float(np.linalg.svd(tube_jacobian(F.phi, F.Q, x, s, B), compute_uv=False).min())

    S = np.linspace(0.0, math.pi, grid + 1)[1:-1]
    vals = np.array([smin(s) for s in S])
    found = []
    for i in range(1, len(S) - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            res = minimize_scalar(smin, bounds=(S[i - 1], S[i + 1]), method="bounded",
                                  options={"xatol": 1e-12})
            if res.fun < tol:
                sv = np.linalg.svd(tube_jacobian(F.phi, F.Q, x, res.x, B), compute_uv=False)
                found.append((float(res.x), int((sv < tol).sum())))
    return found


def principal_curvatures_from_focal(F: IsoFunction, x, grid: int = 720) -> np.ndarray:
    """lambda_i = cot s_i over the focal distances s_i, repeated by multiplicity."""
    lam = []
    for s, mult in focal_distances(F, x, grid):
        lam.extend([1.0 / math.tan(s)] * max(mult, 1))
    return np.sort(np.array(lam))[::-1]


# -- writers ----------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "%.17g" % v


def snapshots_to_csv(snaps) -> str:
    snaps = list(snaps)
    d = snaps[0].points.shape[1]
    buf = io.StringIO()
    buf.write(",".join(["t"] + [f"x{i + 1}" for i in range(d)]) + "\n")
    for snap in snaps:
        tag = snap.t if isinstance(snap.t, str) else _fmt(snap.t)
        for p in snap.points:
            buf.write(",".join([tag] + [_fmt(v) for v in p]) + "\n")
    return buf.getvalue()


def snapshots_to_ply(snaps) -> str:
    """ASCII PLY; x, y, z then x4.. for higher dimensions, plus the family parameter."""
    snaps = list(snaps)
    d = snaps[0].points.shape[1]
    names = ["x", "y", "z"][: min(d, 3)] + [f"x{i + 1}" for i in range(3, d)]
    total = sum(len(s.points) for s in snaps)
    lines = ["ply", "format ascii 1.0"]
    for snap in snaps:
        lines.append(f"comment t={snap.t if isinstance(snap.t, str) else _fmt(snap.t)} count={len(snap.points)}")
    lines.append(f"element vertex {total}")
    lines += [f"property double {nm}" for nm in names]
    lines.append("property double t")
    lines.append("end_header")
    for snap in snaps:
        tv = {"+": 1.0, "-": -1.0}.get(snap.t, snap.t) if isinstance(snap.t, str) else snap.t
        for p in snap.points:
            lines.append(" ".join(_fmt(v) for v in (*p, tv)))
    return "\n".join(lines) + "\n"


def write_snapshots(path, snaps, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("ply" if path.suffix.lower() == ".ply" else "csv")
    text = snapshots_to_ply(snaps) if fmt == "ply" else snapshots_to_csv(snaps)
    path.write_text(text)
    return path
