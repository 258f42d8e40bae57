"""Isoparametric functions on (S^n, F_Q) built from a round-sphere
isoparametric polynomial phi through the map

    psi(x) = exp(zeta(phi(x)/|x|^g) Q) x,    zeta(t) = arcsin(t) / g,

and f = phi o psi^{-1}. The inverse is a scalar root-find in the rotation
angle (see ``kernels``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.integrate

from .cartan_munzner import CMPolynomial, project_to_level
from .kernels import NO_SIGN_CHANGE, RATIO_CLAMP, RATIO_OUT_OF_RANGE, psi_inverse_angles
from .metric import DEGENERATE_GRAD, fd_derivatives, system_lhs_from_derivatives
from .skew import SkewGenerator, as_sphere_point, tangent_projection

ROUND_TRIP_TOL = 1e-10


class PsiInversionError(RuntimeError):
    """The angle equation had no sign change or failed to polish."""


class QuadratureError(ArithmeticError):
    pass


def _clamp_ratio(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + RATIO_CLAMP):
        raise ValueError(f"ratio {np.max(np.abs(t)):.12g} outside [-1, 1] beyond the clamp band")
    clamped = np.abs(t) > 1.0
    return np.clip(t, -1.0, 1.0), clamped


class IsoFunction:
    """f = phi o psi^{-1} restricted to the sphere, for a CM polynomial phi
    of degree g and an admissible generator Q."""

    def __init__(self, phi: CMPolynomial, Q: SkewGenerator, *, use_numba: bool | None = None):
        if phi.dim != Q.dim:
            raise ValueError(f"polynomial lives in R^{phi.dim} but Q is {Q.dim}x{Q.dim}")
        Q.require_admissible()
        self.phi = phi
        self.Q = Q
        self.g = phi.degree
        self.use_numba = use_numba
        self._exps, self._coeffs = phi.terms()

    def __repr__(self):
        return f"IsoFunction({self.phi!r}, {self.Q!r})"

    @property
    def dim(self) -> int:
        return self.Q.dim

    # -- zeta -----------------------------------------------------------------

    def zeta(self, t, with_flag: bool = False):
        """(1/g) arcsin t; ratios in (1, 1 + 1e-9] are clamped to +-1."""
        tc, clamped = _clamp_ratio(t)
        out = np.arcsin(tc) / self.g
        out = float(out) if np.ndim(out) == 0 else out
        return (out, clamped) if with_flag else out

    def zeta_inv(self, theta):
        out = np.sin(self.g * np.asarray(theta, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    # -- psi ------------------------------------------------------------------

    def rotation_angle(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ratio = self.phi.value(X) / np.linalg.norm(X, axis=-1) ** self.g
        return self.zeta(ratio)

    def psi_forward(self, X) -> np.ndarray:
        """psi(x) = exp(zeta(phi(x)/|x|^g) Q) x for any nonzero x (rows)."""
        X = np.asarray(X, dtype=float)
        return self.Q.rotate(X, self.rotation_angle(X))

    def psi_inverse_angle(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        single = Y.ndim == 1
        Y2 = np.atleast_2d(Y)
        sf = self.Q.standard
        t, status = psi_inverse_angles(Y2, sf.P, sf.rates, self._exps, self._coeffs, self.g,
                                       use_numba=self.use_numba)
        if np.any(status == NO_SIGN_CHANGE):
            raise PsiInversionError("no sign change in the angle bracket; inconsistent inputs")
        if np.any(status == RATIO_OUT_OF_RANGE):
            raise ValueError("phi/|x|^g left [-1, 1]; is phi a Cartan-Muenzner polynomial?")
        return t[0] if single else t

    def psi_inverse_angle_scan(self, y, n_scan: int = 100_000, iters: int = 80) -> float:
        """Oracle for one point: residual on a dense t-grid, then bisection of
        the bracketing cell. Plain numpy, independent of the kernels."""
        y = np.asarray(y, dtype=float)
        rg = np.linalg.norm(y) ** self.g
        half = math.pi / (2 * self.g) + 1e-6

        def resid(t):
            t = np.asarray(t, dtype=float)
            X = self.Q.rotate(np.broadcast_to(y, t.shape + y.shape), -t)
            ratio = np.clip(self.phi.value(X) / rg, -1.0, 1.0)
            return t - np.arcsin(ratio) / self.g

        T = np.linspace(-half, half, n_scan)
        R = resid(T)
        cells = np.nonzero((R[:-1] <= 0) & (R[1:] > 0))[0]
        if len(cells) != 1:
            raise PsiInversionError(f"scan found {len(cells)} sign changes")
        lo, hi = T[cells[0]], T[cells[0] + 1]
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if resid(np.array([mid]))[0] <= 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def psi_inverse(self, Y, check: bool = True) -> np.ndarray:
        """The unique xbar with psi(xbar) = y (rows of Y, any nonzero norm)."""
        Y = np.asarray(Y, dtype=float)
        t = self.psi_inverse_angle(Y)
        Xbar = self.Q.rotate(Y, -t)
        if check:
            err = np.linalg.norm(self.psi_forward(Xbar) - Y, axis=-1) / np.linalg.norm(Y, axis=-1)
            if np.any(err > ROUND_TRIP_TOL):
                raise PsiInversionError(f"psi(psi^-1(y)) misses y by {np.max(err):.3e}")
        return Xbar

    # -- f ----------------------------------------------------------------------

    def __call__(self, Y):
        return self.iso_eval(Y)

    def iso_eval(self, Y) -> np.ndarray:
        """f(y) = phi(psi^{-1}(y)) / |y|^g, the degree-0 extension of f."""
        Y = np.asarray(Y, dtype=float)
        Xbar = self.psi_inverse(Y, check=False)
        out = self.phi.value(Xbar) / np.linalg.norm(Y, axis=-1) ** self.g
        return float(out) if np.ndim(out) == 0 else out

    def homogeneous_extension(self, Y) -> np.ndarray:
        """The degree-g extension |y|^g f(y/|y|) = phi(psi^{-1}(y))."""
        Y = np.asarray(Y, dtype=float)
        out = self.phi.value(self.psi_inverse(Y, check=False))
        return float(out) if np.ndim(out) == 0 else out

    def riemannian_level_function(self, Y) -> np.ndarray:
        """phi/|y|^g itself (the round-sphere function, no psi)."""
        Y = np.asarray(Y, dtype=float)
        return self.phi.value(Y) / np.linalg.norm(Y, axis=-1) ** self.g


def zeta(F: IsoFunction, t):
    return F.zeta(t)


def zeta_inv(F: IsoFunction, theta):
    return F.zeta_inv(theta)


def psi_forward(F: IsoFunction, x):
    return F.psi_forward(x)


def psi_forward_blocks(F: IsoFunction, x) -> np.ndarray:
    """psi through the explicit block formula

        psi(x) = (sum_i I_i cos(a_i theta) + P_i sin(a_i theta) + I_0) x,

    valid when Q is already in standard block layout (Q[2i, 2i+1] = a_i and
    zero elsewhere). P_i is the +-1 pattern of block i.
    """
    Q = F.Q.entries
    d = F.dim
    rates = []
    for i in range(d // 2):
        a = Q[2 * i, 2 * i + 1]
        if a == 0.0:
            break
        rates.append(a)
    j = len(rates)
    if not np.array_equal(Q, SkewGenerator.from_rates(rates, d - 1).entries):
        raise ValueError("block formula needs Q in standard block-diagonal layout")
    x = np.asarray(x, dtype=float)
    theta = F.rotation_angle(x)
    I0 = np.zeros((d, d))
    I0[2 * j :, 2 * j :] = np.eye(d - 2 * j)
    out = np.einsum("ij,...j->...i", I0, x)
    for i, a in enumerate(rates):
        Ii = np.zeros((d, d))
        Ii[2 * i, 2 * i] = Ii[2 * i + 1, 2 * i + 1] = 1.0
        Pi = np.zeros((d, d))
        Pi[2 * i, 2 * i + 1] = 1.0
        Pi[2 * i + 1, 2 * i] = -1.0
        c = np.cos(a * theta)[..., None]
        s = np.sin(a * theta)[..., None]
        out = out + c * np.einsum("ij,...j->...i", Ii, x) + s * np.einsum("ij,...j->...i", Pi, x)
    return out


def psi_inverse(F: IsoFunction, y):
    return F.psi_inverse(as_sphere_point(y))


def iso_eval(F: IsoFunction, y):
    return F.iso_eval(as_sphere_point(y))


@dataclass
class GeneralZeta:
    """zeta(t) = int_{t0}^{t} d theta / a(theta) for a profile a > 0 on (c, d)
    that may vanish like a square root at the endpoints.

    The substitution theta = m + h sin(u) (m, h the interval midpoint and
    half-width) cancels square-root endpoint zeros before quadrature.
    """

    profile: Callable[[float], float]
    c: float = -1.0
    d: float = 1.0
    t0: float = 0.0
    epsabs: float = 1e-13
    epsrel: float = 1e-13

    def __post_init__(self):
        if not self.c < self.t0 < self.d:
            raise ValueError("anchor t0 must lie inside (c, d)")
        self._eval = lru_cache(maxsize=4096)(self._integrate)

    def _u(self, t: float) -> float:
        m, h = 0.5 * (self.c + self.d), 0.5 * (self.d - self.c)
        return math.asin(min(1.0, max(-1.0, (t - m) / h)))

    def _integrate(self, t: float) -> float:
        m, h = 0.5 * (self.c + self.d), 0.5 * (self.d - self.c)

        def integrand(u):
            return h * math.cos(u) / self.profile(m + h * math.sin(u))

        u0, u1 = self._u(self.t0), self._u(t)
        if u0 == u1:
            return 0.0
        res = scipy.integrate.quad(integrand, u0, u1, epsabs=self.epsabs, epsrel=self.epsrel,
                                   limit=200, full_output=1)
        val = res[0]
        # quad appends a message only when it did not converge
        if len(res) > 3 or not math.isfinite(val):
            msg = res[3] if len(res) > 3 else "non-finite value"
            raise QuadratureError(f"quadrature failed on [{self.t0}, {t}]: {msg}")
        return val

    def __call__(self, t: float) -> float:
        t = float(t)
        if not self.c <= t <= self.d:
            raise ValueError(f"t={t} outside [{self.c}, {self.d}]")
        return self._eval(t)


def general_zeta(Gz: GeneralZeta, t: float) -> float:
    return Gz(t)


@dataclass
class LevelStats:
    level: float
    count: int
    max_A_dev: float
    B_mean: float
    B_spread: float


@dataclass
class IsoReport:
    samples: int
    seed: int
    levels: list[LevelStats]
    maxA_dev: float
    maxB_spread: float
    excluded_near_focal: int
    control: bool = False
    A_tol: float = 2e-4
    B_tol: float = 5e-4
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.maxA_dev < self.A_tol and self.maxB_spread < self.B_tol

    def to_dict(self) -> dict:
        return {
            "levels": [ls.__dict__ for ls in self.levels],
            "maxA_dev": self.maxA_dev,
            "maxB_spread": self.maxB_spread,
            "excluded_near_focal": self.excluded_near_focal,
            "samples": self.samples,
            "seed": self.seed,
            "control": self.control,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def iso_verify(F: IsoFunction, samples: int = 500, seed: int = 0, levels=None, *,
               control: bool = False, order: int = 2, A_tol: float = 2e-4,
               B_tol: float = 5e-4) -> IsoReport:
    """Check the Randers isoparametric system for f at sampled level sets.

    Points are drawn on round level sets of phi, pushed forward by psi (so
    they lie exactly on level sets of f), and at each one A = F_Q(grad f) is
    compared with g sqrt(1 - f^2) while B must not vary within a level.

    ``control=True`` replaces psi^{-1} by the identity (u = phi/|x|^g); with
    Q != 0 that function is not isoparametric and the check must fail.
    """
    if levels is None:
        levels = np.linspace(-0.8, 0.8, 10)
    levels = np.asarray(levels, dtype=float)
    rng = np.random.default_rng(seed)
    per = int(math.ceil(samples / len(levels)))
    g = F.g
    u = F.riemannian_level_function if control else F.iso_eval

    stats = []
    excluded = 0
    total = 0
    maxA = 0.0
    maxB = 0.0
    for t in levels:
        Xbar, ok = project_to_level(F.phi, rng.standard_normal((3 * per + 10, F.dim)), t)
        Xbar = Xbar[ok][:per]
        if len(Xbar) < per:
            raise RuntimeError(f"could not sample {per} points on level {t}")
        X = Xbar if control else F.psi_forward(Xbar)
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        _, grad, H = fd_derivatives(u, X, order=order)
        grad = tangent_projection(X, grad)
        A, B, gnorm = system_lhs_from_derivatives(F.Q.entries, X, grad, H)
        keep = gnorm >= DEGENERATE_GRAD
        excluded += int((~keep).sum())
        A, B = A[keep], B[keep]
        total += int(keep.sum())
        dev = np.abs(A - g * math.sqrt(max(0.0, 1 - t * t)))
        spread = float(B.max() - B.min()) if len(B) else 0.0
        stats.append(LevelStats(level=float(t), count=int(keep.sum()), max_A_dev=float(dev.max()),
                                B_mean=float(B.mean()), B_spread=spread))
        maxA = max(maxA, float(dev.max()))
        maxB = max(maxB, spread)
    report = IsoReport(samples=total, seed=seed, levels=stats, maxA_dev=maxA, maxB_spread=maxB,
                       excluded_near_focal=excluded, control=control, A_tol=A_tol, B_tol=B_tol)
    if maxA >= A_tol:
        report.failures.append(f"A deviates from g*sqrt(1-f^2) by {maxA:.3e} >= {A_tol:g}")
    if maxB >= B_tol:
        report.failures.append(f"B varies within a level by {maxB:.3e} >= {B_tol:g}")
    return report


def homogeneous_system_lhs(F: IsoFunction, X, order: int = 2):
    """Left-hand sides of the degree-k homogeneous form of the Randers
    isoparametric system for phi_Q = |x|^k f(x/|x|) at unit points X:

        |grad phi - k phi x| + <grad phi, Qx>,
        (lap phi - k(k+n-1) phi) / |grad phi - k phi x|
            + <grad <grad phi, Qx>, grad phi - k phi x> / |grad phi - k phi x|^2.

    Both must be functions of phi alone. The wind enters as +Qx and the last
    inner product takes the tangential part of grad phi; with -Qx or the
    full ambient gradient neither expression is constant on level sets.
    """
    X = np.atleast_2d(as_sphere_point(X))
    k = F.g
    n = F.dim - 1
    Qm = F.Q.entries
    phi0, grad, H = fd_derivatives(F.homogeneous_extension, X, order=order)
    V = X @ Qm.T
    gh = grad - k * phi0[:, None] * X
    gh_norm = np.linalg.norm(gh, axis=1)
    lhs1 = gh_norm + np.einsum("mi,mi->m", grad, V)
    lap = np.trace(H, axis1=1, axis2=2)
    # grad <grad phi, Qx> = H Qx + Q^T grad phi
    grad_w = np.einsum("mij,mj->mi", H, V) + grad @ Qm
    lhs2 = (lap - k * (k + n - 1) * phi0) / gh_norm + np.einsum("mi,mi->m", grad_w, gh) / gh_norm**2
    return phi0, lhs1, lhs2
