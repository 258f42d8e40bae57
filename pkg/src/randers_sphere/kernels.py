"""Batched scalar root solves behind the inverse of psi.

For a point y the rotation angle t of psi^{-1}(y) = exp(-tQ) y solves

    h(t) = t - (1/g) arcsin( phi(exp(-tQ) y) / |y|^g ) = 0,

and h is strictly increasing (slope in [1 - max rate, 1 + max rate]). Work is
done in the standard frame of Q, z = P^T y, so the rotation is a product of
2x2 blocks.

Two implementations: a per-point Brent iteration compiled with numba, and a
vectorized bisection in pure numpy. ``psi_inverse_angles`` picks numba when
available unless ``RANDERS_SPHERE_NUMBA=0``.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

RATIO_CLAMP = 1e-9
BRACKET_PAD = 1e-6

# status codes
OK = 0
NO_SIGN_CHANGE = 1
RATIO_OUT_OF_RANGE = 2


@njit(cache=True)
def _poly_value_nb(x, exps, coeffs):
    total = 0.0
    for k in range(coeffs.shape[0]):
        term = coeffs[k]
        for j in range(x.shape[0]):
            e = exps[k, j]
            if e == 1:
                term *= x[j]
            elif e > 1:
                term *= x[j] ** e
        total += term
    return total


@njit(cache=True)
def _residual_nb(t, z, P, rates, exps, coeffs, g, rg, w, xbar):
    d = z.shape[0]
    for j in range(d):
        w[j] = z[j]
    for i in range(rates.shape[0]):
        c = math.cos(-t * rates[i])
        s = math.sin(-t * rates[i])
        z0 = z[2 * i]
        z1 = z[2 * i + 1]
        w[2 * i] = c * z0 + s * z1
        w[2 * i + 1] = -s * z0 + c * z1
    for a in range(d):
        acc = 0.0
        for b in range(d):
            acc += P[a, b] * w[b]
        xbar[a] = acc
    ratio = _poly_value_nb(xbar, exps, coeffs) / rg
    status = 0
    if ratio > 1.0:
        if ratio > 1.0 + RATIO_CLAMP:
            status = 2
        ratio = 1.0
    elif ratio < -1.0:
        if ratio < -1.0 - RATIO_CLAMP:
            status = 2
        ratio = -1.0
    return t - math.asin(ratio) / g, status


@njit(cache=True)
def _brent_nb(z, P, rates, exps, coeffs, g, rg, lo, hi, xtol, maxiter, w, xbar):
    eps = 2.220446049250313e-16
    a = lo
    b = hi
    fa, sa = _residual_nb(a, z, P, rates, exps, coeffs, g, rg, w, xbar)
    fb, sb = _residual_nb(b, z, P, rates, exps, coeffs, g, rg, w, xbar)
    status = max(sa, sb)
    if fa * fb > 0.0:
        return math.nan, 1
    c = b
    fc = fb
    d = b - a
    e = d
    for _ in range(maxiter):
        if (fb > 0.0 and fc > 0.0) or (fb < 0.0 and fc < 0.0):
            c = a
            fc = fa
            d = b - a
            e = d
        if abs(fc) < abs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol1 = 2.0 * eps * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b, status
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a = b
        fa = fb
        if abs(d) > tol1:
            b += d
        elif xm > 0.0:
            b += tol1
        else:
            b -= tol1
        fb, sb = _residual_nb(b, z, P, rates, exps, coeffs, g, rg, w, xbar)
        status = max(status, sb)
    return b, status


@njit(cache=True)
def _psi_inverse_angles_nb(Z, P, rates, exps, coeffs, g, rg, lo, hi, xtol, maxiter):
    m, d = Z.shape
    t = np.empty(m)
    status = np.zeros(m, dtype=np.int64)
    w = np.empty(d)
    xbar = np.empty(d)
    for k in range(m):
        t[k], status[k] = _brent_nb(Z[k], P, rates, exps, coeffs, g, rg[k], lo, hi,
                                    xtol, maxiter, w, xbar)
    return t, status


def _residual_np(t, Z, P, rates, exps, coeffs, g, rg):
    W = Z.copy()
    for i, a in enumerate(rates):
        c, s = np.cos(-t * a), np.sin(-t * a)
        z0, z1 = Z[:, 2 * i], Z[:, 2 * i + 1]
        W[:, 2 * i] = c * z0 + s * z1
        W[:, 2 * i + 1] = -s * z0 + c * z1
    Xbar = W @ P.T
    ratio = np.prod(Xbar[:, None, :] ** exps[None], axis=-1) @ coeffs / rg
    bad = np.abs(ratio) > 1.0 + RATIO_CLAMP
    ratio = np.clip(ratio, -1.0, 1.0)
    return t - np.arcsin(ratio) / g, bad


def _psi_inverse_angles_np(Z, P, rates, exps, coeffs, g, rg, lo, hi, xtol, maxiter):
    m = Z.shape[0]
    a = np.full(m, lo)
    b = np.full(m, hi)
    fa, bad_a = _residual_np(a, Z, P, rates, exps, coeffs, g, rg)
    fb, bad_b = _residual_np(b, Z, P, rates, exps, coeffs, g, rg)
    status = np.where(bad_a | bad_b, RATIO_OUT_OF_RANGE, OK)
    nosign = fa * fb > 0
    for _ in range(maxiter):
        mid = 0.5 * (a + b)
        fm, bad = _residual_np(mid, Z, P, rates, exps, coeffs, g, rg)
        status = np.where(bad, RATIO_OUT_OF_RANGE, status)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
        if np.all(b - a <= xtol + 4e-16 * np.abs(a)):
            break
    t = 0.5 * (a + b)
    t = np.where(nosign, np.nan, t)
    status = np.where(nosign, NO_SIGN_CHANGE, status)
    return t, status


def psi_inverse_angles(Y, P, rates, exps, coeffs, g: int, *, use_numba: bool | None = None,
                       xtol: float = 1e-15, maxiter: int = 200):
    """Rotation angles t with psi(exp(-tQ) y) = y for each row of Y.

    Returns (t, status); status 0 is success, 1 means no sign change in the
    bracket, 2 means phi/|y|^g left [-1, 1] by more than the clamp band.
    """
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    Y = np.ascontiguousarray(Y, dtype=float)
    P = np.ascontiguousarray(P, dtype=float)
    Z = np.ascontiguousarray(Y @ P)
    rates = np.ascontiguousarray(rates, dtype=float)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    rg = np.linalg.norm(Y, axis=1) ** g
    half = math.pi / (2 * g)
    lo, hi = -half - BRACKET_PAD, half + BRACKET_PAD
    if use_numba and _accel.HAVE_NUMBA:
        return _psi_inverse_angles_nb(Z, P, rates, exps, coeffs, float(g), rg, lo, hi, xtol, maxiter)
    return _psi_inverse_angles_np(Z, P, rates, exps, coeffs, float(g), rg, lo, hi, xtol, maxiter)
