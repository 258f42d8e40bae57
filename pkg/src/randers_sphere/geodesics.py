"""Unit-speed geodesics of (S^n, F_Q).

A geodesic with gamma(0) = x, gamma'(0) = X is the round great circle with
initial direction Xbar = X - Qx, carried along by the flow of V:

    gamma(s) = exp(sQ) ((cos s) x + (sin s) Xbar).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from .metric import randers_norm
from .skew import InadmissibleGenerator, SkewGenerator, as_sphere_point, as_tangent, tangent_projection


@dataclass(frozen=True, eq=False)
class GeodesicSpec:
    """Initial data (x, X) with F_Q(x, X) = 1."""

    Q: SkewGenerator
    x: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.Q.require_admissible()
        x = as_sphere_point(self.x)
        X = as_tangent(x, self.X)
        xbar = X - self.Q.apply(x)
        if abs(np.linalg.norm(xbar) - 1.0) > 1e-10:
            raise ValueError(f"F_Q(x, X) != 1 (|X - Qx| = {np.linalg.norm(xbar):.12g})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "X", X)

    @classmethod
    def from_direction(cls, Q: SkewGenerator, x, xbar) -> "GeodesicSpec":
        """Build from a round-unit tangent direction Xbar; X = Xbar + Qx."""
        x = as_sphere_point(x)
        xbar = tangent_projection(x, np.asarray(xbar, dtype=float))
        xbar = xbar / np.linalg.norm(xbar)
        return cls(Q, x, xbar + Q.apply(x))

    @property
    def xbar(self) -> np.ndarray:
        return self.X - self.Q.apply(self.x)

    @property
    def n(self) -> int:
        return self.Q.n


def _great_circle(G: GeodesicSpec, s):
    s = np.asarray(s, dtype=float)
    c, sn = np.cos(s)[..., None], np.sin(s)[..., None]
    return c * G.x + sn * G.xbar, -sn * G.x + c * G.xbar


def geodesic_eval(G: GeodesicSpec, s) -> np.ndarray:
    circle, _ = _great_circle(G, s)
    return G.Q.rotate(circle, s)


def geodesic_velocity(G: GeodesicSpec, s) -> np.ndarray:
    circle, dcircle = _great_circle(G, s)
    return G.Q.rotate(G.Q.apply(circle) + dcircle, s)


def s2_geodesic(a: float, b: float, c: float, s) -> np.ndarray:
    """The explicit three-component curve for Q = [[0,a,b],[-a,0,c],[-b,-c,0]],
    x = e1, Xbar = e2.

    It coincides with ``geodesic_eval`` when at most one of a, b, c is
    nonzero; for other parameters the factorized form is not exp(sQ).
    """
    if not SkewGenerator.from_abc(a, b, c).admissible:
        raise InadmissibleGenerator(f"(a, b, c) = ({a}, {b}, {c}) violates a^2 + b^2 + c^2 < 1")
    s = np.asarray(s, dtype=float)
    w = (1.0 - a) * s
    cb, sb = np.cos(b * s), np.sin(b * s)
    cc, sc = np.cos(c * s), np.sin(c * s)
    cw, sw = np.cos(w), np.sin(w)
    return np.stack([
        cb * cw,
        cc * sw - sb * sc * cw,
        -sb * cc * cw - sw * sc,
    ], axis=-1)


def s2_spec(a: float, b: float, c: float) -> GeodesicSpec:
    """x = e1, Xbar = e2 on S^2 with the (a, b, c) generator."""
    return GeodesicSpec.from_direction(SkewGenerator.from_abc(a, b, c), [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


def phase_distance(G: GeodesicSpec, s) -> np.ndarray:
    """|gamma(s) - gamma(0)| + |gamma'(s) - gamma'(0)|."""
    s = np.asarray(s, dtype=float)
    return (np.linalg.norm(geodesic_eval(G, s) - G.x, axis=-1)
            + np.linalg.norm(geodesic_velocity(G, s) - G.X, axis=-1))


# -- closedness -----------------------------------------------------------------


@dataclass
class RationalFit:
    value: float
    p: int
    q: int
    defect: float
    """|q x - p|: the fraction of a turn left over after q turns."""

    def to_dict(self) -> dict:
        return {"value": self.value, "p": self.p, "q": self.q, "defect": self.defect}


def convergents(x: float, max_denominator: int):
    """Continued-fraction convergents p/q of x (exact binary value), q <= max_denominator."""
    sign = -1 if x < 0 else 1
    exact = Fraction(abs(x))
    rest = exact
    p0, p1, q0, q1 = 0, 1, 1, 0
    while True:
        a = rest.numerator // rest.denominator
        p0, p1 = p1, a * p1 + p0
        q0, q1 = q1, a * q1 + q0
        if q1 > max_denominator:
            return
        yield sign * p1, q1, float(abs(q1 * exact - p1))
        frac = rest - a
        if frac == 0:
            return
        rest = 1 / frac


def rational_fit(x: float, tolerance: float, max_denominator: int) -> tuple[RationalFit, bool]:
    """First convergent whose turn defect |q x - p| is within ``tolerance``.

    Returns (fit, found); when nothing qualifies, the best convergent seen.
    """
    best = None
    for p, q, defect in convergents(x, max_denominator):
        fit = RationalFit(value=x, p=p, q=q, defect=defect)
        if defect <= tolerance:
            return fit, True
        if best is None or defect < best.defect:
            best = fit
    return best, False


@dataclass
class ClosednessReport:
    verdict: str  # "closed" | "non-closed" | "undecided"
    period: float | None
    approximants: dict[str, RationalFit] = field(default_factory=dict)
    rule: str = "explicit"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "period": self.period,
            "rule": self.rule,
            "approximants": {k: v.to_dict() for k, v in self.approximants.items()},
        }


def classify_closedness(a: float, b: float, c: float, tolerance: float = 1e-9,
                        max_denominator: int = 10**6) -> ClosednessReport:
    """Closedness of the geodesic through e1 with Xbar = e2 for Q(a, b, c).

    With at most one nonzero parameter the curve has angular frequencies
    (1-a), b, c and closes iff b/(1-a) and c/(1-a) are rational; the period
    is 2 pi lcm(q1, q2) / (1-a). In general exp(sQ) rotates about the axis
    (c, -b, a) at rate w = sqrt(a^2+b^2+c^2); when that axis is not normal
    to the initial great circle (b, c not both zero) the frequencies 1 and
    w must be commensurate, and the period is 2 pi q for w = p/q.

    A quantity counts as rational when a convergent with q <= max_denominator
    leaves a turn defect |q x - p| <= tolerance; defects in
    (tolerance, 10 tolerance] give "undecided".
    """
    if a == 1.0:
        raise ValueError("a = 1 gives a degenerate frequency 1 - a = 0")
    Q = SkewGenerator.from_abc(a, b, c)
    Q.require_admissible()
    nonzero = sum(v != 0.0 for v in (a, b, c))
    if nonzero <= 1:
        rule = "explicit"
        quantities = {"b/(1-a)": b / (1.0 - a), "c/(1-a)": c / (1.0 - a)}
        base = 2.0 * math.pi / (1.0 - a)
    else:
        rule = "rotation-rate"
        quantities = {"rate": math.sqrt(a * a + b * b + c * c)}
        base = 2.0 * math.pi
    fits = {}
    found_all = True
    undecided = False
    for name, value in quantities.items():
        fit, found = rational_fit(value, tolerance, max_denominator)
        fits[name] = fit
        if not found:
            found_all = False
            if fit is not None and fit.defect <= 10 * tolerance:
                undecided = True
    if found_all:
        L = 1
        for fit in fits.values():
            L = math.lcm(L, fit.q)
        return ClosednessReport("closed", base * L, fits, rule)
    return ClosednessReport("undecided" if undecided else "non-closed", None, fits, rule)


# -- Euler-Lagrange oracle ------------------------------------------------------


def el_residual(Q: SkewGenerator, curve, ds: float, h: float = 1e-5) -> float:
    """Max tangential Euler-Lagrange residual of a sampled curve for F_Q^2.

    R = d/ds (dL/dy) - dL/dx with L = F^2 extended to ambient (x, y) using
    V = Qx; velocities and the s-derivative are central differences of the
    samples, the partials of L central differences with step ``h``. The
    normal component (the sphere-constraint multiplier) is projected out.
    """
    C = np.asarray(curve, dtype=float)
    if C.ndim != 2 or len(C) < 5:
        raise ValueError("need at least 5 curve samples")
    off = np.abs(np.linalg.norm(C, axis=1) - 1.0).max()
    if off > 1e-8:
        raise ValueError(f"curve leaves the sphere by {off:.3e}")
    if ds > 1e-3:
        raise ValueError("sample spacing must be at most 1e-3")
    Qm = Q.entries
    d = C.shape[1]
    X = C[1:-1]
    Y = (C[2:] - C[:-2]) / (2 * ds)
    I = np.eye(d)

    def L(x, y):
        return randers_norm(Qm, x, y) ** 2

    dLdy = np.empty_like(X)
    dLdx = np.empty_like(X)
    for j in range(d):
        e = h * I[j]
        dLdy[:, j] = (L(X, Y + e) - L(X, Y - e)) / (2 * h)
        dLdx[:, j] = (L(X + e, Y) - L(X - e, Y)) / (2 * h)
    R = (dLdy[2:] - dLdy[:-2]) / (2 * ds) - dLdx[1:-1]
    Rt = tangent_projection(X[1:-1], R)
    return float(np.linalg.norm(Rt, axis=1).max())


# -- self-intersections on S^2 --------------------------------------------------


@dataclass
class SelfIntersection:
    s1: float
    s2: float
    point: np.ndarray
    gap: float
    tangent: bool
    opposite: bool


def self_intersections(G: GeodesicSpec, s_max: float, samples: int = 20000,
                       min_separation: float = 0.5, tol: float = 1e-12) -> list[SelfIntersection]:
    """Parameter pairs s1 < s2 in [0, s_max) with gamma(s1) = gamma(s2) (S^2 only).

    Candidates come from a k-d tree over dense samples. Each is refined by
    solving for a transversal crossing; where the branches are tangent that
    system is singular, so the tangency conditions (foot point on branch 2,
    branch-1 tangent parallel to branch 2) are solved instead.
    """
    if G.n != 2:
        raise ValueError("self-intersection search is implemented for S^2")
    s = np.linspace(0.0, s_max, samples, endpoint=False)
    P = geodesic_eval(G, s)
    ds = s[1] - s[0]
    speed = np.linalg.norm(geodesic_velocity(G, s), axis=1).max()
    radius = 2.0 * ds * speed
    pairs = np.array(sorted(cKDTree(P).query_pairs(radius)))
    if len(pairs) == 0:
        return []
    pairs = pairs[np.abs(s[pairs[:, 1]] - s[pairs[:, 0]]) > min_separation]
    # drop pairs that are the same point seen from both ends of a closed loop
    pairs = pairs[np.abs(s[pairs[:, 1]] - s[pairs[:, 0]]) < s_max - min_separation]
    if len(pairs) == 0:
        return []
    dist = np.linalg.norm(P[pairs[:, 0]] - P[pairs[:, 1]], axis=1)
    order = np.argsort(dist)
    seeds = []
    window = max(3, int(min_separation / ds))
    for k in order:
        i, j = pairs[k]
        if all(abs(i - a) > window or abs(j - b) > window for a, b in seeds):
            seeds.append((i, j))

    def unit(v):
        return v / np.linalg.norm(v)

    def crossing(z):
        g1, g2 = geodesic_eval(G, z[0]), geodesic_eval(G, z[1])
        t2 = unit(geodesic_velocity(G, z[1]))
        n2 = np.cross(g2, t2)
        return [np.dot(g1 - g2, t2), np.dot(g1 - g2, n2)]

    def tangency(z):
        g1, g2 = geodesic_eval(G, z[0]), geodesic_eval(G, z[1])
        t1 = unit(geodesic_velocity(G, z[0]))
        t2 = unit(geodesic_velocity(G, z[1]))
        n2 = np.cross(g2, t2)
        return [np.dot(g1 - g2, t2), np.dot(t1, n2)]

    found: list[SelfIntersection] = []
    for i, j in seeds:
        z0 = np.array([s[i], s[j]])
        best = None
        for system in (crossing, tangency):
            sol = optimize.root(system, z0, method="hybr", tol=1e-15)
            z = sol.x
            gap = float(np.linalg.norm(geodesic_eval(G, z[0]) - geodesic_eval(G, z[1])))
            if best is None or gap < best[1]:
                best = (z, gap)
            if gap < tol:
                break
        z, gap = best
        if gap >= tol:
            continue
        s1, s2 = sorted(float(v) for v in z)
        if not (0.0 <= s1 < s_max and 0.0 <= s2 < s_max) or s2 - s1 < min_separation:
            continue
        if any(abs(s1 - f.s1) < 1e-6 and abs(s2 - f.s2) < 1e-6 for f in found):
            continue
        v1, v2 = unit(geodesic_velocity(G, s1)), unit(geodesic_velocity(G, s2))
        cosang = float(np.dot(v1, v2))
        tangent = abs(abs(cosang) - 1.0) < 1e-8
        found.append(SelfIntersection(s1, s2, geodesic_eval(G, s1), gap, tangent, tangent and cosang < 0))
    found.sort(key=lambda f: (f.s1, f.s2))
    return found
