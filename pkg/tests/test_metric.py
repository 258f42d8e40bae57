import math

import numpy as np
import pytest
from scipy.optimize import brentq

from randers_sphere.metric import (
    DegeneratePoint, ScalarField, dual_norm, fd_derivatives, fd_gradient, iso_system_lhs,
    metric_eval, randers_norm, sphere_gradient, sphere_laplacian,
)
from randers_sphere.skew import SkewGenerator, tangent_projection
from conftest import random_admissible, random_sphere


def navigation_norm(Qm, x, y):
    """Oracle: the F with |y/F - V| = 1, by scalar root finding."""
    V = Qm @ x
    return brentq(lambda F: np.linalg.norm(y / F - V) - 1.0, 1e-12, 1e6, xtol=1e-15, rtol=1e-15)


def test_norm_matches_navigation_definition(rng):
    for dim in range(3, 7):
        Q = random_admissible(rng, dim)
        X = random_sphere(rng, 20, dim)
        Y = tangent_projection(X, rng.standard_normal((20, dim)))
        F = metric_eval(Q, X, Y)
        ref = np.array([navigation_norm(Q.entries, x, y) for x, y in zip(X, Y)])
        assert np.abs(F - ref).max() < 1e-12 * max(1, ref.max())


def test_zero_wind_is_round(rng):
    Q = SkewGenerator.zero(3)
    X = random_sphere(rng, 5, 4)
    Y = tangent_projection(X, rng.standard_normal((5, 4)))
    assert np.allclose(metric_eval(Q, X, Y), np.linalg.norm(Y, axis=1), atol=1e-15)


def test_homogeneity_and_asymmetry(rng):
    Q = SkewGenerator.from_abc(0.2, 0.3, 0.4)
    x = np.array([0.0, 0.6, 0.8])
    y = tangent_projection(x, np.array([1.0, 0.3, -0.2]))
    F = metric_eval(Q, x, y)
    assert math.isclose(metric_eval(Q, x, 3.5 * y), 3.5 * F, rel_tol=1e-14)
    assert not math.isclose(metric_eval(Q, x, -y), F, rel_tol=1e-6)
    assert metric_eval(Q, x, 0 * y) == 0.0


def test_triangle_inequality(rng):
    Q = random_admissible(rng, 4)
    X = random_sphere(rng, 200, 4)
    Y1 = tangent_projection(X, rng.standard_normal((200, 4)))
    Y2 = tangent_projection(X, rng.standard_normal((200, 4)))
    lhs = metric_eval(Q, X, Y1 + Y2)
    rhs = metric_eval(Q, X, Y1) + metric_eval(Q, X, Y2)
    assert np.all(lhs <= rhs + 1e-12)


def test_stable_branch_for_large_positive_wind_component():
    Q = SkewGenerator.from_abc(0.0, 0.999999, 0.0)
    x = np.array([1.0, 0.0, 0.0])
    V = Q.entries @ x
    y = V / np.linalg.norm(V)
    assert math.isclose(metric_eval(Q, x, y), navigation_norm(Q.entries, x, y), rel_tol=1e-9)


def test_dual_norm_against_brute_force_supremum():
    # F*(xi) = max over F(y) = 1 of xi(y), sampled on a fine circle of directions
    Q = SkewGenerator.from_abc(0.3, -0.2, 0.5)
    rng = np.random.default_rng(3)
    x = random_sphere(rng, 1, 3)[0]
    B = np.linalg.svd(x[None])[2][1:]
    th = np.linspace(0, 2 * np.pi, 400001)
    dirs = np.cos(th)[:, None] * B[0] + np.sin(th)[:, None] * B[1]
    Y = dirs / randers_norm(Q.entries, np.broadcast_to(x, dirs.shape), dirs)[:, None]
    for _ in range(5):
        xi = tangent_projection(x, rng.standard_normal(3))
        assert abs((Y @ xi).max() - dual_norm(Q, x, xi)) < 1e-9


def test_fd_derivatives_on_quartic(rng):
    A = rng.standard_normal((4, 4))
    A = A + A.T

    def f(X):
        q = np.einsum("...i,ij,...j->...", X, A, X)
        return q * q

    X = rng.standard_normal((6, 4))
    q = np.einsum("mi,ij,mj->m", X, A, X)
    AX = X @ A
    grad = 4 * q[:, None] * AX
    H = 8 * np.einsum("mi,mj->mij", AX, AX) + 4 * q[:, None, None] * A
    for order, tol in ((2, 1e-5), (4, 1e-7)):
        f0, g, Hf = fd_derivatives(f, X, order=order)
        assert np.allclose(f0, q * q)
        assert np.abs(g - grad).max() < 1e-7 * np.abs(grad).max()
        assert np.abs(Hf - H).max() < tol * np.abs(H).max()
    assert np.abs(fd_gradient(f, X) - grad).max() < 1e-7 * np.abs(grad).max()


@pytest.mark.parametrize("n", [2, 3, 5])
def test_spherical_harmonic_eigenvalues(n, rng):
    # linear functions: -n; traceless quadratics: -2(n+1)
    p = rng.standard_normal(n + 1)
    X = random_sphere(rng, 8, n + 1)
    lin = ScalarField(lambda Y: Y @ p, degree=1)
    assert np.allclose(sphere_laplacian(lin, X, order=4), -n * X @ p, atol=1e-6)
    A = np.diag(np.r_[1.0, -1.0, np.zeros(n - 1)])
    quad = ScalarField(lambda Y: np.einsum("...i,ij,...j->...", Y, A, Y), degree=2)
    ref = -2 * (n + 1) * np.einsum("mi,ij,mj->m", X, A, X)
    assert np.allclose(sphere_laplacian(quad, X, order=4), ref, atol=1e-6)
    g = sphere_gradient(lin, X)
    assert np.allclose(g, p - (X @ p)[:, None] * X, atol=1e-9)


def test_laplacian_step_guard():
    with pytest.raises(ValueError):
        sphere_laplacian(ScalarField(lambda Y: Y[..., 0], 1), [1.0, 0, 0], h=1e-9)


def test_homogeneity_defect():
    assert ScalarField(lambda Y: Y[..., 0] ** 3, 3).homogeneity_defect(3) < 1e-12
    assert ScalarField(lambda Y: Y[..., 0] ** 3, 2).homogeneity_defect(3) > 0.1


def test_iso_system_riemannian_height_function():
    # Q = 0, u = x1: |grad u| = sqrt(1-u^2), lap u = -n u, so B = -n u / sqrt(1-u^2)
    Q = SkewGenerator.zero(2)
    u = ScalarField(lambda Y: Y[..., 0], 1)
    x = np.array([0.6, 0.0, 0.8])
    A, B = iso_system_lhs(Q, u, x)
    assert abs(A - 0.8) < 1e-9
    assert abs(B - (-2 * 0.6 / 0.8)) < 1e-6
    with pytest.raises(DegeneratePoint):
        iso_system_lhs(Q, u, np.array([1.0, 0.0, 0.0]))
