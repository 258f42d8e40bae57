import itertools
import json

import numpy as np
import pytest

from randers_sphere.cartan_munzner import (
    CliffordQuadric, GenericPolynomial, LinearCM, cm_check, grad_E, laplacian_E, project_to_level,
)
from randers_sphere.metric import fd_derivatives
from conftest import random_sphere


@pytest.mark.parametrize("n", range(2, 9))
def test_linear_family(n, rng):
    p = rng.standard_normal(n + 1)
    rep = cm_check(LinearCM(p / np.linalg.norm(p)))
    assert rep.passed(1e-10)
    assert abs(rep.c_fit) < 1e-12
    assert rep.orientation == "consistent"


@pytest.mark.parametrize("n", range(2, 9))
def test_clifford_family(n):
    for p in range(0, n):
        q = n - 1 - p
        rep = cm_check(CliffordQuadric(p, q))
        assert rep.passed(1e-10)
        assert abs(rep.c_fit - 2 * (p - q)) < 1e-10
        # the predicted 2(q - p) with labels (p, q) differs by the label swap
        if p != q:
            assert rep.orientation == "reversed"


def test_generic_matches_named_family(rng):
    for phi in (CliffordQuadric(2, 1), LinearCM([0.6, 0, 0.8])):
        gen = phi.to_generic()
        X = rng.standard_normal((10, phi.dim))
        assert np.allclose(gen.value(X), phi.value(X))
        assert np.allclose(gen.grad(X), phi.grad(X))
        assert np.allclose(gen.laplacian(X), phi.laplacian(X))


def test_generic_exact_derivatives_against_fd(rng):
    table = np.array([e for e in itertools.product(range(5), repeat=4) if sum(e) == 4])
    exps = table[rng.choice(len(table), 8, replace=False)]
    phi = GenericPolynomial(4, exps, rng.standard_normal(len(exps)))
    X = rng.standard_normal((5, 4))
    _, g, H = fd_derivatives(phi.value, X, order=4)
    assert np.allclose(phi.grad(X), g, rtol=1e-7, atol=1e-7)
    assert np.allclose(phi.laplacian(X), np.trace(H, axis1=1, axis2=2), rtol=1e-6, atol=1e-6)
    assert np.allclose(grad_E(phi, X), phi.grad(X))
    assert isinstance(laplacian_E(phi, X[0]), float)


def test_non_cm_polynomial_fails_check():
    phi = GenericPolynomial(2, [[2, 0, 0], [0, 2, 0]], [1.0, 0.5])
    assert not cm_check(phi).passed()


def test_json_roundtrip(tmp_path):
    phi = CliffordQuadric(1, 2).to_generic()
    path = tmp_path / "poly.json"
    path.write_text(json.dumps(phi.to_json()))
    back = GenericPolynomial.from_json(path)
    assert np.array_equal(back.exps, phi.exps) and np.array_equal(back.coeffs, phi.coeffs)
    assert back.multiplicities == (1, 2)


def test_generic_validation():
    with pytest.raises(ValueError):
        GenericPolynomial(2, [[1, 0], [2, 1]], [1.0, 1.0])
    with pytest.raises(ValueError):
        GenericPolynomial.from_json({"g": 2, "terms": []})
    with pytest.raises(ValueError):
        LinearCM([1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        CliffordQuadric(-1, 2)


@pytest.mark.parametrize("t0", [-0.9, -0.3, 0.0, 0.5, 0.95])
def test_project_to_level(t0, rng):
    phi = CliffordQuadric(1, 2)
    X, ok = project_to_level(phi, rng.standard_normal((100, phi.dim)), t0)
    assert ok.mean() > 0.9
    assert np.abs(phi.value(X[ok]) - t0).max() < 1e-12
    assert np.abs(np.linalg.norm(X, axis=1) - 1).max() < 1e-14


def test_level_zero_of_quadric_splits_evenly(rng):
    phi = CliffordQuadric(1, 1)
    X, ok = project_to_level(phi, random_sphere(rng, 50, 4), 0.0)
    X = X[ok]
    assert np.allclose((X[:, :2] ** 2).sum(1), 0.5, atol=1e-12)
