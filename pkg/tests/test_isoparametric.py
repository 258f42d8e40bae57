import math

import numpy as np
import pytest

from randers_sphere.cartan_munzner import CliffordQuadric, LinearCM, project_to_level
from randers_sphere.isoparametric import (
    GeneralZeta, IsoFunction, QuadratureError, general_zeta, homogeneous_system_lhs, iso_eval,
    iso_verify, psi_forward_blocks, psi_inverse, zeta,
)
from randers_sphere.presets import example_g1, example_g2
from randers_sphere.skew import SkewGenerator
from conftest import random_admissible, random_sphere


def test_zeta_values():
    F1 = IsoFunction(*example_g1())
    F2 = IsoFunction(*example_g2(4, 0.3))
    assert zeta(F1, 1.0) == math.pi / 2
    assert zeta(F2, 1.0) == math.pi / 4
    assert zeta(F2, 0.0) == 0.0
    assert zeta(F2, 1.0 + 5e-10) == math.pi / 4
    with pytest.raises(ValueError):
        zeta(F2, 1.0 + 1e-8)
    assert math.isclose(F2.zeta_inv(F2.zeta(0.37)), 0.37, rel_tol=1e-15)


@pytest.mark.parametrize("case", ["g1", "g2"])
def test_round_trip(case, rng):
    phi, _ = example_g1() if case == "g1" else example_g2(4, 0.3)
    Q = random_admissible(rng, phi.dim, max_rate=0.95)
    F = IsoFunction(phi, Q)
    X = random_sphere(rng, 1000, phi.dim)
    assert np.linalg.norm(F.psi_inverse(F.psi_forward(X)) - X, axis=1).max() < 1e-10
    assert np.linalg.norm(F.psi_forward(F.psi_inverse(X)) - X, axis=1).max() < 1e-10


def test_scan_oracle_agrees(rng):
    F = IsoFunction(*example_g2(4, 0.3))
    Y = random_sphere(rng, 10, F.dim)
    scan = np.array([F.psi_inverse_angle_scan(y) for y in Y])
    assert np.abs(scan - F.psi_inverse_angle(Y)).max() < 1e-9


def test_zero_generator_is_identity(rng):
    phi = CliffordQuadric(1, 1)
    F = IsoFunction(phi, SkewGenerator.zero(3))
    X = random_sphere(rng, 20, 4)
    assert np.abs(F.psi_forward(X) - X).max() == 0
    assert np.allclose(F.iso_eval(X), phi.value(X), atol=1e-15)


def test_f_transports_phi(rng):
    # f(psi(x)) = phi(x) on the sphere
    F = IsoFunction(*example_g2(6, -0.8))
    X = random_sphere(rng, 50, F.dim)
    assert np.abs(F.iso_eval(F.psi_forward(X)) - F.phi.value(X)).max() < 1e-13


def test_degree_zero_and_degree_g_extensions(rng):
    F = IsoFunction(*example_g2(4, 0.3))
    X = random_sphere(rng, 10, F.dim)
    r = 2.7
    assert np.allclose(F.iso_eval(r * X), F.iso_eval(X), atol=1e-13)
    assert np.allclose(F.homogeneous_extension(r * X), r**2 * F.iso_eval(X), atol=1e-12)


def test_block_formula_matches_exponential(rng):
    phi = CliffordQuadric(2, 1)
    Q = SkewGenerator.from_rates([0.6, 0.25], 4)
    F = IsoFunction(phi, Q)
    X = random_sphere(rng, 30, 5)
    assert np.abs(psi_forward_blocks(F, X) - F.psi_forward(X)).max() < 1e-14
    with pytest.raises(ValueError):
        psi_forward_blocks(IsoFunction(phi, random_admissible(rng, 5)), X)


def test_wrappers_validate_sphere_points():
    F = IsoFunction(*example_g1())
    with pytest.raises(ValueError):
        iso_eval(F, [1.0, 1.0, 0.0])
    y = np.array([0.0, 0.6, 0.8])
    assert np.allclose(psi_inverse(F, y), F.psi_inverse(y))


def test_general_zeta_reduces_to_arcsin():
    for g in (1, 2, 3):
        Gz = GeneralZeta(lambda t, g=g: g * math.sqrt(max(0.0, 1 - t * t)))
        for t in (-1.0, -0.4, 0.0, 0.3, 0.99, 1.0):
            assert abs(general_zeta(Gz, t) - math.asin(t) / g) < 1e-12


def test_general_zeta_constant_profile():
    Gz = GeneralZeta(lambda t: 2.0, c=0.0, d=3.0, t0=1.0)
    assert abs(Gz(2.5) - 0.75) < 1e-12
    with pytest.raises(ValueError):
        Gz(3.5)


def test_general_zeta_divergent_profile():
    # 1/(1 - t) is not integrable at 1
    Gz = GeneralZeta(lambda t: (1 - t) ** 2 + 0.0)
    with pytest.raises(QuadratureError):
        Gz(1.0)


def test_iso_verify_g1_and_control():
    F = IsoFunction(*example_g1())
    rep = iso_verify(F, samples=200)
    assert rep.passed, rep.failures
    ctrl = iso_verify(F, samples=200, control=True)
    assert not ctrl.passed and ctrl.maxA_dev > 1e-2


def test_iso_verify_random_generator(rng):
    phi = CliffordQuadric(1, 1)
    F = IsoFunction(phi, random_admissible(rng, 4, max_rate=0.6))
    rep = iso_verify(F, samples=200, seed=4)
    assert rep.passed, rep.failures
    d = rep.to_dict()
    assert set(d) >= {"levels", "maxA_dev", "maxB_spread", "excluded_near_focal", "samples", "seed"}


def test_homogeneous_form_constant_on_levels(rng):
    F = IsoFunction(*example_g2(4, 0.3))
    for t in (-0.5, 0.2, 0.7):
        Xb, ok = project_to_level(F.phi, rng.standard_normal((40, F.dim)), t)
        X = F.psi_forward(Xb[ok])
        phi0, l1, l2 = homogeneous_system_lhs(F, X)
        assert np.abs(phi0 - t).max() < 1e-10
        assert np.abs(l1 - 2 * math.sqrt(1 - t * t)).max() < 1e-6
        assert l2.max() - l2.min() < 5e-4


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        IsoFunction(LinearCM([1.0, 0, 0]), SkewGenerator.zero(3))
