import os
import subprocess
import sys

import numpy as np
import pytest

from randers_sphere import _accel
from randers_sphere.cartan_munzner import GenericPolynomial
from randers_sphere.isoparametric import IsoFunction
from randers_sphere.kernels import NO_SIGN_CHANGE, OK, RATIO_OUT_OF_RANGE, psi_inverse_angles
from randers_sphere.presets import example_g1, example_g2
from conftest import random_admissible, random_sphere

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("case", ["g1", "g2"])
def test_backends_agree(case, rng):
    phi, Q = example_g1() if case == "g1" else example_g2(5, 0.7)
    Y = random_sphere(rng, 500, phi.dim)
    t_nb = IsoFunction(phi, Q, use_numba=True).psi_inverse_angle(Y)
    t_np = IsoFunction(phi, Q, use_numba=False).psi_inverse_angle(Y)
    assert np.abs(t_nb - t_np).max() < 1e-13


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_angle_solves_equation(use_numba, rng):
    phi, _ = example_g2(4, 0.3)
    Q = random_admissible(rng, phi.dim, max_rate=0.95)
    F = IsoFunction(phi, Q, use_numba=use_numba)
    Y = random_sphere(rng, 200, phi.dim)
    t = F.psi_inverse_angle(Y)
    X = Q.rotate(Y, -t)
    assert np.abs(t - np.arcsin(np.clip(phi.value(X), -1, 1)) / 2).max() < 1e-13


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_status_codes(use_numba):
    phi, Q = example_g1()
    sf = Q.standard
    Y = np.array([[0.6, 0.0, 0.8]])
    exps, coeffs = phi.terms()
    t, st = psi_inverse_angles(Y, sf.P, sf.rates, exps, coeffs, 1, use_numba=use_numba)
    assert st[0] == OK
    # 3 x1 is not a CM polynomial: the ratio leaves [-1, 1]
    t, st = psi_inverse_angles(Y, sf.P, sf.rates, exps, 3 * coeffs, 1, use_numba=use_numba)
    assert st[0] in (RATIO_OUT_OF_RANGE, NO_SIGN_CHANGE)


def test_non_cm_input_raises():
    bad = GenericPolynomial(1, [[1, 0, 0]], [3.0])
    F = IsoFunction(bad, example_g1()[1])
    with pytest.raises((ValueError, RuntimeError)):
        F.psi_inverse_angle(np.array([[0.6, 0.0, 0.8]]))


def test_env_flag_disables_numba():
    code = "from randers_sphere import _accel; print(_accel.USE_NUMBA)"
    env = dict(os.environ, RANDERS_SPHERE_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
