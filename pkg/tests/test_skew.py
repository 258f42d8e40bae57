import json
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from randers_sphere.skew import (
    InadmissibleGenerator, SkewGenerator, as_sphere_point, as_tangent, flow, killing_field,
    mat_exp, standard_form, validate_admissible,
)
from conftest import random_admissible, random_sphere


def test_rejects_non_skew():
    with pytest.raises(ValueError):
        SkewGenerator([[0, 1], [1, 0]])


def test_symmetrizes_rounding_noise():
    M = np.array([[0, 0.3], [-0.3 + 1e-14, 0]])
    Q = SkewGenerator(M)
    assert np.array_equal(Q.entries, -Q.entries.T)


def test_from_abc_layout():
    Q = SkewGenerator.from_abc(0.1, 0.2, 0.3)
    assert np.allclose(Q.entries, [[0, 0.1, 0.2], [-0.1, 0, 0.3], [-0.2, -0.3, 0]])


@pytest.mark.parametrize("abc,ok", [((0.3, 0.4, 0.5), True), ((0.6, 0.6, 0.6), False), ((1.0, 0, 0), False)])
def test_admissibility_matches_norm_of_wind(abc, ok):
    # on S^2 the max of |Qx| is the rotation rate sqrt(a^2+b^2+c^2)
    Q = SkewGenerator.from_abc(*abc)
    assert Q.admissible is ok
    assert validate_admissible(Q)[0] is ok
    if not ok:
        with pytest.raises(InadmissibleGenerator):
            Q.require_admissible()


def test_min_eig_equals_one_minus_max_rate_squared(rng):
    for dim in range(2, 8):
        Q = random_admissible(rng, dim)
        assert math.isclose(Q.min_eig, 1 - Q.rates.max() ** 2, abs_tol=1e-12)


def test_exp_against_expm(rng):
    for dim in range(2, 8):
        Q = random_admissible(rng, dim)
        for t in (0.0, 0.7, -2.3, 31.0):
            assert np.abs(mat_exp(Q, t) - scipy.linalg.expm(t * Q.entries)).max() < 1e-12


def test_standard_form_reconstructs(rng):
    for dim in range(2, 9):
        Q = random_admissible(rng, dim)
        sf = standard_form(Q)
        assert np.abs(sf.reconstruct() - Q.entries).max() < 1e-13
        assert np.abs(sf.P.T @ sf.P - np.eye(dim)).max() < 1e-13
        assert np.all(np.diff(sf.rates) <= 0) and np.all(sf.rates >= 0)


def test_rotate_per_row_angles(rng):
    Q = random_admissible(rng, 5)
    X = random_sphere(rng, 7, 5)
    t = rng.uniform(-4, 4, 7)
    ref = np.stack([scipy.linalg.expm(ti * Q.entries) @ x for ti, x in zip(t, X)])
    assert np.abs(Q.rotate(X, t) - ref).max() < 1e-12


def test_from_rates_and_json_roundtrip():
    Q = SkewGenerator.from_rates([0.5, 0.2], 4)
    assert Q.entries[0, 1] == 0.5 and Q.entries[2, 3] == 0.2
    Q2 = SkewGenerator.from_json(json.loads(json.dumps(Q.to_json())))
    assert np.array_equal(Q.entries, Q2.entries)
    assert np.allclose(Q.rates, [0.5, 0.2])


def test_killing_field_is_tangent_and_flow_preserves_sphere(rng):
    Q = random_admissible(rng, 4)
    X = random_sphere(rng, 10, 4)
    V = killing_field(Q, X)
    assert np.abs(np.einsum("mi,mi->m", V, X)).max() < 1e-15
    Y = flow(Q, 1.3, X)
    assert np.abs(np.linalg.norm(Y, axis=1) - 1).max() < 1e-14


def test_q13_generator_quarter_turn():
    # exp(pi/2 Q) e1 for the q13 = 1/2 generator
    Q = SkewGenerator.from_abc(0, 0.5, 0)
    assert np.abs(Q.exp(math.pi / 2) @ [1, 0, 0] - [math.sqrt(0.5), 0, -math.sqrt(0.5)]).max() < 1e-15


def test_point_validators():
    with pytest.raises(ValueError):
        as_sphere_point([1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        as_tangent([1.0, 0, 0], [0.5, 1.0, 0])


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 10_000))
def test_flow_group_property(s, t, seed):
    rng = np.random.default_rng(seed)
    Q = random_admissible(rng, 4)
    assert np.abs(Q.exp(s) @ Q.exp(t) - Q.exp(s + t)).max() < 1e-12
