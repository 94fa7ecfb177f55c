import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from potts_parisi.errors import InvalidPathError, NotPSDError
from potts_parisi.model import ExchangeableMat, psi_embed
from potts_parisi.paths import (
    MatrixStepPath,
    StepCdf,
    compose_psi,
    l1_distance,
    make_step_cdf,
    path_l1_distance,
    quantile_inverse,
    random_step_cdf,
)


def test_make_step_cdf():
    a = make_step_cdf([0, 1], [1])
    assert a.breaks == (0.0, 1.0) and a.values == (1.0,)
    b = make_step_cdf([0, 0.3, 1], [0.2, 0.2])
    assert b.breaks == (0.0, 1.0) and b.values == (0.2,)
    c = make_step_cdf([0, 0.5, 1], [0.3, 0.8])
    assert c.breaks == (0.0, 0.5, 1.0) and c.values == (0.3, 0.8)


@pytest.mark.parametrize(
    "t,m",
    [([0, 0.5, 1], [0.8, 0.2]), ([0, 0.5, 1], [0.2, 1.2]), ([0.1, 1], [0.5]), ([0, 0.6, 0.4, 1], [0.1, 0.2, 0.3])],
)
def test_invalid(t, m):
    with pytest.raises(InvalidPathError):
        make_step_cdf(t, m)


def test_non_monotone_message():
    with pytest.raises(ValueError, match="non-monotone heights"):
        make_step_cdf([0, 0.5, 1], [0.8, 0.2])


def test_l1_distance():
    a = make_step_cdf([0, 0.5, 1], [0.3, 0.8])
    assert l1_distance(a, a) == 0.0
    assert l1_distance(make_step_cdf([0, 1], [1]), make_step_cdf([0, 1], [0])) == 1.0
    assert l1_distance(make_step_cdf([0, 0.5, 1], [0, 1]), make_step_cdf([0, 1], [0.5])) == pytest.approx(0.5)


def test_quantile_inverse():
    z = quantile_inverse(make_step_cdf([0, 1], [1]))
    np.testing.assert_array_equal(z(np.linspace(0.01, 1, 50)), 0.0)
    z = quantile_inverse(make_step_cdf([0, 0.5, 1], [0.3, 0.8]))
    # oracle: brute-force inf-definition on a 1e3 grid
    u = (np.arange(1000) + 0.5) / 1000
    expected = np.where(u <= 0.3, 0.0, np.where(u <= 0.8, 0.5, 1.0))
    np.testing.assert_array_equal(z(u), expected)


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_double_inverse(n, seed):
    a = random_step_cdf(np.random.default_rng(seed), n)
    assert l1_distance(a.inverse().inverse(), a) <= 1e-14


@settings(max_examples=30)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_refine_keeps_function(n, seed):
    rng = np.random.default_rng(seed)
    a = random_step_cdf(rng, n)
    b = a.refine(rng.uniform(0, 1, 3))
    assert l1_distance(a, b) == 0.0
    assert len(b.breaks) >= len(a.breaks)


def test_compose_psi():
    z = quantile_inverse(make_step_cdf([0, 1], [1.0]))
    p = compose_psi(z, 3)
    np.testing.assert_allclose(p.values[0].dense(), np.full((3, 3), 1 / 9))
    z = quantile_inverse(make_step_cdf([0, 0.4, 1], [0.3, 0.9]))
    p = compose_psi(z, 2)
    for a, b in zip(p.values[:-1], p.values[1:]):
        inc = b - a
        assert inc.lam_u == pytest.approx(0.0, abs=1e-15)
        assert inc.lam_perp >= 0.0
    assert p.values[0] == psi_embed(2, 0.0) and p.values[-1] == psi_embed(2, 1.0)


def test_matrix_path_validation():
    with pytest.raises(NotPSDError):
        MatrixStepPath((0.0, 0.5, 1.0), (ExchangeableMat(1.0, 1.0, 2), ExchangeableMat(0.5, 1.0, 2)))
    p = MatrixStepPath((0.0, 0.5, 1.0), (ExchangeableMat(1.0, 1.0, 2), ExchangeableMat(1.0, 1.0, 2)))
    assert p.canonical().breaks == (0.0, 1.0)


def test_path_l1_distance():
    p = MatrixStepPath((0.0, 1.0), (np.eye(2),))
    q = MatrixStepPath((0.0, 0.5, 1.0), (np.eye(2), 2 * np.eye(2)))
    assert path_l1_distance(p, q) == pytest.approx(0.5 * np.sqrt(2))
    assert path_l1_distance(p, p) == 0.0


def test_round_trip_dict():
    a = make_step_cdf([0, 0.2, 0.7, 1], [0.1, 0.4, 1.0])
    assert StepCdf.from_dict(a.to_dict()) == a
