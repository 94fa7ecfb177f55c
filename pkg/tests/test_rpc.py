import numpy as np
import pytest

from potts_parisi.errors import LocationMismatchError
from potts_parisi.functional import half_grad_path, lemma_path, p_functional, psi_of_path
from potts_parisi.model import ExchangeableMat, MixtureXi
from potts_parisi.paths import MatrixStepPath, make_step_cdf
from potts_parisi.rpc import CascadeSpec, mc_p_functional, mc_psi, sample_cascade, spec_for_path


def test_spec_validation():
    with pytest.raises(ValueError):
        CascadeSpec((0.5, 0.3))
    with pytest.raises(ValueError):
        CascadeSpec((1.0,))
    with pytest.raises(ValueError):
        CascadeSpec((0.5,), atoms=10)


# frozen: 20000-atom Poisson-Dirichlet simulation with the tail in the normalizer
P_MAX_ABOVE_09_Z005 = 0.8923
P_EFF_ABOVE_10_Z095 = 0.884


def test_weights_sum_to_one():
    tree = sample_cascade(CascadeSpec((0.3, 0.7), atoms=500), np.random.default_rng(0))
    assert tree.leaf_weights().sum() == pytest.approx(1.0, abs=1e-12)
    assert tree.leaf_weights(renormalize=False).sum() + tree.tail_mass() == pytest.approx(1.0, abs=1e-12)


def _binomial_close(hits, n, p):
    return abs(hits - n * p) <= 3 * np.sqrt(n * p * (1 - p))


def test_small_zeta_concentrates():
    spec = CascadeSpec((0.05,), atoms=1000)
    n = 400
    hits = sum(sample_cascade(spec, np.random.default_rng(s)).leaf_weights(False).max() > 0.9 for s in range(n))
    assert _binomial_close(hits, n, P_MAX_ABOVE_09_Z005)


def test_large_zeta_spreads():
    spec = CascadeSpec((0.95,), atoms=1000)
    n = 400
    eff = [1.0 / np.sum(sample_cascade(spec, np.random.default_rng(s)).leaf_weights(False) ** 2) for s in range(n)]
    assert _binomial_close(sum(e > 10 for e in eff), n, P_EFF_ABOVE_10_Z095)


def test_zero_path_exact():
    q = MatrixStepPath((0.0, 1.0), (ExchangeableMat(0.0, 0.0, 2),))
    est = mc_psi(q, spec_for_path(q, replicas=5, atoms=100), seed=1)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_constant_path_matches_quadrature():
    q = MatrixStepPath((0.0, 1.0), (ExchangeableMat.from_entries(0.6, 0.2, 2),))
    est = mc_psi(q, spec_for_path(q, replicas=2000, atoms=100), seed=3)
    assert abs(est.mean - psi_of_path(q)) <= 3 * est.std_error


def test_two_level_matches_recursion():
    xi = MixtureXi(2, {2: 1.0})
    pi = lemma_path(make_step_cdf([0, 0.4, 1], [0.3, 0.7]), 2)
    q = half_grad_path(xi, pi)
    est = mc_psi(q, spec_for_path(q, atoms=2000, replicas=100, min_atoms=16), seed=5)
    assert abs(est.mean - psi_of_path(q)) <= 3 * est.std_error
    p = mc_p_functional(xi, pi, spec_for_path(q, atoms=2000, replicas=100, min_atoms=16), seed=5)
    assert abs(p.mean - p_functional(xi, pi)) <= 3 * p.std_error


def test_location_mismatch():
    q = MatrixStepPath((0.0, 0.5, 1.0), (ExchangeableMat(0.2, 0.1, 2), ExchangeableMat(0.4, 0.3, 2)))
    with pytest.raises(LocationMismatchError, match="location mismatch"):
        mc_psi(q, CascadeSpec((0.3,), atoms=100, replicas=2))


def test_zero_model_and_determinism():
    pi = lemma_path(make_step_cdf([0, 0.5, 1], [0.4, 0.8]), 2)
    est = mc_p_functional(MixtureXi(2, {}), pi, CascadeSpec((0.4, 0.8), atoms=100))
    assert est.mean == 0.0 and est.std_error == 0.0
    xi = MixtureXi(2, {2: 1.0})
    spec = spec_for_path(half_grad_path(xi, pi), atoms=300, replicas=10)
    a = mc_p_functional(xi, pi, spec, seed=42)
    b = mc_p_functional(xi, pi, spec, seed=42)
    assert a.mean == b.mean and a.std_error == b.std_error
    assert mc_p_functional(xi, pi, spec, seed=43).mean != a.mean
