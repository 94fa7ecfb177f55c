import numpy as np
import pytest

from potts_parisi.errors import StateSpaceTooLargeError
from potts_parisi.finite_n import DisorderSample, estimate_FN, free_energy_exact, hamiltonian
from potts_parisi.model import MixtureXi

# frozen: independent loop over the 4 colorings, g = default_rng(12345).standard_normal((2, 2))
F2_GOLDEN = -0.8974691095213848


def test_zero_model():
    for N, D in ((1, 2), (3, 3), (5, 2)):
        xi = MixtureXi(D, {})
        s = DisorderSample.draw(xi, N, 0)
        assert free_energy_exact(s, xi) == 0.0
        assert hamiltonian(s, xi, np.zeros(N, dtype=int)) == 0.0
    est = estimate_FN(MixtureXi(2, {}), 3, 5)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_single_site():
    beta = 0.7
    xi = MixtureXi(2, {2: beta})
    s = DisorderSample.draw(xi, 1, 9)
    g11 = s.couplings[2][0, 0]
    for c in (0, 1):
        assert hamiltonian(s, xi, [c]) == pytest.approx(beta * g11)
    assert free_energy_exact(s, xi) == pytest.approx(beta * g11 - beta**2 / 2, abs=1e-14)


def test_n2_golden():
    xi = MixtureXi(2, {2: 1.0})
    assert free_energy_exact(DisorderSample.draw(xi, 2, 12345), xi) == pytest.approx(F2_GOLDEN, abs=1e-13)


def test_covariance_matches_xi():
    xi = MixtureXi(2, {2: 1.0, 3: 0.6})
    N = 4
    a = np.array([0, 0, 1, 0])
    b = np.array([0, 1, 1, 1])
    rng = np.random.default_rng(0)
    n = 20_000
    ha = np.empty(n)
    hb = np.empty(n)
    for i in range(n):
        s = DisorderSample.draw(xi, N, rng)
        ha[i] = hamiltonian(s, xi, a)
        hb[i] = hamiltonian(s, xi, b)
    ov = np.eye(2)[a].T @ np.eye(2)[b] / N
    target = N * xi.xi(ov)
    prod = ha * hb
    assert abs(prod.mean() - target) <= 3 * prod.std(ddof=1) / np.sqrt(n)
    own = N * xi.xi(np.eye(2)[a].T @ np.eye(2)[a] / N)
    sq = ha * ha
    assert abs(sq.mean() - own) <= 3 * sq.std(ddof=1) / np.sqrt(n)


def test_state_space_guard():
    xi = MixtureXi(4, {2: 1.0})
    with pytest.raises(StateSpaceTooLargeError, match="state space too large"):
        free_energy_exact(DisorderSample.draw(xi, 12, 0), xi)


def test_bad_colors():
    xi = MixtureXi(2, {2: 1.0})
    s = DisorderSample.draw(xi, 3, 0)
    with pytest.raises(ValueError):
        hamiltonian(s, xi, [0, 2, 1])
    with pytest.raises(ValueError):
        hamiltonian(s, xi, [0, 1])


def test_estimate_determinism_and_control_variate():
    xi = MixtureXi(2, {2: 0.5})
    a = estimate_FN(xi, 4, 200, seed=3)
    b = estimate_FN(xi, 4, 200, seed=3)
    assert a.mean == b.mean and a.std_error == b.std_error
    raw = estimate_FN(xi, 4, 200, seed=3, control_variate=False)
    assert a.std_error < raw.std_error
    assert abs(a.mean - raw.mean) <= 3 * np.hypot(a.std_error, raw.std_error)


def test_jensen_upper_bound():
    # annealed bound: E F_N <= (1/N) log E Z = 0 with the self-overlap correction
    est = estimate_FN(MixtureXi(3, {2: 1.0}), 5, 50, seed=0)
    assert est.mean < 0.0
