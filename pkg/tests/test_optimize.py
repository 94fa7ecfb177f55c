import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from potts_parisi.errors import ConvergenceError
from potts_parisi.functional import f_functional
from potts_parisi.model import MixtureXi
from potts_parisi.optimize import MinimizeOptions, isotonic_project, minimize_f, multistart, projected_gradient_norm
from potts_parisi.paths import make_step_cdf
from potts_parisi.pde import GridSpec

GRID = GridSpec(points=1024)


def test_isotonic_project():
    v = np.array([0.1, 0.2, 0.2, 0.9])
    np.testing.assert_array_equal(isotonic_project(v), v)
    np.testing.assert_allclose(isotonic_project([0.5, 0.3]), [0.4, 0.4])
    np.testing.assert_array_equal(isotonic_project([-1.0, 2.0]), [0.0, 1.0])


def test_isotonic_is_projection():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(0.5, 0.6, 7)
        p = isotonic_project(v)
        assert np.all(np.diff(p) >= 0) and p.min() >= 0 and p.max() <= 1
        np.testing.assert_allclose(isotonic_project(p), p)
        # variational inequality (v - p) . (w - p) <= 0 for feasible w
        w = np.sort(rng.uniform(0, 1, 7))
        assert (v - p) @ (w - p) <= 1e-12


def test_zero_model():
    res = minimize_f(MixtureXi(2, {}), MinimizeOptions(k=8), seed=1)
    assert res.value == 0.0 and res.converged
    assert len(set(res.heights)) == 1
    rep = multistart(MixtureXi(2, {}), MinimizeOptions(k=8), n_starts=3)
    assert rep.value_spread == 0.0 and not rep.applies


def test_high_temperature_replica_symmetric():
    xi = MixtureXi(2, {2: 0.1})
    res = minimize_f(xi, MinimizeOptions(k=8, grid=GRID), seed=0)
    assert res.converged and res.alpha_star.n_steps == 1
    scan = minimize_scalar(lambda m: f_functional(xi, make_step_cdf([0, 1], [m]), GRID), bounds=(0, 1), method="bounded", options={"xatol": 1e-10})
    best = min(scan.fun, f_functional(xi, make_step_cdf([0, 1], [1.0]), GRID))
    assert res.value == pytest.approx(best, abs=1e-6)


def test_low_temperature_breaks_symmetry():
    xi = MixtureXi(2, {2: 2.0})
    opts = MinimizeOptions(k=8, grid=GRID)
    res = minimize_f(xi, opts, seed=0)
    assert res.converged
    assert len(np.unique(np.round(res.heights, 8))) >= 2
    scan = minimize_scalar(lambda m: f_functional(xi, make_step_cdf([0, 1], [m]), GRID), bounds=(0, 1), method="bounded", options={"xatol": 1e-10})
    assert scan.fun - res.value > 10 * opts.tol_value


def test_stationarity_and_trace():
    xi = MixtureXi(2, {2: 1.5, 3: 0.5})
    res = minimize_f(xi, MinimizeOptions(k=6, grid=GRID), seed=3)
    assert res.converged and res.gradient_norm_final <= 10 * MinimizeOptions().tol_pg
    assert np.all(np.diff(res.trace) <= 1e-15)


def test_fd_and_adjoint_agree():
    xi = MixtureXi(2, {2: 1.5})
    a = minimize_f(xi, MinimizeOptions(k=4, grid=GRID), seed=2)
    b = minimize_f(xi, MinimizeOptions(k=4, grid=GRID, gradient="fd", fd_step=1e-5, tol_pg=1e-7), seed=2)
    assert a.value == pytest.approx(b.value, abs=1e-9)
    np.testing.assert_allclose(a.heights, b.heights, atol=1e-3)


def test_convergence_error():
    with pytest.raises(ConvergenceError, match="did not converge"):
        minimize_f(MixtureXi(2, {2: 2.0}), MinimizeOptions(k=8, max_iters=1, grid=GRID), seed=0, raise_on_fail=True)


def test_multistart_small():
    rep = multistart(MixtureXi(2, {2: 2.0}), MinimizeOptions(k=8, grid=GRID), n_starts=3, seed=0)
    assert rep.applies and rep.quadratic and not rep.condition_1
    assert rep.l1_spread <= 1e-3 and rep.value_spread <= 1e-7


def test_projected_gradient_norm_zero_at_interior_stationary():
    assert projected_gradient_norm(np.array([0.2, 0.5]), np.zeros(2)) == 0.0
    # pushing against the upper bound at m = 1 is stationary
    assert projected_gradient_norm(np.array([1.0, 1.0]), np.array([-1.0, -1.0])) == 0.0


def test_options_validation():
    with pytest.raises(ValueError):
        MinimizeOptions(k=0)
    with pytest.raises(ValueError):
        MinimizeOptions(gradient="newton")
