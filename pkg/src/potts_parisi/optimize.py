"""Minimization of f over step CDFs with free heights on a uniform grid.

The heights ``0 <= m_1 <= ... <= m_k <= 1`` on ``t_i = i/k`` enter ``f``
through a convex parameterization, so projected gradient descent finds the
minimizer of the restricted problem.  Gradients come from the discrete
adjoint of the recursion (exact for the computed ``f``); central finite
differences with ``fd_step`` remain available as ``gradient="fd"``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ConvergenceError
from .functional import f_value_and_grad
from .model import MixtureXi, check_condition_1, check_convexity_sample
from .paths import StepCdf, l1_distance, make_step_cdf
from .pde import GridSpec, default_grid

log = logging.getLogger(__name__)


def isotonic_project(v) -> np.ndarray:
    """Euclidean projection onto ``{0 <= m_1 <= ... <= m_k <= 1}``."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v.copy()
    return np.clip(isotonic_regression(v).x, 0.0, 1.0)


@dataclass(frozen=True)
class MinimizeOptions:
    k: int = 32
    fd_step: float = 1e-4
    max_iters: int = 500
    tol_value: float = 1e-8
    tol_l1: float = 1e-4
    tol_pg: float = 1e-9
    starts: int = 1
    gradient: str = "adjoint"
    grid: GridSpec | None = None
    check_convexity: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.gradient not in ("adjoint", "fd"):
            raise ValueError("gradient must be 'adjoint' or 'fd'")


@dataclass
class MinimizeResult:
    alpha_star: StepCdf
    heights: np.ndarray
    value: float
    iterations: int
    gradient_norm_final: float
    converged: bool
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star.to_dict(),
            "heights": self.heights.tolist(),
            "value": self.value,
            "iterations": self.iterations,
            "gradient_norm_final": self.gradient_norm_final,
            "converged": self.converged,
            "trace": self.trace,
        }


def _fd_value_and_grad(xi, t, m, grid, h):
    value, _ = f_value_and_grad(xi, t, m, grid)
    g = np.empty_like(m)
    for i in range(len(m)):
        up, dn = m.copy(), m.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f_value_and_grad(xi, t, up, grid)[0] - f_value_and_grad(xi, t, dn, grid)[0]) / (2 * h)
    return value, g


def projected_gradient_norm(m, g) -> float:
    """``|m - P(m - g)|_inf``: zero exactly at stationary points of the constrained problem."""
    return float(np.max(np.abs(m - isotonic_project(m - g)), initial=0.0))


def minimize_f(
    xi: MixtureXi, opts: MinimizeOptions | None = None, seed: int | None = 0, start=None, raise_on_fail: bool = False
) -> MinimizeResult:
    """Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.

    Stops when the projected gradient (sup norm) falls below ``tol_pg``, or
    when a step moves the value by less than ``tol_value`` (relative) and the
    heights by less than ``tol_l1`` in L1 while the projected gradient is
    below ``10 tol_pg``.  Small steps alone are not trusted: the problem is
    badly conditioned and BB steps can stall far from the minimizer.
    ``start`` overrides the random initial heights.
    """
    opts = opts or MinimizeOptions()
    if opts.check_convexity and not xi.is_zero:
        rep = check_convexity_sample(xi, trials=2000, rng_seed=0)
        if not rep.convex:
            warnings.warn(f"xi failed the convexity sample (max violation {rep.max_violation:.2e})")
    k = opts.k
    t = np.linspace(0.0, 1.0, k + 1)
    grid = default_grid(xi, opts.grid)
    if start is not None:
        m = isotonic_project(start)
    else:
        m = np.sort(np.random.default_rng(seed).uniform(0.0, 1.0, k))

    if xi.is_zero:
        # flat landscape: every alpha is optimal; report the canonical one-step iterate
        m = np.full(k, float(m.mean()))
        return MinimizeResult(make_step_cdf(t, m), m, 0.0, 0, 0.0, True, [0.0])

    def evaluate(mm):
        if opts.gradient == "fd":
            return _fd_value_and_grad(xi, t, mm, grid, opts.fd_step)
        return f_value_and_grad(xi, t, mm, grid)

    value, g = evaluate(m)
    trace = [value]
    step = 1.0 / max(1e-12, float(np.max(np.abs(g))))
    step = min(step, 10.0 * k)
    converged = False
    pg = projected_gradient_norm(m, g)
    it = 0
    for it in range(1, opts.max_iters + 1):
        if pg <= opts.tol_pg:
            converged = True
            it -= 1
            break
        # backtracking along the projection arc
        while True:
            cand = isotonic_project(m - step * g)
            d = cand - m
            if not np.any(d):
                break
            v_new, g_new = evaluate(cand)
            if v_new <= value + 1e-4 * float(g @ d) + 1e-15 * abs(value):
                break
            step *= 0.5
            if step < 1e-14:
                break
        if not np.any(d) or step < 1e-14:
            converged = pg <= 10 * opts.tol_pg or not np.any(d)
            break
        s, y = d, g_new - g
        dv = value - v_new
        m, value, g = cand, v_new, g_new
        trace.append(value)
        pg = projected_gradient_norm(m, g)
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else step * 2.0
        step = min(max(step, 1e-6), 1e6)
        small = dv <= opts.tol_value * max(1.0, abs(value)) and np.mean(np.abs(s)) <= opts.tol_l1
        if small and pg <= 10.0 * opts.tol_pg:
            converged = True
            break
    result = MinimizeResult(
        alpha_star=make_step_cdf(t, m),
        heights=m,
        value=value,
        iterations=it,
        gradient_norm_final=pg,
        converged=converged,
        trace=trace,
    )
    if not converged:
        msg = f"did not converge after {it} iterations (projected gradient {pg:.2e})"
        if raise_on_fail:
            raise ConvergenceError(msg, result)
        log.warning(msg)
    return result


@dataclass
class UniquenessReport:
    results: list
    l1_spread: float
    value_spread: float
    condition_1: bool
    quadratic: bool

    @property
    def applies(self) -> bool:
        """Uniqueness is only asserted under condition (1) or for pure quadratic xi."""
        return self.condition_1 or self.quadratic

    def to_dict(self) -> dict:
        return {
            "l1_spread": self.l1_spread,
            "value_spread": self.value_spread,
            "condition_1": self.condition_1,
            "quadratic": self.quadratic,
            "values": [r.value for r in self.results],
            "minimizers": [r.alpha_star.to_dict() for r in self.results],
        }


def multistart(xi: MixtureXi, opts: MinimizeOptions | None = None, n_starts: int = 10, seed: int = 0) -> UniquenessReport:
    """Run ``minimize_f`` from ``n_starts`` random monotone starts."""
    if n_starts < 2:
        raise ValueError("multistart needs at least 2 starts")
    opts = opts or MinimizeOptions()
    ss = np.random.SeedSequence(seed)
    results = []
    for i, child in enumerate(ss.spawn(n_starts)):
        start = np.sort(np.random.default_rng(child).uniform(0.0, 1.0, opts.k))
        results.append(minimize_f(xi, opts, start=start))
    l1 = max(l1_distance(a.alpha_star, b.alpha_star) for a in results for b in results)
    vals = [r.value for r in results]
    cond = check_condition_1(xi).holds if not xi.is_zero else False
    return UniquenessReport(results, float(l1), float(max(vals) - min(vals)), cond, xi.is_quadratic)
