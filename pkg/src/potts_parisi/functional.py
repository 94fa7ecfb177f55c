"""The Parisi functional f(alpha), the cascade functional psi(q) and P(pi).

``f`` is evaluated through the PDE recursion plus two bookkeeping terms that
are integrated exactly.  ``psi`` reuses the same backward engine with clock
``M = 2q`` and exponents given by the jump locations of ``q``; ``P`` then
follows from ``P(pi) = -psi(grad xi(pi) / 2) + (1/2) int theta(pi)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from .errors import ComputationError
from .model import ExchangeableMat, MixtureXi, psd_sqrt, psi_embed
from .paths import MatrixStepPath, StepCdf
from .pde import (
    SUPPORTED_DIMS,
    GridSpec,
    Level,
    backward_recursion,
    default_grid,
    gaussian_expectation,
    value_and_gradient,
)

QUADRATURE_CAP = 4_000_000


def _interval_integrals(xi: MixtureXi, t) -> np.ndarray:
    """``int Psi . mu_dot`` over each interval of the grid ``t`` (exact for polynomials)."""
    t = np.asarray(t, dtype=float)
    n = max(2, xi.max_order // 2 + 2)
    z, w = leggauss(n)
    lo, hi = t[:-1, None], t[1:, None]
    s = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
    vals = np.asarray(xi.psi_dot_mu_dot(s.ravel()), dtype=float).reshape(s.shape)
    return 0.5 * (hi[:, 0] - lo[:, 0]) * (vals @ w)


def correction_integral(xi: MixtureXi, alpha: StepCdf) -> float:
    """``int_0^1 alpha(s) Psi(s) . mu_dot(s) ds`` for a step CDF."""
    if xi.is_zero:
        return 0.0
    return float(np.dot(alpha.m, _interval_integrals(xi, alpha.t)))


def make_levels(xi: MixtureXi, t, m) -> list[Level]:
    """Levels for heights ``m`` on breakpoints ``t`` (no canonicalization)."""
    t = np.asarray(t, dtype=float)
    lu, lp = xi.mu_eigs(t)
    lu = np.broadcast_to(lu, t.shape)
    lp = np.broadcast_to(lp, t.shape)
    out = []
    for i, mi in enumerate(np.asarray(m, dtype=float)):
        inc = ExchangeableMat(float(lu[i + 1] - lu[i]), float(lp[i + 1] - lp[i]), xi.dim)
        psd_sqrt(inc)
        out.append(Level(float(mi), inc))
    return out


@dataclass(frozen=True)
class FTerms:
    value: float
    phi0: float
    theta_term: float
    correction: float

    def to_dict(self) -> dict:
        return {"phi0": self.phi0, "theta_term": self.theta_term, "correction": self.correction}


def f_terms(xi: MixtureXi, alpha: StepCdf, grid: GridSpec | None = None) -> FTerms:
    """Term breakdown ``value = phi0 + theta_term + correction``.

    ``correction`` is the signed term ``-(1/2) int alpha Psi . mu_dot``.
    The canonical representation of ``alpha`` is used, so redundant
    breakpoints do not change the discretization.
    """
    if xi.is_zero:
        return FTerms(0.0, 0.0, 0.0, 0.0)
    alpha = alpha.canonical()
    grid = default_grid(xi, grid)
    levels = make_levels(xi, alpha.t, alpha.m)
    shift = 0.5 * xi.mu(1.0).diag
    phis, _, _ = backward_recursion(xi.dim, shift, levels, grid, keep_levels=False)
    phi0 = gaussian_expectation(phis[0], grid, max(xi.mu(0.0).lam_perp, 0.0), grid.quad_nodes)
    theta_term = 0.5 * xi.theta(psi_embed(xi.dim, 1.0))
    corr = -0.5 * correction_integral(xi, alpha)
    return FTerms(phi0 + theta_term + corr, phi0, theta_term, corr)


def f_functional(xi: MixtureXi, alpha: StepCdf, grid: GridSpec | None = None) -> float:
    """Parisi functional ``f(alpha)``."""
    return f_terms(xi, alpha, grid).value


def f_value_and_grad(xi: MixtureXi, t, m, grid: GridSpec | None = None) -> tuple[float, np.ndarray]:
    """``f`` at heights ``m`` on breakpoints ``t`` and its gradient in ``m``."""
    m = np.asarray(m, dtype=float)
    if xi.is_zero:
        return 0.0, np.zeros_like(m)
    grid = default_grid(xi, grid)
    levels = make_levels(xi, t, m)
    shift = 0.5 * xi.mu(1.0).diag
    phi0, g = value_and_gradient(xi.dim, shift, levels, grid, max(xi.mu(0.0).lam_perp, 0.0))
    integrals = _interval_integrals(xi, t)
    value = phi0 + 0.5 * xi.theta(psi_embed(xi.dim, 1.0)) - 0.5 * float(np.dot(m, integrals))
    return value, g - 0.5 * integrals


# --- cascade functional ------------------------------------------------


def _cascade_levels(q: MatrixStepPath):
    """Base covariance, increments and exponents of the clock ``M = 2q``."""
    q = q.canonical()
    vals = q.values
    locs = q.breaks[1:-1]
    base = 2.0 * vals[0] if isinstance(vals[0], ExchangeableMat) else 2.0 * np.asarray(vals[0])
    incs = []
    for lo, hi in zip(vals[:-1], vals[1:]):
        d = hi - lo if isinstance(hi, ExchangeableMat) else np.asarray(hi) - np.asarray(lo)
        incs.append(2.0 * d)
    return base, incs, tuple(float(u) for u in locs), vals[-1]


def _psi_grid(q: MatrixStepPath, grid: GridSpec | None) -> float:
    base, incs, locs, top = _cascade_levels(q)
    D = q.dim
    spread = 2.0 * top.lam_perp
    grid = (grid or GridSpec()).resolve(D, spread)
    levels = [Level(u, inc) for u, inc in zip(locs, incs)]
    for lv in levels:
        psd_sqrt(lv.inc)
    phis, _, _ = backward_recursion(D, top.diag, levels, grid, keep_levels=False)
    return -gaussian_expectation(phis[0], grid, max(base.lam_perp, 0.0), grid.quad_nodes)


def _gauss_nodes_dense(cov: np.ndarray, n: int):
    """Tensor Gauss-Hermite nodes for ``N(0, cov)`` over the range of ``cov``."""
    from numpy.polynomial.hermite_e import hermegauss

    cov = 0.5 * (cov + cov.T)
    psd_sqrt(cov)  # validates
    lam, vec = np.linalg.eigh(cov)
    keep = lam > 1e-14 * max(1.0, float(lam.max(initial=0.0)))
    if not np.any(keep):
        return np.zeros((1, cov.shape[0])), np.ones(1)
    axes = vec[:, keep] * np.sqrt(lam[keep])
    z, w = hermegauss(n)
    w = w / w.sum()
    r = int(keep.sum())
    pts = np.array(list(itertools.product(z, repeat=r)))
    wt = np.prod(np.array(list(itertools.product(w, repeat=r))), axis=1)
    sel = wt > 1e-14
    return pts[sel] @ axes.T, wt[sel] / wt[sel].sum()


def _psi_quadrature(q: MatrixStepPath, n_nodes: int) -> float:
    base, incs, locs, top = _cascade_levels(q)
    D = q.dim
    dense = lambda a: a.dense() if isinstance(a, ExchangeableMat) else np.asarray(a, float)  # noqa: E731
    diag_top = np.diag(dense(top))
    rules = [_gauss_nodes_dense(dense(base), n_nodes)]
    rules += [_gauss_nodes_dense(dense(d), n_nodes) for d in incs]
    size = math.prod(len(r[1]) for r in rules)
    if size > QUADRATURE_CAP:
        raise ComputationError(
            f"nested quadrature needs {size} leaves > {QUADRATURE_CAP}; use fewer nodes or an exchangeable path"
        )

    def level(j, x):
        # value of X_j at points x (P, D); j counts cascade levels below the base
        if j == len(incs):
            return logsumexp(x - diag_top, axis=-1) - math.log(D)
        pts, wt = rules[j + 1]
        y = x[:, None, :] + pts[None, :, :]
        vals = level(j + 1, y.reshape(-1, D)).reshape(len(x), len(wt))
        u = locs[j]
        if u == 0.0:
            return vals @ wt
        return logsumexp(u * vals, b=wt[None, :], axis=1) / u

    pts, wt = rules[0]
    return -float(level(0, pts) @ wt)


def psi_of_path(q: MatrixStepPath, grid: GridSpec | None = None, method: str = "auto", n_nodes: int = 12) -> float:
    """Cascade functional ``psi(q)`` for an increasing PSD step path.

    ``method="grid"`` uses the reduced backward engine and needs exchangeable
    values with ``D <= 4``; ``"quadrature"`` nests tensor Gauss-Hermite rules
    along the cascade levels and accepts any PSD path.
    """
    if method == "auto":
        method = "grid" if q.exchangeable and q.dim in SUPPORTED_DIMS else "quadrature"
    if method == "grid":
        if not q.exchangeable:
            q = q.as_exchangeable()
        if all(v.norm() == 0.0 for v in q.values):
            return 0.0
        return _psi_grid(q, grid)
    if method == "quadrature":
        return _psi_quadrature(q, n_nodes)
    raise ValueError(f"unknown method {method!r}")


def half_grad_path(xi: MixtureXi, pi: MatrixStepPath) -> MatrixStepPath:
    """``q = grad xi(pi) / 2`` evaluated flat by flat."""
    return pi.map(lambda v: 0.5 * xi.grad(v))


def theta_integral(xi: MixtureXi, pi: MatrixStepPath) -> float:
    return pi.integral(xi.theta)


def p_functional(xi: MixtureXi, pi: MatrixStepPath, grid: GridSpec | None = None, method: str = "auto") -> float:
    """``P(pi) = -psi(grad xi(pi) / 2) + (1/2) int theta(pi)``."""
    if xi.is_zero:
        return 0.0
    q = half_grad_path(xi, pi)
    return -psi_of_path(q, grid, method) + 0.5 * theta_integral(xi, pi)


def lemma_path(alpha: StepCdf, D: int) -> MatrixStepPath:
    """``Psi o alpha^{-1}`` for a step CDF."""
    from .paths import compose_psi

    return compose_psi(alpha.inverse(), D)
