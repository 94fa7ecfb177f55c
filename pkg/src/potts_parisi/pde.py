"""Parisi PDE for step CDFs: Cole-Hopf backward recursion on a reduced grid.

For a step ``alpha`` the solution is built level by level,

    Phi_{i-1}(x) = (1/m_i) log E exp(m_i Phi_i(x + sqrt(Delta_i) z)),

with ``Delta_i = mu(t_i) - mu(t_{i-1})``.  Two exact reductions make this
cheap.  The terminal condition satisfies ``Phi(x + t 1) = Phi(x) + t``, and
every level preserves that, so ``Phi(x) = phi(V^T x) + mean(x)`` where the
columns of ``V`` span the complement of the all-ones vector; the uniform
Gaussian component integrates to the constant ``m lam_u / (2D)``.  On the
complement every increment is isotropic (``lam_perp * Id``), so the Gaussian
expectation factorizes over the axes of any orthonormal frame and is done as
successive one-dimensional Gauss-Hermite passes in log domain.  Shifted
values come from cubic Lagrange stencils on the uniform grid, with linear
extrapolation beyond the faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

from .errors import CFLError, GridError
from .model import ExchangeableMat, MixtureXi, psd_sqrt
from .paths import StepCdf

DEFAULT_POINTS = {2: 4096, 3: 512, 4: 96}
SUPPORTED_DIMS = (2, 3, 4)
MIN_EXTENT = 10.0


@dataclass(frozen=True)
class GridSpec:
    """Reduced grid ``[-extent, extent]**(D-1)`` with ``points`` nodes per axis.

    ``None`` fields are resolved per problem: ``points`` from the dimension and
    ``extent`` as ``max(10, 8 sqrt(lam_perp(mu(1)) + 1))``.  ``max_sigma`` caps the
    standard deviation of a single Gauss-Hermite pass; wider levels are split
    into equal sub-steps (exact by the semigroup property).  ``boundary_tol``
    bounds the deviation of face values from linear extrapolation over a unit
    distance.
    """

    extent: float | None = None
    points: int | None = None
    linear_boundary: bool = True
    quad_nodes: int = 20
    max_sigma: float = 0.7
    boundary_tol: float = 1e-4

    def resolve(self, D: int, spread: float) -> "GridSpec":
        if D not in SUPPORTED_DIMS:
            raise ValueError(f"dimension D={D} not supported (use one of {SUPPORTED_DIMS})")
        points = self.points if self.points is not None else DEFAULT_POINTS[D]
        extent = self.extent if self.extent is not None else max(MIN_EXTENT, 8.0 * math.sqrt(max(spread, 0.0) + 1.0))
        if not extent > 0.0:
            raise ValueError("grid extent must be positive")
        if points < 16:
            raise ValueError("grid needs at least 16 points per axis")
        if self.quad_nodes < 4:
            raise ValueError("need at least 4 quadrature nodes")
        return replace(self, extent=float(extent), points=int(points))

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.points - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.points)

    def to_dict(self) -> dict:
        return {
            "extent": self.extent,
            "points": self.points,
            "quad_nodes": self.quad_nodes,
            "max_sigma": self.max_sigma,
            "linear_boundary": self.linear_boundary,
            "boundary_tol": self.boundary_tol,
        }


@dataclass(frozen=True)
class Level:
    """One Cole-Hopf step: exponent ``m`` and PSD increment ``inc``."""

    m: float
    inc: ExchangeableMat


def reduced_frame(D: int) -> np.ndarray:
    """Orthonormal ``D x (D-1)`` Helmert basis of the complement of the ones vector."""
    V = np.zeros((D, D - 1))
    for j in range(1, D):
        V[:j, j - 1] = 1.0
        V[j, j - 1] = -float(j)
        V[:, j - 1] /= math.sqrt(j * (j + 1))
    return V


def gauss_hermite(n: int, cutoff: float = 1e-18):
    """Probabilists' Gauss-Hermite nodes and normalized weights, tiny weights dropped."""
    z, w = hermegauss(n)
    w = w / w.sum()
    keep = w > cutoff
    z, w = z[keep], w[keep]
    return z, w / w.sum()


def _cubic_weights(f):
    return (
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    )


def _pad_last(a: np.ndarray, P: int, linear: bool) -> np.ndarray:
    """Pad the last axis by ``P`` ghost nodes on each side."""
    j = np.arange(1, P + 1, dtype=float)
    lo, hi = a[..., :1], a[..., -1:]
    if linear:
        left = lo - j[::-1] * (a[..., 1:2] - lo)
        right = hi + j * (hi - a[..., -2:-1])
    else:
        left = np.repeat(lo, P, axis=-1)
        right = np.repeat(hi, P, axis=-1)
    return np.concatenate([left, a, right], axis=-1)


def _shift_plan(sigma, h, nodes):
    q = sigma * nodes / h
    base = np.floor(q).astype(int)
    return base, q - base, int(np.max(np.abs(base))) + 3


def _shifted(padded, P, b, f, n):
    c = _cubic_weights(f)
    s0 = P + b - 1
    v = c[0] * padded[..., s0 : s0 + n]
    v += c[1] * padded[..., s0 + 1 : s0 + 1 + n]
    v += c[2] * padded[..., s0 + 2 : s0 + 2 + n]
    v += c[3] * padded[..., s0 + 3 : s0 + 3 + n]
    return v


def _gh_pass(phi, m, sigma, axis, h, nodes, weights, linear):
    """Apply ``(1/m) log E exp(m phi(y + sigma z e_axis))`` along one grid axis.

    Computed as ``phi + log1p(sum_n w_n expm1(m (phi_n - phi))) / m`` so that
    small ``m`` loses no precision; ``m = 0`` is the plain expectation.
    """
    a = np.moveaxis(phi, axis, -1)
    n = a.shape[-1]
    base, frac, P = _shift_plan(sigma, h, nodes)
    padded = _pad_last(a, P, linear)
    acc = np.zeros_like(a)
    for b, f, w in zip(base, frac, weights):
        v = _shifted(padded, P, b, f, n)
        v -= a
        if m > 0.0:
            np.expm1(m * v, out=v)
        acc += w * v
    if m > 0.0:
        with np.errstate(invalid="ignore"):
            acc = np.log1p(acc) / m
    return np.moveaxis(a + acc, -1, axis)


def _unpad_adjoint(g_pad, P, n, linear):
    """Transpose of :func:`_pad_last` applied to a gradient on the padded axis."""
    g = g_pad[..., P : P + n].copy()
    j = np.arange(1, P + 1, dtype=float)
    left = g_pad[..., :P][..., ::-1]  # ghost j = 1..P
    right = g_pad[..., P + n :]
    if linear:
        g[..., 0] += left @ (1.0 + j)
        g[..., 1] -= left @ j
        g[..., -1] += right @ (1.0 + j)
        g[..., -2] -= right @ j
    else:
        g[..., 0] += left.sum(axis=-1)
        g[..., -1] += right.sum(axis=-1)
    return g


def _gh_pass_adjoint(phi, out, lam, m, sigma, axis, h, nodes, weights, linear):
    """Pull the adjoint ``lam`` of a pass output back to its input.

    Returns ``(lam_in, dJ/dm)`` for ``J = <lam, out>`` viewed as a function of
    the pass input ``phi`` and the exponent ``m``.
    """
    a = np.moveaxis(phi, axis, -1)
    o = np.moveaxis(out, axis, -1)
    la = np.moveaxis(lam, axis, -1)
    n = a.shape[-1]
    base, frac, P = _shift_plan(sigma, h, nodes)
    padded = _pad_last(a, P, linear)
    g_pad = np.zeros_like(padded)
    small = m < 1e-7
    s1 = np.zeros_like(a)
    s2 = np.zeros_like(a) if small else None
    for b, f, w in zip(base, frac, weights):
        v = _shifted(padded, P, b, f, n)
        v -= a
        if small:
            p = w
            s2 += w * v * v
        else:
            p = w * np.exp(m * (v - (o - a)))
        s1 += p * v
        c = _cubic_weights(f)
        s0 = P + b - 1
        pl = p * la
        for i in range(4):
            g_pad[..., s0 + i : s0 + i + n] += c[i] * pl
    if small:
        dout_dm = 0.5 * (s2 - s1 * s1)
    else:
        dout_dm = (s1 - (o - a)) / m
    lam_in = _unpad_adjoint(g_pad, P, n, linear)
    return np.moveaxis(lam_in, -1, axis), float(np.sum(la * dout_dm))


def _boundary_deviation(phi, h, nd):
    """Max deviation of face values from linear extrapolation over unit distance."""
    r = max(1, int(round(1.0 / h)))
    worst = 0.0
    for ax in range(nd):
        a = np.moveaxis(phi, ax, -1)
        if a.shape[-1] < 2 * r + 1:
            r = (a.shape[-1] - 1) // 2
        for face, in1, in2 in ((-1, -1 - r, -1 - 2 * r), (0, r, 2 * r)):
            dev = np.abs(a[..., face] - 2.0 * a[..., in1] + a[..., in2])
            worst = max(worst, float(dev.max()))
    return worst


def _terminal_grid(D, grid: GridSpec, shift):
    """Reduced terminal condition ``log mean_k exp((V y)_k) - shift`` on the grid."""
    V = reduced_frame(D)
    axes = [grid.axis()] * (D - 1)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    x = mesh @ V.T
    return logsumexp(x, axis=-1) - math.log(D) - shift


def terminal_condition(xi: MixtureXi, x) -> float | np.ndarray:
    """``log (1/D) sum_k exp(x_k - mu(1)_kk / 2)`` for ``x`` of shape ``(..., D)``."""
    x = np.asarray(x, dtype=float)
    shift = 0.5 * xi.mu(1.0).diag
    return logsumexp(x, axis=-1) - math.log(xi.dim) - shift


def _interp(values, grid: GridSpec, pts):
    """Tensor cubic interpolation of grid ``values`` at points ``pts`` (P, nd)."""
    pts = np.atleast_2d(pts)
    nd = values.ndim
    h, L, n = grid.spacing, grid.extent, grid.points
    if np.any(np.abs(pts) > L + 1e-12):
        raise GridError("quadrature outside grid")
    pos = (pts + L) / h
    i0 = np.clip(np.floor(pos).astype(int) - 1, 0, n - 4)
    frac = pos - i0 - 1
    wts = [np.stack(_cubic_weights(frac[:, d]), axis=-1) for d in range(nd)]
    out = np.zeros(len(pts))
    for offs in np.ndindex(*(4,) * nd):
        idx = tuple(i0[:, d] + offs[d] for d in range(nd))
        w = np.ones(len(pts))
        for d in range(nd):
            w = w * wts[d][:, offs[d]]
        out += w * values[idx]
    return out


def _interp_adjoint(shape, grid: GridSpec, pts, wt):
    """Gradient of ``sum_j wt_j interp(values, pts_j)`` with respect to ``values``."""
    pts = np.atleast_2d(pts)
    nd = len(shape)
    h, L, n = grid.spacing, grid.extent, grid.points
    pos = (pts + L) / h
    i0 = np.clip(np.floor(pos).astype(int) - 1, 0, n - 4)
    frac = pos - i0 - 1
    wts = [np.stack(_cubic_weights(frac[:, d]), axis=-1) for d in range(nd)]
    g = np.zeros(shape)
    for offs in np.ndindex(*(4,) * nd):
        idx = tuple(i0[:, d] + offs[d] for d in range(nd))
        w = wt.copy()
        for d in range(nd):
            w = w * wts[d][:, offs[d]]
        np.add.at(g, idx, w)
    return g


@dataclass
class PdeSolution:
    """Grid values of ``phi_i`` (reduced, constants folded in) at ``s = t_i``.

    ``phis[i]`` holds level ``i`` for ``i = 0..k`` (``phis[k]`` is the terminal
    condition); the full-space solution is ``phi_i(V^T x) + mean(x)``.
    """

    dim: int
    grid: GridSpec
    breaks: tuple
    levels: tuple
    phis: list
    uniform_constants: tuple
    frame: np.ndarray
    base_cov: ExchangeableMat | None = None
    max_boundary_deviation: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def reduced(self, level: int) -> np.ndarray:
        return self.phis[level]

    def value(self, level: int, x) -> np.ndarray:
        """Full-space ``Phi(t_level, x)`` for ``x`` of shape ``(..., D)``."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        y = flat @ self.frame
        vals = _interp(self.phis[level], self.grid, y) + flat.mean(axis=1)
        return vals.reshape(x.shape[:-1])

    def value_at_origin(self, level: int = 0) -> float:
        return float(_interp(self.phis[level], self.grid, np.zeros((1, self.dim - 1)))[0])


def _levels_from_alpha(xi: MixtureXi, alpha: StepCdf) -> list[Level]:
    t = np.asarray(alpha.breaks)
    lu, lp = xi.mu_eigs(t)
    lu = np.broadcast_to(lu, t.shape)
    lp = np.broadcast_to(lp, t.shape)
    out = []
    for i, m in enumerate(alpha.values):
        inc = ExchangeableMat(float(lu[i + 1] - lu[i]), float(lp[i + 1] - lp[i]), xi.dim)
        psd_sqrt(inc)  # raises NotPSDError on non-monotone clocks
        out.append(Level(float(m), inc))
    return out


def _substeps(var, grid: GridSpec):
    if var <= 0.0:
        return 0, 0.0
    n_sub = max(1, math.ceil(var / grid.max_sigma**2 - 1e-12))
    return n_sub, math.sqrt(var / n_sub)


def _boundary_allowance(term, grid: GridSpec, nd):
    allowed = grid.boundary_tol
    if nd >= 2:
        # kinks of the max-like terminal reach the faces; only excess counts
        allowed += _boundary_deviation(term, grid.spacing, nd)
    return allowed


def _check_level(phi, grid, nd, allowed):
    if not np.all(np.isfinite(phi)):
        raise GridError("non-finite values in recursion (grid extent too small?)")
    dev = _boundary_deviation(phi, grid.spacing, nd)
    if dev > allowed:
        raise GridError(
            f"grid underflow: boundary deviates from linear extrapolation by {dev:.3e} "
            f"> {allowed:.3e}; increase the grid extent"
        )
    return dev


def backward_recursion(
    D: int,
    terminal_shift: float,
    levels: Sequence[Level],
    grid: GridSpec,
    keep_levels: bool = True,
    tape: list | None = None,
) -> tuple[list, tuple, float]:
    """Run the reduced Cole-Hopf recursion from the terminal level down to level 0.

    ``levels`` are ordered by increasing time.  Returns the list of level
    grids (only level 0 is filled unless ``keep_levels``), the uniform
    constant of each level and the maximal boundary deviation.  If ``tape``
    is a list, ``(level, axis, sigma, input, output)`` of every Gauss-Hermite
    pass is appended to it.
    """
    nd = D - 1
    h = grid.spacing
    nodes, weights = gauss_hermite(grid.quad_nodes)
    phi = _terminal_grid(D, grid, terminal_shift)
    allowed = _boundary_allowance(phi, grid, nd)
    stored = [None] * (len(levels) + 1)
    stored[-1] = phi
    consts = [0.0] * len(levels)
    worst = 0.0
    for i in range(len(levels) - 1, -1, -1):
        lv = levels[i]
        n_sub, sigma = _substeps(max(lv.inc.lam_perp, 0.0), grid)
        for _ in range(n_sub):
            for ax in range(nd):
                out = _gh_pass(phi, lv.m, sigma, ax, h, nodes, weights, grid.linear_boundary)
                if tape is not None:
                    tape.append((i, ax, sigma, phi, out))
                phi = out
        consts[i] = lv.m * max(lv.inc.lam_u, 0.0) / (2.0 * D)
        phi = phi + consts[i]
        if n_sub:
            worst = max(worst, _check_level(phi, grid, nd, allowed))
        if keep_levels or i == 0:
            stored[i] = phi
    if not keep_levels and levels:
        stored[1:] = [None] * len(levels)
    return stored, tuple(consts), worst


def _gaussian_nodes(nd, var_perp, n_nodes):
    if var_perp <= 0.0:
        return np.zeros((1, nd)), np.ones(1)
    z, w = gauss_hermite(n_nodes, cutoff=1e-16)
    mesh = np.stack(np.meshgrid(*([z] * nd), indexing="ij"), axis=-1).reshape(-1, nd)
    wt = np.prod(np.stack(np.meshgrid(*([w] * nd), indexing="ij"), axis=-1).reshape(-1, nd), axis=1)
    keep = wt > 1e-16
    return math.sqrt(var_perp) * mesh[keep], wt[keep] / wt[keep].sum()


def gaussian_expectation(phi0: np.ndarray, grid: GridSpec, var_perp: float, n_nodes: int) -> float:
    """``E phi0(sqrt(var_perp) eta)`` for standard ``eta`` in ``R^{D-1}``."""
    pts, wt = _gaussian_nodes(phi0.ndim, var_perp, n_nodes)
    return float(np.sum(wt * _interp(phi0, grid, pts)))


def value_and_gradient(
    D: int, terminal_shift: float, levels: Sequence[Level], grid: GridSpec, base_var: float
) -> tuple[float, np.ndarray]:
    """``E phi_0(sqrt(base_var) eta)`` and its exact derivative in each level exponent.

    The derivative is that of the discrete scheme itself (discrete adjoint),
    so it agrees with finite differences of the computed value.
    """
    nd = D - 1
    h = grid.spacing
    nodes, weights = gauss_hermite(grid.quad_nodes)
    tape: list = []
    stored, _, _ = backward_recursion(D, terminal_shift, levels, grid, keep_levels=True, tape=tape)
    pts, wt = _gaussian_nodes(nd, base_var, grid.quad_nodes)
    value = float(np.sum(wt * _interp(stored[0], grid, pts)))
    lam = _interp_adjoint(stored[0].shape, grid, pts, wt)
    grad = np.zeros(len(levels))
    by_level: dict = {}
    for rec in tape:
        by_level.setdefault(rec[0], []).append(rec)
    for i, lv in enumerate(levels):
        # lam is the adjoint of the output of level i (i.e. of phi_{i-1})
        grad[i] += float(np.sum(lam)) * max(lv.inc.lam_u, 0.0) / (2.0 * D)
        for _, ax, sigma, phi_in, phi_out in reversed(by_level.get(i, [])):
            lam, dm = _gh_pass_adjoint(
                phi_in, phi_out, lam, lv.m, sigma, ax, h, nodes, weights, grid.linear_boundary
            )
            grad[i] += dm
    return value, grad


def default_grid(xi: MixtureXi, grid: GridSpec | None) -> GridSpec:
    grid = grid or GridSpec()
    return grid.resolve(xi.dim, xi.mu(1.0).lam_perp)


def solve_cole_hopf(
    xi: MixtureXi, alpha: StepCdf, grid: GridSpec | None = None, keep_levels: bool = True
) -> PdeSolution:
    """Solve the Parisi PDE for a step CDF by the Cole-Hopf recursion."""
    grid = default_grid(xi, grid)
    levels = _levels_from_alpha(xi, alpha)
    shift = 0.5 * xi.mu(1.0).diag
    phis, consts, dev = backward_recursion(xi.dim, shift, levels, grid, keep_levels=keep_levels)
    return PdeSolution(
        dim=xi.dim,
        grid=grid,
        breaks=alpha.breaks,
        levels=tuple(levels),
        phis=phis,
        uniform_constants=consts,
        frame=reduced_frame(xi.dim),
        base_cov=xi.mu(0.0),
        max_boundary_deviation=dev,
    )


def eval_phi0_expectation(sol: PdeSolution, xi: MixtureXi | None = None) -> float:
    """``E[Phi(0, sqrt(mu(0)) eta)]``; the uniform component has zero mean."""
    base = sol.base_cov if sol.base_cov is not None else xi.mu(0.0)
    return gaussian_expectation(sol.phis[0], sol.grid, max(base.lam_perp, 0.0), sol.grid.quad_nodes)


# --- finite-difference oracle (D = 2) -------------------------------------


def fd_oracle_solve(
    xi: MixtureXi,
    alpha: StepCdf,
    grid: GridSpec | None = None,
    cfl: float = 0.4,
    n_steps: int | None = None,
) -> PdeSolution:
    """Explicit finite differences for the reduced one-dimensional PDE (D = 2).

    In the clock ``tau = lam_perp(mu(s))`` the reduced equation reads
    ``d_tau phi + (phi'' + alpha phi'^2) / 2 = 0``; it is stepped backward with
    central differences and linear-extrapolation ghost nodes.  ``n_steps``
    fixes the total number of steps (distributed over intervals by length);
    otherwise the steps are chosen from ``cfl``.  The uniform constants are the
    same closed-form values as in the recursion.
    """
    if xi.dim != 2:
        raise ValueError("finite-difference oracle supports D = 2 only")
    grid = default_grid(xi, grid)
    h = grid.spacing
    y = grid.axis()
    levels = _levels_from_alpha(xi, alpha)
    shift = 0.5 * xi.mu(1.0).diag
    phi = _terminal_grid(2, grid, shift)
    phis = [None] * (len(levels) + 1)
    phis[-1] = phi.copy()
    total_tau = sum(max(lv.inc.lam_perp, 0.0) for lv in levels)
    consts = []
    for i in range(len(levels) - 1, -1, -1):
        lv = levels[i]
        tau = max(lv.inc.lam_perp, 0.0)
        if tau > 0.0:
            if n_steps is None:
                steps = max(1, math.ceil(tau / (cfl * h * h)))
            else:
                steps = max(1, round(n_steps * tau / total_tau))
            dt = tau / steps
            if dt > 0.5 * h * h:
                raise CFLError(f"CFL violation: dtau={dt:.3e} > h^2/2={0.5 * h * h:.3e}")
            for _ in range(steps):
                g = np.empty(len(y) + 2)
                g[1:-1] = phi
                g[0] = 2 * phi[0] - phi[1]
                g[-1] = 2 * phi[-1] - phi[-2]
                d1 = (g[2:] - g[:-2]) / (2 * h)
                d2 = (g[2:] - 2 * g[1:-1] + g[:-2]) / (h * h)
                phi = phi + 0.5 * dt * (d2 + lv.m * d1 * d1)
        c = lv.m * max(lv.inc.lam_u, 0.0) / 4.0
        phi = phi + c
        consts.append(c)
        phis[i] = phi.copy()
    consts.reverse()
    return PdeSolution(
        dim=2,
        grid=grid,
        breaks=alpha.breaks,
        levels=tuple(levels),
        phis=phis,
        uniform_constants=tuple(consts),
        frame=reduced_frame(2),
        base_cov=xi.mu(0.0),
        extra={"method": "fd"},
    )
