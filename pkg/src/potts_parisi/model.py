"""Interaction function, overlap embedding and exchangeable-matrix algebra.

The interaction is a finite mixture

    xi(a) = sum_p beta_p**2 * sum_{k,k'} a[k, k']**p,

and every matrix that the solver manipulates along the symmetric family of
overlaps is *exchangeable*: constant diagonal, constant off-diagonal.  Such a
matrix is ``lam_u * P_u + lam_perp * P_perp`` where ``P_u`` projects onto the
all-ones direction and ``P_perp`` onto its complement, so it is stored through
its two eigenvalues.  Sums, differences and square roots are then exact in
the eigenvalues, which keeps the exactly-singular increments of the quadratic
model exactly singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .errors import NotPSDError

PSD_TOL = 1e-12


@dataclass(frozen=True)
class ExchangeableMat:
    """Matrix ``diag * Id + off * (ones - Id)`` of size ``dim`` stored by eigenvalues."""

    lam_u: float
    lam_perp: float
    dim: int

    @classmethod
    def from_entries(cls, diag: float, off: float, dim: int) -> "ExchangeableMat":
        return cls(diag + (dim - 1) * off, diag - off, dim)

    @classmethod
    def from_dense(cls, a, tol: float = 1e-12) -> "ExchangeableMat":
        a = np.asarray(a, dtype=float)
        dim = a.shape[0]
        diag = float(np.mean(np.diag(a)))
        mask = ~np.eye(dim, dtype=bool)
        off = float(np.mean(a[mask]))
        if np.max(np.abs(a - (off + (diag - off) * np.eye(dim)))) > tol:
            raise ValueError("matrix is not exchangeable")
        return cls.from_entries(diag, off, dim)

    @classmethod
    def zeros(cls, dim: int) -> "ExchangeableMat":
        return cls(0.0, 0.0, dim)

    @property
    def diag(self) -> float:
        return (self.lam_u + (self.dim - 1) * self.lam_perp) / self.dim

    @property
    def off(self) -> float:
        return (self.lam_u - self.lam_perp) / self.dim

    def dense(self) -> np.ndarray:
        d = self.dim
        return self.off * np.ones((d, d)) + (self.diag - self.off) * np.eye(d)

    def trace(self) -> float:
        return self.lam_u + (self.dim - 1) * self.lam_perp

    def dot(self, other: "ExchangeableMat") -> float:
        """Entrywise (Frobenius) inner product."""
        return self.lam_u * other.lam_u + (self.dim - 1) * self.lam_perp * other.lam_perp

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def power(self, p: int) -> "ExchangeableMat":
        """Entrywise power."""
        return ExchangeableMat.from_entries(self.diag**p, self.off**p, self.dim)

    def __add__(self, other: "ExchangeableMat") -> "ExchangeableMat":
        return ExchangeableMat(self.lam_u + other.lam_u, self.lam_perp + other.lam_perp, self.dim)

    def __sub__(self, other: "ExchangeableMat") -> "ExchangeableMat":
        return ExchangeableMat(self.lam_u - other.lam_u, self.lam_perp - other.lam_perp, self.dim)

    def __mul__(self, c: float) -> "ExchangeableMat":
        return ExchangeableMat(c * self.lam_u, c * self.lam_perp, self.dim)

    __rmul__ = __mul__

    def __neg__(self) -> "ExchangeableMat":
        return self * -1.0


Matrix = Union[ExchangeableMat, np.ndarray]


@dataclass(frozen=True)
class MixtureXi:
    """Mixed-p interaction on ``dim x dim`` overlaps.

    ``betas`` maps the order ``p >= 2`` to a nonnegative inverse temperature
    ``beta_p``; the coefficient entering ``xi`` is ``beta_p**2``.
    """

    dim: int
    betas: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dim}")
        clean = {}
        for p, b in dict(self.betas).items():
            p = int(p)
            b = float(b)
            if p < 2:
                raise ValueError(f"interaction order must be >= 2, got {p}")
            if not b >= 0.0 or not math.isfinite(b):
                raise ValueError(f"beta_{p} must be finite and nonnegative, got {b}")
            if b > 0.0:
                clean[p] = b
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "betas", dict(sorted(clean.items())))

    @classmethod
    def from_dict(cls, data: Mapping) -> "MixtureXi":
        return cls(int(data["D"]), {int(p): float(b) for p, b in data.get("betas", {}).items()})

    def to_dict(self) -> dict:
        return {"D": self.dim, "betas": {str(p): b for p, b in self.betas.items()}}

    @property
    def is_zero(self) -> bool:
        return not self.betas

    @property
    def is_quadratic(self) -> bool:
        """True for ``xi(a) = beta**2 |a|**2`` with ``beta > 0``."""
        return list(self.betas) == [2]

    @property
    def max_order(self) -> int:
        return max(self.betas, default=2)

    # --- evaluation -------------------------------------------------

    def xi(self, a: Matrix) -> float:
        if isinstance(a, ExchangeableMat):
            d = a.dim
            return sum(
                b * b * (d * a.diag**p + d * (d - 1) * a.off**p) for p, b in self.betas.items()
            )
        a = np.asarray(a, dtype=float)
        return float(sum(b * b * np.sum(a**p) for p, b in self.betas.items()))

    def grad(self, a: Matrix) -> Matrix:
        if isinstance(a, ExchangeableMat):
            out = ExchangeableMat.zeros(a.dim)
            for p, b in self.betas.items():
                if p == 2:
                    # linear term; keeps eigenvalues exact
                    out = out + (2.0 * b * b) * a
                else:
                    out = out + (p * b * b) * a.power(p - 1)
            return out
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for p, b in self.betas.items():
            out += p * b * b * a ** (p - 1)
        return out

    def theta(self, a: Matrix) -> float:
        # a . grad(a) - xi(a) = sum_p (p - 1) beta_p^2 sum a^p
        if isinstance(a, ExchangeableMat):
            d = a.dim
            return sum(
                (p - 1) * b * b * (d * a.diag**p + d * (d - 1) * a.off**p)
                for p, b in self.betas.items()
            )
        a = np.asarray(a, dtype=float)
        return float(sum((p - 1) * b * b * np.sum(a**p) for p, b in self.betas.items()))

    def mu(self, s: float) -> ExchangeableMat:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"overlap parameter {s} outside [0, 1]")
        lam_u, lam_perp = self.mu_eigs(s)
        return ExchangeableMat(float(lam_u), float(lam_perp), self.dim)

    def mu_dot(self, s: float) -> ExchangeableMat:
        lam_u, lam_perp = self.mu_dot_eigs(s)
        return ExchangeableMat(float(lam_u), float(lam_perp), self.dim)

    # Vectorized helpers over an array of s values.

    def mu_eigs(self, s):
        """Eigenvalues ``(lam_u, lam_perp)`` of ``mu(s)`` for array ``s``."""
        s = np.asarray(s, dtype=float)
        D = self.dim
        d, o = _psi_entries(D, s)
        lam_u = np.zeros_like(s)
        lam_perp = np.zeros_like(s)
        for p, b in self.betas.items():
            c = p * b * b
            if p == 2:
                lam_u = lam_u + c / D
                lam_perp = lam_perp + c * s / D
            else:
                lam_u = lam_u + c * (d ** (p - 1) + (D - 1) * o ** (p - 1))
                lam_perp = lam_perp + c * (d ** (p - 1) - o ** (p - 1))
        return lam_u, lam_perp

    def mu_dot_eigs(self, s):
        """Eigenvalues of the exact s-derivative of ``mu`` for array ``s``."""
        s = np.asarray(s, dtype=float)
        D = self.dim
        d, o = _psi_entries(D, s)
        dd = (D - 1) / D**2  # d'(s)
        do = -1.0 / D**2  # o'(s)
        lam_u = np.zeros_like(s)
        lam_perp = np.zeros_like(s)
        for p, b in self.betas.items():
            c = p * (p - 1) * b * b
            if p == 2:
                lam_perp = lam_perp + c / D
            else:
                # diag' = c d^{p-2} dd, off' = c o^{p-2} do
                lam_u = lam_u + c * dd * (d ** (p - 2) - o ** (p - 2))
                lam_perp = lam_perp + c * (d ** (p - 2) * dd - o ** (p - 2) * do)
        return lam_u, lam_perp

    def psi_dot_mu_dot(self, s):
        """Integrand ``Psi(s) . mu_dot(s)`` for array ``s``."""
        s = np.asarray(s, dtype=float)
        D = self.dim
        mu_u, mu_p = self.mu_dot_eigs(s)
        # Psi(s) has eigenvalues (1/D, s/D)
        return mu_u / D + (D - 1) * mu_p * s / D


def _psi_entries(D, s):
    off = (1.0 - s) / D**2
    return s / D + off, off


# --- module-level operations ------------------------------------------


def xi_eval(xi: MixtureXi, a: Matrix) -> float:
    return xi.xi(a)


def grad_xi(xi: MixtureXi, a: Matrix) -> Matrix:
    return xi.grad(a)


def theta_eval(xi: MixtureXi, a: Matrix) -> float:
    return xi.theta(a)


def psi_embed(D: int, s: float) -> ExchangeableMat:
    """Symmetric overlap ``(s/D) Id + ((1 - s)/D**2) ones``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"overlap parameter {s} outside [0, 1]")
    return ExchangeableMat(1.0 / D, s / D, D)


def overlap_parameter(a: Matrix) -> float:
    """Inverse of :func:`psi_embed`: ``(D tr(a) - 1) / (D - 1)``."""
    if isinstance(a, ExchangeableMat):
        D, tr = a.dim, a.trace()
    else:
        a = np.asarray(a, dtype=float)
        D, tr = a.shape[0], float(np.trace(a))
    return (D * tr - 1.0) / (D - 1.0)


def mu_eval(xi: MixtureXi, s: float) -> ExchangeableMat:
    return xi.mu(s)


def mu_dot(xi: MixtureXi, s: float) -> ExchangeableMat:
    return xi.mu_dot(s)


def perm_eig(m: ExchangeableMat) -> tuple[float, float]:
    return m.lam_u, m.lam_perp


def psd_sqrt(m: Matrix, tol: float = PSD_TOL) -> Matrix:
    """Principal square root of a PSD matrix; tiny negative eigenvalues are clamped.

    Raises NotPSDError when an eigenvalue is below ``-tol``.
    """
    if isinstance(m, ExchangeableMat):
        lu, lp = m.lam_u, m.lam_perp
        if lu < -tol or lp < -tol:
            raise NotPSDError(f"increment not PSD (eigenvalues {lu:.3e}, {lp:.3e})")
        return ExchangeableMat(math.sqrt(max(lu, 0.0)), math.sqrt(max(lp, 0.0)), m.dim)
    a = np.asarray(m, dtype=float)
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    if w.min() < -tol:
        raise NotPSDError(f"increment not PSD (min eigenvalue {w.min():.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass(frozen=True)
class Condition1Report:
    holds: bool
    min_lambda_u: float
    min_lambda_perp: float
    argmin_s: float
    n_grid: int


def check_condition_1(xi: MixtureXi, n_grid: int = 1000) -> Condition1Report:
    """Check positive definiteness of ``mu_dot`` on the midpoints of a uniform s-grid.

    Midpoints are used because the condition is required only almost
    everywhere; for pure cubic terms ``lam_u`` vanishes at ``s = 0`` alone.
    """
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    s = (np.arange(n_grid) + 0.5) / n_grid
    lam_u, lam_perp = xi.mu_dot_eigs(s)
    lam_u = np.broadcast_to(lam_u, s.shape)
    lam_perp = np.broadcast_to(lam_perp, s.shape)
    worst = np.minimum(lam_u, lam_perp)
    i = int(np.argmin(worst))
    return Condition1Report(
        holds=bool(np.all(lam_u > 0.0) and np.all(lam_perp > 0.0)),
        min_lambda_u=float(lam_u.min()),
        min_lambda_perp=float(lam_perp.min()),
        argmin_s=float(s[i]),
        n_grid=n_grid,
    )


@dataclass(frozen=True)
class ConvexityReport:
    max_violation: float
    n_violations: int
    trials: int
    seed: int
    tol: float
    ensemble: str = "psd"

    @property
    def convex(self) -> bool:
        return self.n_violations == 0


ENSEMBLES = ("psd", "nonnegative")


def _random_psd(rng, D, ensemble):
    g = rng.standard_normal((D, D))
    if ensemble == "nonnegative":
        # PSD with nonnegative entries, the cone holding Potts overlaps
        g = np.abs(g)
    return g @ g.T / D


def check_convexity_sample(
    xi: MixtureXi,
    trials: int = 10_000,
    rng_seed: int = 0,
    tol: float = 1e-10,
    ensemble: str = "psd",
) -> ConvexityReport:
    """Sample the convexity inequality of ``xi`` on random PSD pairs.

    ``ensemble="psd"`` draws Wishart matrices (the whole PSD cone);
    ``"nonnegative"`` restricts to PSD matrices with nonnegative entries.
    Odd-order terms are convex on the latter but not on the former.
    The recorded violation is ``xi(l a + (1-l) b) - l xi(a) - (1-l) xi(b)``
    relative to ``max(1, xi(a), xi(b))``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if ensemble not in ENSEMBLES:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    rng = np.random.default_rng(rng_seed)
    D = xi.dim
    worst = 0.0
    count = 0
    for _ in range(trials):
        a = _random_psd(rng, D, ensemble)
        b = _random_psd(rng, D, ensemble)
        lam = rng.uniform()
        gap = xi.xi(lam * a + (1 - lam) * b) - lam * xi.xi(a) - (1 - lam) * xi.xi(b)
        v = gap / max(1.0, abs(xi.xi(a)), abs(xi.xi(b)))
        worst = max(worst, v)
        if v > tol:
            count += 1
    return ConvexityReport(float(worst), count, trials, rng_seed, tol, ensemble)
