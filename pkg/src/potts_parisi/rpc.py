"""Monte Carlo estimates of psi(q) and P(pi) from finite Ruelle cascades.

Each tree node carries the largest atoms of a Poisson-Dirichlet point
process, generated from unit-rate arrival times ``u_1 < u_2 < ...`` with raw
weights ``u_i**(-1/zeta)``.  The atoms beyond the last generated one are not
dropped: their expected raw mass ``zeta/(1-zeta) u_n**(1-1/zeta)`` is added to
the node's normalizer and credited with the sample mean of the generated
children.  Atom counts shrink with the cumulative weight of a node, so the
deep levels stay affordable; every node keeps at least ``min_atoms``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import LocationMismatchError
from .model import ExchangeableMat, MixtureXi, psd_sqrt
from .paths import MatrixStepPath

LOCATION_TOL = 1e-12


@dataclass(frozen=True)
class CascadeSpec:
    zetas: tuple
    atoms: int = 10_000
    replicas: int = 200
    min_atoms: int = 16

    def __post_init__(self):
        z = tuple(float(v) for v in self.zetas)
        if any(not 0.0 < v < 1.0 for v in z) or any(b <= a for a, b in zip(z, z[1:])):
            raise ValueError("cascade parameters must be strictly increasing in (0, 1)")
        if self.atoms < 100:
            raise ValueError("need at least 100 atoms per node")
        if self.replicas < 1 or self.min_atoms < 1:
            raise ValueError("replicas and min_atoms must be positive")
        object.__setattr__(self, "zetas", z)

    @property
    def levels(self) -> int:
        return len(self.zetas)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    replicas: int
    seed: int
    atoms: int = 0
    tail_mass: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "se": self.std_error,
            "replicas": self.replicas,
            "M": self.atoms,
            "seed": self.seed,
            "tail_mass": self.tail_mass,
        }


@dataclass
class CascadeLevel:
    parent: np.ndarray  # index of the parent node in the previous level
    log_weight: np.ndarray  # log of weight normalized within the parent (tail included)
    log_tail: np.ndarray  # per parent: log of the normalized tail mass
    parent_log_mass: np.ndarray  # per parent: log of its cumulative weight


@dataclass
class WeightTree:
    levels: list

    def leaf_weights(self, renormalize: bool = True) -> np.ndarray:
        """Products of normalized weights down the tree.

        Without ``renormalize`` the weights sum to ``1 - tail_mass()``.
        """
        logw = np.zeros(1)
        for lv in self.levels:
            logw = logw[lv.parent] + lv.log_weight
        return np.exp(logw - logsumexp(logw)) if renormalize else np.exp(logw)

    def tail_mass(self) -> float:
        """Total weight carried by the tail corrections, summed over levels."""
        return float(sum(np.exp(lv.parent_log_mass + lv.log_tail).sum() for lv in self.levels))

    @property
    def n_leaves(self) -> int:
        return len(self.levels[-1].parent) if self.levels else 1


def _segment_starts(counts):
    return np.concatenate([[0], np.cumsum(counts)[:-1]])


def _children(rng, zeta, cum_logw, spec: CascadeSpec):
    """Atoms below every node of the current level."""
    cum_w = np.exp(cum_logw)
    counts = np.clip(np.ceil(spec.atoms * cum_w), spec.min_atoms, spec.atoms).astype(int)
    parent = np.repeat(np.arange(len(counts)), counts)
    starts = _segment_starts(counts)
    gaps = rng.standard_exponential(int(counts.sum()))
    csum = np.cumsum(gaps)
    offset = np.repeat(csum[starts] - gaps[starts], counts)
    u = csum - offset
    log_raw = -np.log(u) / zeta
    last = u[starts + counts - 1]
    log_tail_raw = math.log(zeta / (1.0 - zeta)) + (1.0 - 1.0 / zeta) * np.log(last)
    seg_max = np.maximum.reduceat(log_raw, starts)
    seg_sum = np.add.reduceat(np.exp(log_raw - seg_max[parent]), starts)
    log_norm = np.logaddexp(np.log(seg_sum) + seg_max, log_tail_raw)
    return CascadeLevel(parent, log_raw - log_norm[parent], log_tail_raw - log_norm, cum_logw)


def sample_cascade(spec: CascadeSpec, rng: np.random.Generator) -> WeightTree:
    """Draw the weight tree of a depth-``len(zetas)`` cascade."""
    levels = []
    cum = np.zeros(1)
    for zeta in spec.zetas:
        lv = _children(rng, zeta, cum, spec)
        levels.append(lv)
        cum = cum[lv.parent] + lv.log_weight
    return WeightTree(levels)


def _dense(a):
    return a.dense() if isinstance(a, ExchangeableMat) else np.asarray(a, float)


def _path_data(q: MatrixStepPath):
    q = q.canonical()
    vals = [_dense(v) for v in q.values]
    roots = [np.asarray(psd_sqrt(2.0 * vals[0]))]
    roots += [np.asarray(psd_sqrt(2.0 * (b - a))) for a, b in zip(vals[:-1], vals[1:])]
    return q.breaks[1:-1], roots, np.diag(vals[-1])


def _replica_value(rng, spec, roots, diag_top):
    D = len(diag_top)
    tree = sample_cascade(spec, rng)
    x = (roots[0] @ rng.standard_normal(D))[None, :]
    # a common uniform shift adds its (mean-zero) size to log Z; drop it exactly
    x = x - x.mean()
    for lv, root in zip(tree.levels, roots[1:]):
        x = x[lv.parent] + rng.standard_normal((len(lv.parent), D)) @ root.T
    logy = logsumexp(x - diag_top, axis=1) - math.log(D)
    for lv in reversed(tree.levels):
        starts = _segment_starts(np.bincount(lv.parent))
        counts = np.diff(np.append(starts, len(lv.parent)))
        terms = lv.log_weight + logy
        seg_max = np.maximum.reduceat(terms, starts)
        s = np.add.reduceat(np.exp(terms - seg_max[lv.parent]), starts)
        head = np.log(s) + seg_max
        my = np.maximum.reduceat(logy, starts)
        mean_y = np.log(np.add.reduceat(np.exp(logy - my[lv.parent]), starts) / counts) + my
        logy = np.logaddexp(head, lv.log_tail + mean_y)
    return float(logy[0]), tree.tail_mass()


def mc_psi(q: MatrixStepPath, spec: CascadeSpec, seed: int = 0) -> McEstimate:
    """Estimate ``psi(q) = -E log int int exp(sqrt(2) w.tau - q(1).tau tau^T)``."""
    locs, roots, diag_top = _path_data(q)
    if len(locs) != spec.levels or any(abs(a - b) > LOCATION_TOL for a, b in zip(locs, spec.zetas)):
        raise LocationMismatchError(
            f"location mismatch: path jumps at {list(locs)}, cascade levels {list(spec.zetas)}"
        )
    vals = np.empty(spec.replicas)
    tail = 0.0
    for r in range(spec.replicas):
        rng = np.random.default_rng([seed, r])
        vals[r], t = _replica_value(rng, spec, roots, diag_top)
        tail = max(tail, t)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return McEstimate(-float(vals.mean()), se, spec.replicas, seed, spec.atoms, tail)


def spec_for_path(q: MatrixStepPath, **kwargs) -> CascadeSpec:
    """Cascade spec whose levels are the jump locations of ``q``."""
    return CascadeSpec(tuple(q.canonical().breaks[1:-1]), **kwargs)


def mc_p_functional(xi: MixtureXi, pi: MatrixStepPath, spec: CascadeSpec, seed: int = 0) -> McEstimate:
    """Estimate ``P(pi) = -psi(grad xi(pi) / 2) + (1/2) int theta(pi)``."""
    if xi.is_zero:
        return McEstimate(0.0, 0.0, spec.replicas, seed, spec.atoms, 0.0)
    q = pi.map(lambda v: 0.5 * xi.grad(v))
    est = mc_psi(q, spec, seed)
    exact = 0.5 * pi.integral(xi.theta)
    return McEstimate(-est.mean + exact, est.std_error, est.replicas, seed, est.atoms, est.tail_mass)
