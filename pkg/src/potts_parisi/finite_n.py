"""Finite-N free energy by exact enumeration of all colorings.

The disorder is one i.i.d. standard Gaussian tensor ``g^(p)`` of shape
``(N,)*p`` per active order ``p``.  With color indicators ``x_k(i) = 1{c_i = k}``,

    H(c) = sum_p beta_p N^{-(p-1)/2} sum_k g^(p)[x_k, ..., x_k],

whose covariance is ``N xi(sigma sigma'^T / N)`` exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import StateSpaceTooLargeError
from .model import MixtureXi

MAX_STATES = 2**22
CHUNK = 1 << 14


@dataclass(frozen=True)
class DisorderSample:
    N: int
    D: int
    couplings: dict  # p -> ndarray of shape (N,)*p
    seed: int | None = None

    @classmethod
    def draw(cls, xi: MixtureXi, N: int, rng_or_seed) -> "DisorderSample":
        if N < 1:
            raise ValueError("N must be >= 1")
        seed = rng_or_seed if isinstance(rng_or_seed, (int, np.integer)) else None
        rng = np.random.default_rng(rng_or_seed)
        couplings = {p: rng.standard_normal((N,) * p) for p in xi.betas}
        return cls(N, xi.dim, couplings, None if seed is None else int(seed))


def _energies(sample: DisorderSample, xi: MixtureXi, onehot: np.ndarray) -> np.ndarray:
    """Energies for colorings given as indicators of shape ``(n_conf, D, N)``."""
    N = sample.N
    H = np.zeros(onehot.shape[0])
    for p, beta in xi.betas.items():
        g = sample.couplings[p]
        # contract the tensor with x_k in every slot
        t = np.tensordot(onehot, g, axes=([2], [0]))  # (n, D, N, ..., N)
        for _ in range(p - 1):
            t = np.einsum("cki,cki...->ck...", onehot, t)
        H += beta * N ** (-(p - 1) / 2) * t.sum(axis=1)
    return H


def hamiltonian(sample: DisorderSample, xi: MixtureXi, colors) -> float:
    """Energy of one coloring with labels in ``0..D-1``."""
    colors = np.asarray(colors, dtype=int)
    if colors.shape != (sample.N,) or np.any(colors < 0) or np.any(colors >= sample.D):
        raise ValueError(f"colors must be {sample.N} labels in 0..{sample.D - 1}")
    onehot = (colors[None, None, :] == np.arange(sample.D)[None, :, None]).astype(float)
    return float(_energies(sample, xi, onehot)[0])


def self_overlap_xi(xi: MixtureXi, counts: np.ndarray, N: int) -> np.ndarray:
    """``xi(sigma sigma^T / N)`` from color counts of shape ``(n_conf, D)``."""
    freq = counts / N
    return sum(b * b * np.sum(freq**p, axis=1) for p, b in xi.betas.items()) if xi.betas else np.zeros(len(counts))


def _enumerate(sample: DisorderSample, xi: MixtureXi) -> tuple[float, float]:
    """Free energy and the uniform mean energy ``D^{-N} sum_c H(c)``."""
    N, D = sample.N, sample.D
    n_states = D**N
    if n_states > MAX_STATES:
        raise StateSpaceTooLargeError(f"state space too large: {D}^{N} > {MAX_STATES}")
    if xi.is_zero:
        return 0.0, 0.0
    labels = np.arange(D)
    parts = []
    h_sum = 0.0
    all_colorings = itertools.product(range(D), repeat=N)
    while True:
        block = np.array(list(itertools.islice(all_colorings, CHUNK)), dtype=int)
        if block.size == 0:
            break
        onehot = (block[:, None, :] == labels[None, :, None]).astype(float)
        H = _energies(sample, xi, onehot)
        h_sum += float(H.sum())
        counts = onehot.sum(axis=2)
        parts.append(logsumexp(H - 0.5 * N * self_overlap_xi(xi, counts, N)))
    return float((logsumexp(parts) - N * math.log(D)) / N), h_sum / n_states


def free_energy_exact(sample: DisorderSample, xi: MixtureXi) -> float:
    """``(1/N) log D^{-N} sum_c exp(H(c) - (N/2) xi(self-overlap))``."""
    return _enumerate(sample, xi)[0]


@dataclass(frozen=True)
class FreeEnergyEstimate:
    N: int
    D: int
    samples: int
    mean: float
    std_error: float
    seed: int

    def to_dict(self) -> dict:
        return {"N": self.N, "D": self.D, "samples": self.samples, "mean": self.mean, "se": self.std_error, "seed": self.seed}


def estimate_FN(
    xi: MixtureXi, N: int, n_samples: int, seed: int = 0, control_variate: bool = True
) -> FreeEnergyEstimate:
    """Quenched mean of ``free_energy_exact`` over independent disorder samples.

    With ``control_variate`` the uniform mean energy ``D^{-N} sum_c H(c)``,
    which is linear in the couplings and has mean zero, is subtracted (divided
    by ``N``) sample by sample; the expectation is unchanged and the variance
    drops sharply at high temperature.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    vals = np.empty(n_samples)
    for i in range(n_samples):
        sample = DisorderSample.draw(xi, N, np.random.default_rng([seed, N, i]))
        f, h_mean = _enumerate(sample, xi)
        vals[i] = f - h_mean / N if control_variate else f
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return FreeEnergyEstimate(N, xi.dim, n_samples, float(vals.mean()), se, seed)
