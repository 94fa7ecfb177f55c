"""Step CDFs on [0, 1], their left-continuous inverses, and matrix step paths.

All step functions here use the convention ``f(s) = values[i]`` for
``s in (breaks[i], breaks[i+1]]`` and are treated as classes of functions
agreeing almost everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidPathError, NotPSDError
from .model import PSD_TOL, ExchangeableMat, Matrix, psi_embed

MERGE_TOL = 1e-14


def _validate(breaks, values, what):
    breaks = np.asarray(breaks, dtype=float).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if len(breaks) != len(values) + 1 or len(values) < 1:
        raise InvalidPathError(
            f"{what}: need len(breakpoints) == len(heights) + 1 >= 2, "
            f"got {len(breaks)} and {len(values)}"
        )
    if not (np.all(np.isfinite(breaks)) and np.all(np.isfinite(values))):
        raise InvalidPathError(f"{what}: value outside [0,1]")
    if breaks[0] != 0.0 or breaks[-1] != 1.0:
        raise InvalidPathError(f"{what}: breakpoints must start at 0 and end at 1")
    if np.any(np.diff(breaks) <= 0.0):
        raise InvalidPathError(f"{what}: breakpoints not strictly increasing")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise InvalidPathError(f"{what}: value outside [0,1]")
    if np.any(np.diff(values) < 0.0):
        raise InvalidPathError(f"{what}: non-monotone heights")
    return breaks, values


def _canonical(breaks, values):
    keep = [0]
    for i in range(1, len(values)):
        if values[i] - values[keep[-1]] > MERGE_TOL:
            keep.append(i)
    new_breaks = [0.0] + [float(breaks[j]) for j in keep[1:]] + [1.0]
    return tuple(new_breaks), tuple(float(values[j]) for j in keep)


def _left_inverse(breaks, values):
    """Left-continuous inverse of a nondecreasing step function into [0, 1]."""
    ext = [0.0, *values, 1.0]
    uppers, vals = [], []
    for j in range(len(values) + 1):
        if ext[j + 1] - ext[j] > MERGE_TOL:
            uppers.append(ext[j + 1])
            vals.append(breaks[j])
    uppers[-1] = 1.0
    return (0.0, *uppers), tuple(vals)


class _StepFunction:
    breaks: tuple
    values: tuple

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.breaks)

    @property
    def m(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def n_steps(self) -> int:
        return len(self.values)

    def widths(self) -> np.ndarray:
        return np.diff(self.breaks)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breaks, s, side="left") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def refine(self, extra: Sequence[float]):
        """Same function with additional (redundant) breakpoints; not canonicalized."""
        pts = sorted(set(self.breaks) | {float(x) for x in extra if 0.0 < x < 1.0})
        mids = 0.5 * (np.asarray(pts[1:]) + np.asarray(pts[:-1]))
        return type(self)._raw(tuple(pts), tuple(float(v) for v in self(mids)))

    def canonical(self):
        """Merged representation: equal consecutive values share one step."""
        return type(self)(self.breaks, self.values)

    @classmethod
    def _raw(cls, breaks, values):
        obj = cls.__new__(cls)
        object.__setattr__(obj, "breaks", tuple(breaks))
        object.__setattr__(obj, "values", tuple(values))
        return obj

    def to_dict(self) -> dict:
        return {"t": list(self.breaks), "m": list(self.values)}

    def __eq__(self, other):
        return type(self) is type(other) and self.breaks == other.breaks and self.values == other.values

    def __hash__(self):
        return hash((type(self).__name__, self.breaks, self.values))

    def __repr__(self):
        return f"{type(self).__name__}(t={list(self.breaks)}, m={list(self.values)})"


@dataclass(frozen=True, eq=False, repr=False)
class StepCdf(_StepFunction):
    """Finitely-stepped CDF on [0, 1].

    ``alpha(s) = m[i]`` on ``(t[i], t[i+1]]``; the point values ``alpha(0) = 0``
    and ``alpha(1) = 1`` are pinned but carry no weight.  Heights below 1 are
    allowed and mean an implicit jump to 1 at ``s = 1``.
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b, v = _canonical(*_validate(self.breaks, self.values, "step CDF"))
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dict(cls, data) -> "StepCdf":
        return make_step_cdf(data["t"], data["m"])

    def at(self, s: float) -> float:
        """Pointwise value including the pinned endpoints."""
        if s <= 0.0:
            return 0.0
        if s >= 1.0:
            return 1.0
        return float(self(s))

    def inverse(self) -> "StepQuantile":
        return quantile_inverse(self)


@dataclass(frozen=True, eq=False, repr=False)
class StepQuantile(_StepFunction):
    """Left-continuous nondecreasing step function ``[0, 1] -> [0, 1]``.

    ``zeta(u) = values[j]`` on ``(breaks[j], breaks[j+1]]``.
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b, v = _canonical(*_validate(self.breaks, self.values, "step quantile"))
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def inverse(self) -> StepCdf:
        return StepCdf(*_left_inverse(self.breaks, self.values))


def make_step_cdf(breakpoints, heights) -> StepCdf:
    return StepCdf(tuple(np.asarray(breakpoints, float)), tuple(np.asarray(heights, float)))


def _merged_grid(a: _StepFunction, b: _StepFunction):
    pts = np.union1d(a.breaks, b.breaks)
    mids = 0.5 * (pts[1:] + pts[:-1])
    return np.diff(pts), mids


def l1_distance(a: _StepFunction, b: _StepFunction) -> float:
    """Exact ``int_0^1 |a(s) - b(s)| ds``."""
    w, mids = _merged_grid(a, b)
    return float(np.sum(w * np.abs(a(mids) - b(mids))))


def quantile_inverse(alpha: StepCdf) -> StepQuantile:
    """``alpha^{-1}(u) = inf{t : u <= alpha(t)}`` as a step quantile.

    A flat of ``alpha`` at height ``m`` becomes a jump of the quantile at ``u = m``
    and a jump of ``alpha`` at ``t`` becomes a flat of the quantile at value ``t``.
    """
    return StepQuantile(*_left_inverse(alpha.breaks, alpha.values))


@dataclass(frozen=True)
class MatrixStepPath:
    """Increasing PSD-valued step path ``pi(u) = values[j]`` on ``(breaks[j], breaks[j+1]]``."""

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        vals = tuple(v if isinstance(v, ExchangeableMat) else np.asarray(v, float) for v in self.values)
        if len(b) != len(vals) + 1 or not vals:
            raise InvalidPathError("matrix path: need len(breakpoints) == len(values) + 1 >= 2")
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0.0):
            raise InvalidPathError("matrix path: breakpoints not strictly increasing on [0, 1]")
        if _min_eig(vals[0]) < -PSD_TOL:
            raise NotPSDError("matrix path: value not PSD")
        for lo, hi in zip(vals[:-1], vals[1:]):
            if _min_eig(_sub(hi, lo)) < -PSD_TOL:
                raise NotPSDError("matrix path: increment not PSD")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        v = self.values[0]
        return v.dim if isinstance(v, ExchangeableMat) else v.shape[0]

    @property
    def exchangeable(self) -> bool:
        return all(isinstance(v, ExchangeableMat) for v in self.values)

    def as_exchangeable(self, tol: float = 1e-12) -> "MatrixStepPath":
        """Convert dense exchangeable values; raises ValueError otherwise."""
        vals = [v if isinstance(v, ExchangeableMat) else ExchangeableMat.from_dense(v, tol) for v in self.values]
        return MatrixStepPath(self.breaks, tuple(vals))

    def map(self, fn) -> "MatrixStepPath":
        return MatrixStepPath(self.breaks, tuple(fn(v) for v in self.values))

    def canonical(self, tol: float = 1e-14) -> "MatrixStepPath":
        """Merge adjacent flats with equal values."""
        keep = [0]
        for j in range(1, len(self.values)):
            if _max_abs(_sub(self.values[j], self.values[keep[-1]])) > tol:
                keep.append(j)
        b = (0.0, *[self.breaks[j] for j in keep[1:]], 1.0)
        return MatrixStepPath(b, tuple(self.values[j] for j in keep))

    def jump_locations(self) -> tuple:
        return self.canonical().breaks[1:-1]

    def value_at(self, u: float):
        j = int(np.clip(np.searchsorted(self.breaks, u, side="left") - 1, 0, len(self.values) - 1))
        return self.values[j]

    def integral(self, fn) -> float:
        """``int_0^1 fn(pi(u)) du`` as an exact step sum."""
        return float(sum(w * fn(v) for w, v in zip(np.diff(self.breaks), self.values)))


def _sub(a: Matrix, b: Matrix) -> Matrix:
    if isinstance(a, ExchangeableMat) and isinstance(b, ExchangeableMat):
        return a - b
    return _dense(a) - _dense(b)


def _dense(a: Matrix) -> np.ndarray:
    return a.dense() if isinstance(a, ExchangeableMat) else np.asarray(a, float)


def _min_eig(a: Matrix) -> float:
    if isinstance(a, ExchangeableMat):
        return min(a.lam_u, a.lam_perp)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T)).min())


def _max_abs(a: Matrix) -> float:
    if isinstance(a, ExchangeableMat):
        return max(abs(a.lam_u), abs(a.lam_perp))
    return float(np.max(np.abs(a)))


def frobenius(a: Matrix) -> float:
    return a.norm() if isinstance(a, ExchangeableMat) else float(np.linalg.norm(a))


def path_l1_distance(p: MatrixStepPath, q: MatrixStepPath) -> float:
    """``int_0^1 |p(u) - q(u)| du`` with the entrywise norm."""
    pts = np.union1d(p.breaks, q.breaks)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo + hi)
        total += (hi - lo) * frobenius(_sub(p.value_at(mid), q.value_at(mid)))
    return float(total)


def compose_psi(z: StepQuantile, D: int) -> MatrixStepPath:
    """The matrix path ``Psi o zeta``."""
    return MatrixStepPath(z.breaks, tuple(psi_embed(D, v) for v in z.values))


def random_step_cdf(rng: np.random.Generator, n_steps: int, top: float | None = None) -> StepCdf:
    """Random step CDF with ``n_steps`` intervals (fewer after merging ties)."""
    cuts = np.sort(rng.uniform(0.05, 0.95, size=n_steps - 1))
    t = np.concatenate([[0.0], cuts, [1.0]])
    while np.any(np.diff(t) < 1e-3):
        cuts = np.sort(rng.uniform(0.05, 0.95, size=n_steps - 1))
        t = np.concatenate([[0.0], cuts, [1.0]])
    m = np.sort(rng.uniform(0.0, 1.0, size=n_steps))
    if top is not None:
        m[-1] = top
        m = np.minimum(m, top)
    return make_step_cdf(t, m)
