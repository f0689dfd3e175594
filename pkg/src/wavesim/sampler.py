"""Random coefficients and model paths.

Coefficients are standard Gaussians drawn lazily in blocks of 1024 from a
counter-based generator: the block holding index ``k`` at level ``j`` of
replication ``r`` depends only on ``(seed, stream, r, j, k // 1024)``.
Draws are therefore independent of evaluation order and shared by any two
plans that contain the same index, which is how a model and its reference
plan see the same coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coeffs import CoefficientCache
from .errors import CacheMiss, DomainError, GridMismatch
from .planner import TruncationPlan

BLOCK = 1024
MATERIALIZE_LIMIT = 20_000_000


def _zigzag(b: int) -> int:
    return 2 * b if b >= 0 else -2 * b - 1


def _ranges(plan: TruncationPlan):
    """Half-width of the k range per level code (0 = scale 0, j+1 = level j)."""
    return [plan.N0] + list(plan.M)


class ModelRealization:
    """Coefficients ``xi_0k`` (level code 0) and ``eta_jk`` (level code ``j+1``)."""

    plan: TruncationPlan

    @property
    def count(self) -> int:
        return self.plan.total_terms

    def values(self, code: int, ks) -> np.ndarray:
        raise NotImplementedError

    def _mask(self, code, ks):
        ks = np.asarray(ks, dtype=np.int64)
        if code > self.plan.N:
            return ks, np.zeros(ks.shape, dtype=bool)
        half = _ranges(self.plan)[code]
        return ks, np.abs(ks) < half

    def xi0(self, ks=None) -> np.ndarray:
        if ks is None:
            ks = np.arange(-(self.plan.N0 - 1), self.plan.N0)
        return self.values(0, ks)

    def eta(self, j: int, ks=None) -> np.ndarray:
        if ks is None:
            m = self.plan.M[j]
            ks = np.arange(-(m - 1), m)
        return self.values(j + 1, ks)

    def materialize(self) -> "ArrayRealization":
        if self.count > MATERIALIZE_LIMIT:
            raise DomainError(f"{self.count:,} coefficients is too many to hold in memory")
        return ArrayRealization(self.plan, self.xi0(), [self.eta(j) for j in range(self.plan.N)])

    def __add__(self, other: "ModelRealization") -> "ArrayRealization":
        if other.plan != self.plan:
            raise DomainError("realizations belong to different plans")
        a, b = self.materialize(), other.materialize()
        return ArrayRealization(self.plan, a.xi0_values + b.xi0_values,
                                [x + y for x, y in zip(a.eta_values, b.eta_values)])


class LazyRealization(ModelRealization):
    def __init__(self, plan: TruncationPlan, seed: int, replication: int = 0, stream: int = 0):
        self.plan = plan
        self.seed = int(seed)
        self.replication = int(replication)
        self.stream = int(stream)
        self._blocks = {}

    def restricted(self, plan: TruncationPlan) -> "LazyRealization":
        """The same draws seen through another plan's index set (blocks are shared)."""
        other = LazyRealization(plan, self.seed, self.replication, self.stream)
        other._blocks = self._blocks
        return other

    def _block(self, code: int, b: int) -> np.ndarray:
        key = (code, b)
        if key not in self._blocks:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, self.replication,
                                                              code, _zigzag(b)))
            self._blocks[key] = np.random.Generator(np.random.Philox(ss)).standard_normal(BLOCK)
        return self._blocks[key]

    def values(self, code, ks):
        ks, keep = self._mask(code, ks)
        out = np.zeros(ks.shape)
        if not keep.any():
            return out
        kk = ks[keep]
        blocks = kk // BLOCK
        vals = np.empty(kk.shape)
        for b in np.unique(blocks):
            sel = blocks == b
            vals[sel] = self._block(code, int(b))[kk[sel] - b * BLOCK]
        out[keep] = vals
        return out


class ArrayRealization(ModelRealization):
    """Explicit coefficient arrays indexed from ``-(count-1)``."""

    def __init__(self, plan: TruncationPlan, xi0, eta):
        self.plan = plan
        self.xi0_values = np.asarray(xi0, dtype=float)
        self.eta_values = [np.asarray(e, dtype=float) for e in eta]
        if self.xi0_values.size != 2 * plan.N0 - 1 or len(self.eta_values) != plan.N or any(
                e.size != 2 * m - 1 for e, m in zip(self.eta_values, plan.M)):
            raise DomainError("coefficient arrays do not match the plan")

    @classmethod
    def zeros(cls, plan: TruncationPlan) -> "ArrayRealization":
        return cls(plan, np.zeros(2 * plan.N0 - 1), [np.zeros(2 * m - 1) for m in plan.M])

    def values(self, code, ks):
        ks, keep = self._mask(code, ks)
        out = np.zeros(ks.shape)
        arr = self.xi0_values if code == 0 else self.eta_values[code - 1]
        half = (arr.size + 1) // 2
        out[keep] = arr[ks[keep] + half - 1]
        return out


def draw_coefficients(plan: TruncationPlan, seed: int, replication: int = 0,
                      stream: int = 0) -> LazyRealization:
    """Independent standard Gaussian coefficients for every index of ``plan``."""
    return LazyRealization(plan, seed, replication, stream)


@dataclass
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    kind: str = "base"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("path values must be finite")


def time_grid(T: float, n_points: int) -> np.ndarray:
    if n_points < 2 or T <= 0:
        raise DomainError("need T > 0 and at least 2 grid points")
    return np.linspace(0.0, T, int(n_points))


class PathEvaluator:
    """Precomputed coefficient matrices for one (plan, cache, time grid).

    Row ``i`` of the level matrix holds ``b_jk(t_i)`` for the ``k`` that can
    be nonzero on the grid; a path is then one matrix-vector product per
    level, summed with ``k`` ascending and levels ascending.
    """

    def __init__(self, plan: TruncationPlan, cache: CoefficientCache, times):
        if plan.N > cache.n_levels:
            raise CacheMiss(f"plan has {plan.N} levels, cache only {cache.n_levels}")
        self.plan = plan
        self.times = np.asarray(times, dtype=float)
        t_lo, t_hi = float(self.times.min()), float(self.times.max())
        self.blocks = []
        halves = _ranges(plan)
        for code in range(plan.N + 1):
            level = None if code == 0 else code - 1
            lo, hi = cache.nonzero_k(level, t_lo, t_hi)
            half = halves[code]
            ks = np.arange(max(lo, -(half - 1)), min(hi, half - 1) + 1)
            if ks.size == 0:
                continue
            if level is None:
                mat = cache.scale0(self.times[:, None] - ks[None, :])
            else:
                mat = cache.profile(level)(2.0 ** level * self.times[:, None] - ks[None, :])
            self.blocks.append((code, ks, mat))

    def energy(self) -> np.ndarray:
        """Included coefficient energy at each time point."""
        out = np.zeros(self.times.size)
        for _, _, mat in self.blocks:
            out += np.sum(mat * mat, axis=1)
        return out

    def evaluate(self, realization: ModelRealization) -> SamplePath:
        vals = np.zeros(self.times.size)
        for code, ks, mat in self.blocks:
            vals += mat @ realization.values(code, ks)
        return SamplePath(self.times, vals, "base")


def evaluate_base(realization: ModelRealization, cache: CoefficientCache, times,
                  evaluator: Optional[PathEvaluator] = None) -> SamplePath:
    """``X_hat(t) = Σ xi_0k a_0k(t) + Σ_j Σ_k eta_jk b_jk(t)`` on ``times``."""
    ev = evaluator or PathEvaluator(realization.plan, cache, times)
    return ev.evaluate(realization)


def power_path(base: SamplePath, s: int) -> SamplePath:
    if int(s) != s or s < 1:
        raise DomainError("s must be a positive integer")
    return SamplePath(base.times, base.values ** int(s), "power", {**base.meta, "s": int(s)})


def product_path(base1: SamplePath, base2: SamplePath) -> SamplePath:
    if base1.times.shape != base2.times.shape or not np.array_equal(base1.times, base2.times):
        raise GridMismatch("paths are sampled on different time grids")
    return SamplePath(base1.times, base1.values * base2.values, "product")
