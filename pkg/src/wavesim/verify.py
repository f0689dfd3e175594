"""Numerical checks of the accuracy/reliability guarantees.

The variance deficit ``R(0) - Σ (included coefficients)^2`` is computed
deterministically.  Reliability is estimated by Monte Carlo against a
larger reference model that shares the model's coefficient draws, since
the target process itself cannot be sampled.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .coeffs import CoefficientCache, coefficient_energy
from .errors import DomainError, NegativeDeficit
from .numerics import gamma
from .planner import AccuracySpec, ProductPlan, TruncationPlan
from .sampler import PathEvaluator, draw_coefficients, time_grid

NEGATIVE_TOL = 1e-6
MIN_GRID = 512
GRID_CHANGE = 0.01


# variance deficit -----------------------------------------------------------

def deficit_profile(plan: TruncationPlan, cache: CoefficientCache, R0: float,
                    t_samples) -> np.ndarray:
    """``R(0) - energy(t)`` at each sample time."""
    t_samples = np.atleast_1d(np.asarray(t_samples, dtype=float))
    out = np.array([R0 - coefficient_energy(plan, cache, t) for t in t_samples])
    if out.size and out.min() < -NEGATIVE_TOL:
        i = int(np.argmin(out))
        raise NegativeDeficit(
            f"included energy exceeds R(0) by {-out[i]:.3e} at t = {t_samples[i]:.6g}"
        )
    return out


def variance_deficit(plan: TruncationPlan, cache: CoefficientCache, R0: float, t_samples) -> float:
    """Largest variance deficit over ``t_samples``."""
    return float(deficit_profile(plan, cache, R0, t_samples).max())


def wilson_upper(count: int, n: int, confidence: float = 0.95) -> float:
    if n == 0:
        return 1.0
    return float(binomtest(int(count), int(n)).proportion_ci(confidence, "wilson").high)


def lp_norm(values, times, p: float) -> float:
    """``(∫ |x|^p dt)^(1/p)`` by the composite trapezoid rule."""
    return float(np.trapezoid(np.abs(values) ** p, times) ** (1.0 / p))


# reliability ----------------------------------------------------------------

@dataclass
class VerificationReport:
    variance_deficit_max: float = math.nan
    budget: float = math.nan
    exceedance_count: int = 0
    replications: int = 0
    wilson_upper_95: float = 1.0
    covariance_errors: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.exceedance_count > self.replications:
            raise DomainError("exceedance count cannot exceed replications")

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failing(self) -> list:
        return [k for k, v in self.checks.items() if not v]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


class _Model:
    """Path evaluators for a power or product process on one grid."""

    def __init__(self, plans, caches, times, exponent):
        self.evals = [PathEvaluator(p, c, times) for p, c in zip(plans, caches)]
        self.plans = plans
        self.exponent = exponent
        self.times = times

    def path(self, draws):
        base = [ev.evaluate(d.restricted(p)).values for ev, d, p in zip(self.evals, draws, self.plans)]
        if len(base) == 2:
            return base[0] * base[1]
        return base[0] ** self.exponent


def _unpack(plan):
    if isinstance(plan, ProductPlan):
        return [plan.plan1, plan.plan2]
    return [plan]


def empirical_reliability(plan, reference_plan, spec: AccuracySpec, process, replications: int,
                          seed: int, caches: Sequence[CoefficientCache],
                          grid_points: int = MIN_GRID) -> VerificationReport:
    """Monte Carlo estimate of ``P{ ||Y_ref - Y_hat||_p > epsilon }``.

    ``process`` is ``("power", s)`` or ``("product",)``; for products the
    plans are :class:`ProductPlan` and ``caches`` holds one cache per factor.
    """
    plans, refs = _unpack(plan), _unpack(reference_plan)
    if len(plans) != len(refs) or len(caches) != len(plans):
        raise DomainError("plan, reference plan and caches disagree on the process kind")
    if not all(r.dominates(p) for r, p in zip(refs, plans)):
        raise DomainError("reference plan must contain the model's index set")
    if grid_points < MIN_GRID:
        raise DomainError(f"grid_points must be >= {MIN_GRID}")
    exponent = int(process[1]) if process[0] == "power" else 1

    def draws(r):
        return [draw_coefficients(refs[i], seed, r, stream=i) for i in range(len(refs))]

    # grid refinement: doubling must move the norm by less than 1 %
    n = int(grid_points)
    for _ in range(4):
        times, fine = time_grid(spec.T, n), time_grid(spec.T, 2 * n - 1)
        m, mr = _Model(plans, caches, times, exponent), _Model(refs, caches, times, exponent)
        mf, mrf = _Model(plans, caches, fine, exponent), _Model(refs, caches, fine, exponent)
        worst = 0.0
        for r in range(min(replications, 5)):
            d = draws(r)
            a = lp_norm(mr.path(d) - m.path(d), times, spec.p)
            b = lp_norm(mrf.path(d) - mf.path(d), fine, spec.p)
            # changes far below epsilon cannot move an exceedance decision
            if max(a, b) > 1e-3 * spec.epsilon:
                worst = max(worst, abs(a - b) / max(a, b))
        if worst < GRID_CHANGE:
            break
        n = 2 * n - 1
    norms = np.empty(replications)
    for r in range(replications):
        d = draws(r)
        norms[r] = lp_norm(mr.path(d) - m.path(d), times, spec.p)
    count = int(np.sum(norms > spec.epsilon))
    return VerificationReport(
        exceedance_count=count,
        replications=int(replications),
        wilson_upper_95=wilson_upper(count, replications),
        details={"grid_points": n, "max_norm": float(norms.max()) if replications else 0.0,
                 "mean_norm": float(norms.mean()) if replications else 0.0},
    )


def exceedance_counts(norms, epsilons) -> list:
    norms = np.asarray(norms)
    return [int(np.sum(norms > e)) for e in epsilons]


# covariance -----------------------------------------------------------------

def jackknife_mean(stats) -> tuple:
    stats = np.asarray(stats, dtype=float)
    n = stats.size
    loo = (stats.sum() - stats) / (n - 1)
    est = float(stats.mean())
    se = float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return est, se


def _lag_index(times, lag):
    dt = times[1] - times[0]
    i = int(round(lag / dt))
    if abs(i * dt - lag) > 1e-9 * max(1.0, abs(lag)) or not 0 <= i < times.size:
        raise DomainError(f"lag {lag} is not a grid multiple within the path length")
    return i


def empirical_covariance(paths, times, lags) -> list:
    """``E X(t) X(t + lag)`` averaged over ``t``, per lag, with jackknife errors.

    ``paths`` is ``(n_paths, n_times)``; the model mean is zero.
    """
    paths = np.asarray(paths, dtype=float)
    times = np.asarray(times, dtype=float)
    if paths.shape[0] < 100:
        raise DomainError("need at least 100 paths")
    out = []
    for lag in lags:
        i = _lag_index(times, lag)
        n = times.size - i
        per_path = np.mean(paths[:, :n] * paths[:, i:i + n], axis=1)
        est, se = jackknife_mean(per_path)
        out.append((float(lag), est, se))
    return out


def model_covariance(evaluator: PathEvaluator, lag) -> float:
    """``Σ c_k(t) c_k(t + lag)`` over the plan's coefficients, averaged over ``t``."""
    times = evaluator.times
    i = _lag_index(times, lag)
    n = times.size - i
    total = np.zeros(n)
    for _, _, mat in evaluator.blocks:
        total += np.sum(mat[:n] * mat[i:i + n], axis=1)
    return float(total.mean())


# moments --------------------------------------------------------------------

@dataclass
class MomentCheck:
    passed: bool
    empirical: float
    bound: float
    standard_error: float


def moment_bound(p: float, tau: float = 1.0) -> float:
    """``p 2^(p/2) tau^p Γ(p/2)``, a bound on ``E|xi|^p`` for sub-Gaussian ``xi``."""
    return p * 2.0 ** (p / 2.0) * tau ** p * gamma(p / 2.0)


def moment_inequality_check(samples, tau: float, p: float) -> MomentCheck:
    x = np.abs(np.asarray(samples, dtype=float)) ** p
    emp = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    bound = moment_bound(p, tau)
    return MomentCheck(emp <= bound + 3.0 * se, emp, bound, se)
