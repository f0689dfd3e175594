"""Truncation parameters that meet an accuracy/reliability target.

Powers ``Y = X**s`` (``p >= 2``) and products ``Z = X1 * X2`` (``p >= 1``)
share :func:`truncation_from_budget`; they differ only in how the accuracy
target is turned into a variance budget for the base model(s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import AdmissibilityError, BudgetTooTight, DomainError
from .numerics import gamma, log_gamma
from .spectra import PlanConstants, SpectralModel, check_admissibility, plan_constants
from .wavelets import WaveletTransforms

# Evaluation cost does not grow with the nominal term count (windowed
# coefficient cache, lazily drawn coefficients), so the guard is generous.
DEFAULT_MAX_TERMS = 10**9


@dataclass(frozen=True)
class AccuracySpec:
    epsilon: float
    delta: float
    p: float
    T: float

    def __post_init__(self):
        for name in ("epsilon", "delta", "p", "T"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{name} must be a finite number, got {v!r}")
        if self.epsilon <= 0:
            raise DomainError("epsilon must be > 0")
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")
        if self.p < 1:
            raise DomainError("p must be >= 1")
        if self.T <= 0:
            raise DomainError("T must be > 0")

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta, "p": self.p, "T": self.T}


@dataclass(frozen=True)
class TruncationPlan:
    """Index ranges of the model: ``|k| < N0`` at scale 0, levels ``j < N``,
    ``|k| < M[j]`` at level ``j``."""

    N0: int
    N: int
    M: tuple
    variance_budget: float
    constants: Optional[PlanConstants] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        if int(self.N0) != self.N0 or self.N0 < 2:
            raise DomainError("N0 must be an integer > 1")
        if int(self.N) != self.N or self.N < 2:
            raise DomainError("N must be an integer > 1")
        if len(self.M) != self.N:
            raise DomainError(f"M must have N = {self.N} entries, got {len(self.M)}")
        if any(m < 2 for m in self.M):
            raise DomainError("every M_j must be > 1")
        if not self.variance_budget > 0:
            raise DomainError("variance budget must be > 0")

    @property
    def total_terms(self) -> int:
        return (2 * self.N0 - 1) + sum(2 * m - 1 for m in self.M)

    def scaled(self, level_factor: int = 1, term_factor: int = 1) -> "TruncationPlan":
        """A plan with ``level_factor`` times the levels and ``term_factor``
        times the terms per level (new levels reuse the last ``M_j``)."""
        n = self.N * level_factor
        ms = list(self.M) + [self.M[-1]] * (n - self.N)
        return replace(self, N0=self.N0 * term_factor, N=n, M=tuple(m * term_factor for m in ms))

    def dominates(self, other: "TruncationPlan") -> bool:
        return (self.N0 >= other.N0 and self.N >= other.N
                and all(a >= b for a, b in zip(self.M, other.M)))

    def as_dict(self) -> dict:
        d = {"N0": self.N0, "N": self.N, "M": list(self.M),
             "variance_budget": self.variance_budget, "total_terms": self.total_terms}
        if self.constants is not None:
            d["constants"] = self.constants.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TruncationPlan":
        consts = PlanConstants(**d["constants"]) if d.get("constants") else None
        return cls(N0=int(d["N0"]), N=int(d["N"]), M=tuple(d["M"]),
                   variance_budget=float(d["variance_budget"]), constants=consts)


@dataclass(frozen=True)
class ProductPlan:
    plan1: TruncationPlan
    plan2: TruncationPlan
    delta_hat: float
    delta1_star: float
    delta2_star: float

    def as_dict(self) -> dict:
        return {"plan1": self.plan1.as_dict(), "plan2": self.plan2.as_dict(),
                "delta_hat": self.delta_hat, "delta1_star": self.delta1_star,
                "delta2_star": self.delta2_star}

    @classmethod
    def from_dict(cls, d: dict) -> "ProductPlan":
        return cls(TruncationPlan.from_dict(d["plan1"]), TruncationPlan.from_dict(d["plan2"]),
                   float(d["delta_hat"]), float(d["delta1_star"]), float(d["delta2_star"]))


# budgets --------------------------------------------------------------------

def power_bracket(p: float, s: int) -> float:
    """``(s-1) Γ(p(s-1)) + Σ_{k=1}^{s-2} sqrt(k (s-1-k) Γ(2pk) Γ(2p(s-1-k)))``."""
    if s < 2:
        raise DomainError("the moment bracket needs s >= 2")
    total = (s - 1) * gamma(p * (s - 1))
    for k in range(1, s - 1):
        total += math.exp(0.5 * (math.log(k * (s - 1 - k)) + log_gamma(2 * p * k)
                                 + log_gamma(2 * p * (s - 1 - k))))
    return total


def log_d_star(p: float, s: int, T: float, R0: float) -> float:
    """Natural log of the moment constant D* for ``Y = X**s`` (``s >= 2``)."""
    if R0 <= 0:
        raise DomainError("R(0) must be > 0")
    return ((p * s + 3) / 2 * math.log(2.0) + math.log(T) + math.log(p)
            + 0.5 * log_gamma(p) + (p - 0.5) * math.log(s)
            + p * (s - 1) / 2 * math.log(R0) + 0.5 * math.log(power_bracket(p, s)))


def d_star(p: float, s: int, T: float, R0: float) -> float:
    return math.exp(log_d_star(p, s, T, R0))


def delta1_for_power(spec: AccuracySpec, s: int, R0: float) -> float:
    """Variance budget for the base model of ``Y = X**s``.

    For ``s = 1`` the moment bracket is degenerate; the budget then comes
    straight from the sub-Gaussian moment bound
    ``E|xi|^p <= p 2^(p/2) tau^p Γ(p/2)``.
    """
    if int(s) != s or s < 1:
        raise DomainError("s must be a positive integer")
    if spec.p < 2:
        raise DomainError("powers need p >= 2")
    p = spec.p
    if s == 1:
        log_c = math.log(spec.T * p) + p / 2 * math.log(2.0) + log_gamma(p / 2)
    else:
        log_c = log_d_star(p, int(s), spec.T, R0)
    return math.exp(2.0 / p * (math.log(spec.delta) - log_c) + 2.0 * math.log(spec.epsilon))


def delta_hat_for_product(spec: AccuracySpec) -> float:
    p = spec.p
    log_c = (2 * p + 1) * math.log(2.0) + math.log(p) + log_gamma(p) + math.log(spec.T)
    return math.exp(2.0 / p * (math.log(spec.delta) - log_c) + 2.0 * math.log(spec.epsilon))


# truncation -----------------------------------------------------------------

def _log_or_neg_inf(x: float, base: float) -> float:
    return math.log(x, base) if x > 0 else -math.inf


def level_bound(budget: float, c: PlanConstants, T: float) -> float:
    ab = (c.A + c.B * T) ** 2
    return max(1.0 + _log_or_neg_inf(72.0 * ab / (5.0 * budget), 2.0),
               1.0 + _log_or_neg_inf(18.0 * c.B ** 2 / (7.0 * budget), 8.0))


def scale0_bound(budget: float, c: PlanConstants, T: float) -> float:
    return 6.0 / budget * (c.A1 + c.B1 * T) ** 2 + 1.0


def per_level_bound(budget: float, c: PlanConstants, T: float, N: int) -> float:
    return 1.0 + 12.0 / budget * (c.A + c.B * T) ** 2 * (1.0 - 2.0 ** (-N))


def _strictly_above(bound: float) -> int:
    """Least integer > bound, and at least 2 (the model needs counts > 1)."""
    if not math.isfinite(bound):
        if bound < 0:
            return 2
        raise BudgetTooTight("truncation bound is infinite")
    return max(2, math.floor(bound) + 1)


def satisfies_bounds(plan: TruncationPlan, c: PlanConstants, T: float) -> bool:
    b = plan.variance_budget
    return (plan.N0 > scale0_bound(b, c, T) and plan.N > level_bound(b, c, T)
            and all(m > per_level_bound(b, c, T, plan.N) for m in plan.M))


def truncation_from_budget(budget: float, constants: PlanConstants, T: float,
                           max_terms: int = DEFAULT_MAX_TERMS,
                           margin: float = 1.0) -> TruncationPlan:
    """Smallest counts strictly above the three lower bounds.

    ``margin >= 1`` inflates each bound before rounding up.
    """
    if not budget > 0 or not math.isfinite(budget):
        raise DomainError("variance budget must be finite and > 0")
    if margin < 1.0:
        raise DomainError("margin must be >= 1")
    n0 = _strictly_above(scale0_bound(budget, constants, T) * margin)
    lb = level_bound(budget, constants, T)
    n = _strictly_above(lb * margin if lb > 0 else lb)
    m = _strictly_above(per_level_bound(budget, constants, T, n) * margin)
    total = (2 * n0 - 1) + n * (2 * m - 1)
    if total > max_terms:
        raise BudgetTooTight(
            f"plan needs {total:,} terms (N0={n0}, N={n}, M_j={m}); cap is {max_terms:,}"
        )
    return TruncationPlan(N0=n0, N=n, M=(m,) * n, variance_budget=budget, constants=constants)


def _admissible(model, transforms):
    report = check_admissibility(model, transforms)
    if not report.ok:
        raise AdmissibilityError(
            f"{model.family} with {transforms.spec.family} fails: {', '.join(report.failing)}",
            report.failing,
        )
    return report


def plan_power(spec: AccuracySpec, s: int, model: SpectralModel, transforms: WaveletTransforms,
               max_terms: int = DEFAULT_MAX_TERMS, margin: float = 1.0,
               constants: Optional[PlanConstants] = None, check: bool = True) -> TruncationPlan:
    """Plan for ``Y = X**s`` in ``L_p([0, T])`` with accuracy ``epsilon``,
    reliability ``1 - delta``."""
    if spec.p < 2:
        raise DomainError("powers need p >= 2")
    if check:
        _admissible(model, transforms)
    c = constants or plan_constants(model, transforms)
    budget = delta1_for_power(spec, s, c.R0)
    return truncation_from_budget(budget, c, spec.T, max_terms, margin)


def plan_product(spec: AccuracySpec, model1: SpectralModel, transforms1: WaveletTransforms,
                 model2: SpectralModel, transforms2: WaveletTransforms,
                 max_terms: int = DEFAULT_MAX_TERMS, margin: float = 1.0,
                 constants=(None, None), check: bool = True) -> ProductPlan:
    """Plans for both factors of ``Z = X1 * X2``."""
    if check:
        _admissible(model1, transforms1)
        _admissible(model2, transforms2)
    c1 = constants[0] or plan_constants(model1, transforms1)
    c2 = constants[1] or plan_constants(model2, transforms2)
    dh = delta_hat_for_product(spec)
    d1, d2 = dh / c2.R0, dh / c1.R0
    return ProductPlan(
        plan1=truncation_from_budget(d1, c1, spec.T, max_terms, margin),
        plan2=truncation_from_budget(d2, c2, spec.T, max_terms, margin),
        delta_hat=dh, delta1_star=d1, delta2_star=d2,
    )
