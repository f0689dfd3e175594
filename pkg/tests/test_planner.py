import math

import pytest

from wavesim.errors import AdmissibilityError, BudgetTooTight, DomainError
from wavesim.numerics import Decay
from wavesim.planner import (AccuracySpec, ProductPlan, TruncationPlan, d_star,
                             delta1_for_power, delta_hat_for_product, level_bound, per_level_bound,
                             plan_power, plan_product, power_bracket, satisfies_bounds,
                             scale0_bound, truncation_from_budget)
from wavesim.spectra import PlanConstants, custom_density, make_density

ZERO = PlanConstants(0.0, 0.0, 0.0, 0.0, 1.0)


def test_accuracy_spec_validation():
    for bad in [(0, 0.1, 2, 1), (1, 0, 2, 1), (1, 1, 2, 1), (1, 0.1, 0.5, 1), (1, 0.1, 2, 0),
                (math.nan, 0.1, 2, 1)]:
        with pytest.raises(DomainError):
            AccuracySpec(*bad)


def test_d_star_hand_value():
    # 2^{7/2} * 2 * sqrt(Γ(2)) * 2^{3/2} * Γ(2)^{1/2} = 64
    assert d_star(2, 2, 1, 1.0) == pytest.approx(64.0, rel=1e-12)
    spec = AccuracySpec(0.5, 0.05, 2, 1)
    assert delta1_for_power(spec, 2, 1.0) == pytest.approx(0.05 * 0.25 / 64, rel=1e-12)


def test_delta1_example1():
    R0 = 3 * math.pi / (4 * math.sqrt(2))
    spec = AccuracySpec(0.5, 0.05, 2, 1)
    assert delta1_for_power(spec, 2, R0) == pytest.approx(0.05 * 0.25 / (64 * R0), rel=1e-12)


def test_delta1_s1_fallback():
    spec = AccuracySpec(0.5, 0.05, 2, 1)
    assert delta1_for_power(spec, 1, 123.0) == pytest.approx(3.125e-3, rel=1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.5])
def test_bracket_s2_is_gamma_p(p):
    assert power_bracket(p, 2) == pytest.approx(math.gamma(p), rel=1e-10)


def test_bracket_s3_direct():
    p = 2.0
    direct = 2 * math.gamma(4) + math.sqrt(1 * 1 * math.gamma(4) * math.gamma(4))
    assert power_bracket(p, 3) == pytest.approx(direct, rel=1e-10)


def test_delta1_rejects_small_p_and_bad_s():
    with pytest.raises(DomainError):
        delta1_for_power(AccuracySpec(0.5, 0.05, 1.5, 1), 2, 1.0)
    with pytest.raises(DomainError):
        delta1_for_power(AccuracySpec(0.5, 0.05, 2, 1), 0, 1.0)


def test_delta1_monotone_in_eps_and_delta():
    R0 = 1.7
    base = delta1_for_power(AccuracySpec(0.5, 0.05, 2, 1), 3, R0)
    assert delta1_for_power(AccuracySpec(0.6, 0.05, 2, 1), 3, R0) > base
    assert delta1_for_power(AccuracySpec(0.5, 0.06, 2, 1), 3, R0) > base


def test_zero_density_minimal_plan():
    plan = truncation_from_budget(0.01, ZERO, 1.0)
    assert (plan.N0, plan.N, plan.M) == (2, 2, (2, 2))


def test_n0_formula():
    c = PlanConstants(0.0, 0.0, 1.0, 0.0, 1.0)
    plan = truncation_from_budget(0.01, c, 1.0)
    # 6/0.01 * 1 + 1 = 601 exactly; strictly above -> 602
    assert plan.N0 == 602


def test_level_count_substitution():
    c = PlanConstants(1.0, 1.0, 0.0, 0.0, 1.0)   # (A + B T)^2 = 4 at T = 1
    plan = truncation_from_budget(0.01, c, 1.0)
    lhs1 = 1 + math.log2(72 * 4 / (5 * 0.01))
    lhs2 = 1 + math.log(18 * 1 / (7 * 0.01), 8)
    assert plan.N > max(lhs1, lhs2) and plan.N - 1 <= max(lhs1, lhs2)
    c = PlanConstants(1.0, 0.0, 0.0, 0.0, 1.0)   # (A + B T)^2 = 1, B = 0
    plan = truncation_from_budget(0.01, c, 1.0)
    assert plan.N == math.floor(1 + math.log2(72 / 0.05)) + 1


def _minimal(plan, c, T):
    b = plan.variance_budget
    assert satisfies_bounds(plan, c, T)
    assert plan.N0 - 1 <= max(scale0_bound(b, c, T), 1)
    assert plan.N - 1 <= max(level_bound(b, c, T), 1)
    assert all(m - 1 <= max(per_level_bound(b, c, T, plan.N), 1) for m in plan.M)


def test_example1_plan(ex1):
    plan, c = ex1["plan"], ex1["plan"].constants
    _minimal(plan, c, 1.0)
    assert plan.variance_budget == pytest.approx(0.05 * 0.25 / (64 * c.R0), rel=1e-12)
    assert len(plan.M) == plan.N and len(set(plan.M)) == 1


def test_monotonicity(ex1):
    base = ex1["plan"]
    m, t = ex1["model"], ex1["transforms"]
    c = base.constants
    looser = plan_power(AccuracySpec(1.0, 0.05, 2, 1), 2, m, t, constants=c, check=False)
    assert looser.N0 <= base.N0 and looser.N <= base.N and looser.M[0] <= base.M[0]
    longer = plan_power(AccuracySpec(0.5, 0.05, 2, 2), 2, m, t, constants=c, check=False)
    assert longer.N0 >= base.N0 and longer.M[0] >= base.M[0]


def test_counts_nonincreasing_in_budget(ex1):
    c = ex1["plan"].constants
    prev = None
    for b in (1e-5, 1e-4, 1e-3, 1e-2):
        p = truncation_from_budget(b, c, 1.0)
        if prev is not None:
            assert p.N0 <= prev.N0 and p.N <= prev.N and p.M[0] <= prev.M[0]
        prev = p


def test_budget_cap(ex1):
    with pytest.raises(BudgetTooTight):
        truncation_from_budget(ex1["plan"].variance_budget, ex1["plan"].constants, 1.0,
                               max_terms=10**7)


def test_margin_inflates():
    c = PlanConstants(1.0, 1.0, 1.0, 1.0, 1.0)
    a = truncation_from_budget(0.01, c, 1.0)
    b = truncation_from_budget(0.01, c, 1.0, margin=1.5)
    assert b.N0 > a.N0 and b.M[0] > a.M[0] and b.N >= a.N


def test_delta_hat_example():
    assert delta_hat_for_product(AccuracySpec(1.0, 0.5, 1, 1)) == pytest.approx(0.25 / 64, rel=1e-12)


def test_product_symmetry(db4):
    m = make_density("lorentzian_power", n=2)
    pp = plan_product(AccuracySpec(0.5, 0.05, 1, 1), m, db4, m, db4)
    assert pp.delta1_star == pp.delta2_star
    assert pp.plan1 == pp.plan2


def test_example2_product_plan(ex2):
    pp, (R1, R2) = ex2["plan"], ex2["R0"]
    assert pp.delta1_star == pytest.approx(pp.delta_hat / pp.plan2.constants.R0, rel=1e-14)
    assert pp.delta2_star == pytest.approx(pp.delta_hat / pp.plan1.constants.R0, rel=1e-14)
    assert pp.plan1.constants.R0 == pytest.approx(R1, rel=1e-8)
    _minimal(pp.plan1, pp.plan1.constants, 1.0)
    _minimal(pp.plan2, pp.plan2.constants, 1.0)
    again = ProductPlan.from_dict(pp.as_dict())
    assert again == pp


def test_plan_validation():
    with pytest.raises(DomainError):
        TruncationPlan(1, 2, (2, 2), 0.1)
    with pytest.raises(DomainError):
        TruncationPlan(2, 2, (2,), 0.1)
    with pytest.raises(DomainError):
        TruncationPlan(2, 2, (2, 1), 0.1)
    with pytest.raises(DomainError):
        TruncationPlan(2, 2, (2, 2), 0.0)


def test_plan_roundtrip_and_scaling():
    p = TruncationPlan(3, 2, (4, 4), 0.125, PlanConstants(1, 2, 3, 4, 5))
    assert p.total_terms == 5 + 7 + 7
    q = TruncationPlan.from_dict(p.as_dict())
    assert q == p and q.constants == p.constants
    big = p.scaled(2, 4)
    assert (big.N0, big.N, big.M) == (12, 4, (16, 16, 16, 16))
    assert big.dominates(p) and not p.dominates(big)


def test_inadmissible_model_rejected(meyer):
    slow = custom_density(lambda y: (1 + abs(y)) ** -0.5, Decay("polynomial", 0.5))
    with pytest.raises(AdmissibilityError) as e:
        plan_power(AccuracySpec(0.5, 0.05, 2, 1), 2, slow, meyer)
    assert "int g|y|" in e.value.failing


def test_power_requires_p2(meyer):
    with pytest.raises(DomainError):
        plan_power(AccuracySpec(0.5, 0.05, 1, 1), 2, make_density("inverse_poly", n=2), meyer)
