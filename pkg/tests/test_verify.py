import json
import math

import numpy as np
import pytest

from wavesim.coeffs import CoefficientCache, Profile
from wavesim.errors import DomainError, NegativeDeficit
from wavesim.planner import AccuracySpec, TruncationPlan
from wavesim.sampler import PathEvaluator, draw_coefficients, time_grid
from wavesim.verify import (VerificationReport, deficit_profile, empirical_covariance,
                            empirical_reliability, exceedance_counts, jackknife_mean, lp_norm,
                            model_covariance, moment_bound, moment_inequality_check,
                            variance_deficit, wilson_upper)

T64 = np.linspace(0, 1, 64)
SMALL = TruncationPlan(3, 2, (3, 3), 0.1)


def test_example1_deficit(ex1):
    d = variance_deficit(ex1["plan"], ex1["cache"], ex1["R0"], T64)
    assert d <= ex1["plan"].variance_budget


def test_deficit_shrinks_when_plan_grows(ex1):
    small = TruncationPlan(2, 2, (2, 2), 0.1)
    a = variance_deficit(small, ex1["cache"], ex1["R0"], T64)
    b = variance_deficit(small.scaled(2, 4), ex1["cache"], ex1["R0"], T64)
    assert b < a


def test_deficit_monotone_under_single_index(ex1):
    base = TruncationPlan(2, 2, (2, 2), 0.1)
    bigger = TruncationPlan(3, 2, (2, 2), 0.1)
    a = deficit_profile(base, ex1["cache"], ex1["R0"], T64)
    b = deficit_profile(bigger, ex1["cache"], ex1["R0"], T64)
    assert np.all(b <= a + 1e-15)


def test_empty_sums_give_R0():
    null = Profile(None, 0.01, 0.0, [], [], 0.0, null=True)
    cache = CoefficientCache(null, [Profile(j, 0.01, 0.0, [], [], 0.0, True) for j in range(2)], 0.01)
    assert variance_deficit(SMALL, cache, 1.25, T64) == 1.25


def test_negative_deficit_raises(ex1):
    with pytest.raises(NegativeDeficit):
        variance_deficit(ex1["plan"], ex1["cache"], ex1["R0"] - 1e-3, T64)


def test_wilson():
    assert wilson_upper(0, 200) == pytest.approx(0.0188453, abs=1e-6)
    assert wilson_upper(0, 0) == 1.0
    assert 0.5 < wilson_upper(100, 200) < 0.6
    with pytest.raises(DomainError):
        VerificationReport(exceedance_count=3, replications=2)


def test_lp_norm():
    t = np.linspace(0, 1, 1025)
    assert lp_norm(np.ones_like(t), t, 2) == pytest.approx(1.0)
    assert lp_norm(t, t, 2) == pytest.approx(math.sqrt(1 / 3), rel=1e-6)


def test_reliability_identical_plans(ex1):
    rep = empirical_reliability(SMALL, SMALL, ex1["spec"], ("power", 2), 20, 1, [ex1["cache"]])
    assert rep.exceedance_count == 0 and rep.details["max_norm"] == 0.0


def test_reliability_huge_eps(ex1):
    spec = AccuracySpec(1e9, 0.05, 2, 1)
    rep = empirical_reliability(SMALL, SMALL.scaled(2, 4), spec, ("power", 2), 20, 1, [ex1["cache"]])
    assert rep.exceedance_count == 0


def test_reliability_consistency(ex1):
    ref = SMALL.scaled(2, 4)
    norms = {}
    for eps in (0.05, 0.2, 0.5):
        rep = empirical_reliability(SMALL, ref, AccuracySpec(eps, 0.05, 2, 1), ("power", 2), 60, 2,
                                    [ex1["cache"]])
        norms[eps] = rep.exceedance_count
    assert norms[0.05] >= norms[0.2] >= norms[0.5]
    assert norms[0.05] > 0
    bigger = TruncationPlan(6, 3, (6, 6, 6), 0.1)
    rep = empirical_reliability(bigger, ref, AccuracySpec(0.05, 0.05, 2, 1), ("power", 2), 60, 2,
                                [ex1["cache"]])
    assert rep.exceedance_count <= norms[0.05]


def test_reliability_requires_domination(ex1):
    with pytest.raises(DomainError):
        empirical_reliability(SMALL.scaled(2, 4), SMALL, ex1["spec"], ("power", 2), 5, 1,
                              [ex1["cache"]])


def test_exceedance_counts():
    assert exceedance_counts([0.1, 0.5, 0.9], [0.0, 0.4, 1.0]) == [3, 2, 0]


def test_jackknife_of_mean_is_standard_error(rng):
    x = rng.standard_normal(500)
    est, se = jackknife_mean(x)
    assert est == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(500), rel=1e-10)


@pytest.fixture(scope="module")
def cov_paths(ex1):
    times = time_grid(1.0, 512)
    ev = PathEvaluator(ex1["plan"], ex1["cache"], times)
    paths = np.array([ev.evaluate(draw_coefficients(ex1["plan"], 77, r)).values
                      for r in range(2000)])
    return ev, times, paths


def test_covariance_oracles(ex1, cov_paths):
    ev, times, paths = cov_paths
    dt = times[1] - times[0]
    lag = round(0.25 / dt) * dt
    rows = empirical_covariance(paths, times, [0.0, lag, 1.0])
    (l0, e0, s0), (l1, e1, s1), (l2, e2, s2) = rows
    deficit = variance_deficit(ex1["plan"], ex1["cache"], ex1["R0"], times)
    assert abs(e0 - (ex1["R0"] - deficit)) <= 3 * s0
    assert abs(e1 - model_covariance(ev, lag)) <= 3 * s1
    assert math.isfinite(e2) and abs(e2) <= ex1["R0"] + 3 * s2


def test_covariance_needs_100_paths(cov_paths):
    _, times, paths = cov_paths
    with pytest.raises(DomainError):
        empirical_covariance(paths[:50], times, [0.0])
    with pytest.raises(DomainError):
        empirical_covariance(paths, times, [0.3333])


@pytest.mark.parametrize("p,bound", [(2, 4.0), (4, 16.0)])
def test_moment_bound_values(p, bound):
    assert moment_bound(p) == pytest.approx(bound)


def test_moment_checks_gaussian(rng):
    x = rng.standard_normal(100_000)
    for p in (2, 4, 6):
        assert moment_inequality_check(x, 1.0, p).passed


def test_moment_check_on_model_path(cov_paths):
    ev, times, paths = cov_paths
    i = times.size // 2
    tau = math.sqrt(ev.energy()[i])
    assert moment_inequality_check(paths[:, i], tau, 4).passed


def test_moment_check_can_fail(rng):
    heavy = rng.standard_t(2.5, 100_000) * 5
    assert not moment_inequality_check(heavy, 1.0, 2).passed


def test_report_json_roundtrip():
    rep = VerificationReport(1e-9, 1e-4, 0, 200, 0.0188, [[0.0, 0.01, 0.05]],
                             {"a": True, "b": False}, {"x": np.float64(1.5)})
    d = json.loads(rep.to_json())
    assert d["passed"] is False and d["details"]["x"] == 1.5
    assert rep.failing == ["b"]
