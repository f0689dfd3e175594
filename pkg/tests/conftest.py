import numpy as np
import pytest

from wavesim.coeffs import build_cache
from wavesim.planner import AccuracySpec, plan_power, plan_product
from wavesim.spectra import correlation, make_density
from wavesim.wavelets import build_daubechies, build_meyer

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {msg}")


@pytest.fixture(scope="session")
def meyer():
    return build_meyer()


@pytest.fixture(scope="session")
def db4():
    return build_daubechies(4)


@pytest.fixture(scope="session")
def ex1(meyer):
    """Example 1: f = (1+y^4)^-2, Meyer, s = 2, p = 2, T = 1, eps = 0.5, delta = 0.05."""
    model = make_density("inverse_poly", n=2)
    spec = AccuracySpec(0.5, 0.05, 2, 1)
    plan = plan_power(spec, 2, model, meyer)
    # enough levels for the 4x growth used by the exhaustion checks
    cache = build_cache(plan, model, meyer, n_levels=4 * plan.N)
    R0 = correlation(model, 0.0, rel_tol=1e-10)
    return {"model": model, "transforms": meyer, "spec": spec, "plan": plan, "cache": cache,
            "R0": R0}


@pytest.fixture(scope="session")
def ex2(db4):
    """Example 2: f1 = (1+y^2)^-4, f2 two-bump (m=2, a=3), Daubechies order 4."""
    m1 = make_density("lorentzian_power", n=2)
    m2 = make_density("two_bump", m=2, a=3.0)
    spec = AccuracySpec(0.5, 0.05, 2, 1)
    pp = plan_product(spec, m1, db4, m2, db4)
    c1 = build_cache(pp.plan1, m1, db4, n_levels=2 * pp.plan1.N)
    c2 = build_cache(pp.plan2, m2, db4, n_levels=2 * pp.plan2.N)
    return {"models": (m1, m2), "spec": spec, "plan": pp, "caches": (c1, c2),
            "R0": (correlation(m1, 0.0), correlation(m2, 0.0))}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
