"""Expansion coefficient functions a_0k(t), b_jk(t) and their cache.

Both families are shifts of one profile per scale:

    a_0k(t) = a00(t - k)
    b_jk(t) = p_j(2**j t - k),
    p_j(v)  = 2**(j/2) / sqrt(2 pi) ∫ g(2**j w) conj(psi_hat(w)) exp(-i w v) dw.

Writing the level-j profile in the dilated variable ``v`` keeps its
oscillation scale (and so the grid it needs) independent of ``j``.  The
cache samples each profile once on a uniform grid by a zero-padded FFT of
the frequency-domain kernel, keeps the window where it exceeds
``window_tol``, and interpolates with cubic Hermite splines using the
exact derivative profile.  Values outside the window are returned as 0.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import BoundViolation, CacheMiss, DomainError, NonConvergence
from .numerics import integrate_interval
from .spectra import PlanConstants, SpectralModel
from .wavelets import WaveletTransforms

SQRT_2PI = math.sqrt(2.0 * math.pi)
DEFAULT_GRID_STEP = 0.01
WINDOW_TOL = 1e-10   # profile values below this are stored as 0
NULL_TOL = 1e-10     # levels whose sup bound is below this are all-zero
TRUNC_TOL = 1e-12    # frequency-domain truncation error
ALIAS_TOL = 1e-12    # FFT periodisation error
PROBE_TOL = 1e-7
REALNESS_TOL = 1e-9
MAX_FFT = 2**22


# kernels --------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    """Frequency-domain integrand of one profile: ``p(v) = ∫ h(w) exp(-i w v) dw``."""

    level: Optional[int]          # None for the scale-0 profile
    fn: object
    abs_fn: object
    wave_sup: float
    support: Optional[float]
    dilation: float
    prefactor: float
    breakpoints: tuple


def kernel(model: SpectralModel, transforms: WaveletTransforms, level: Optional[int]) -> Kernel:
    g = model.g
    if level is None:
        ph = transforms.phi_hat
        c = 1.0 / SQRT_2PI
        return Kernel(None, lambda w: c * g(w) * np.conj(ph(w)),
                      lambda w: c * g(w) * np.abs(ph(w)),
                      transforms.phi_sup, transforms.phi_support, 1.0, c,
                      tuple(sorted(set(model.breakpoints) | set(transforms.breakpoints))))
    j = int(level)
    if j < 0:
        raise DomainError("level must be >= 0")
    d = 2.0 ** j
    c = 2.0 ** (0.5 * j) / SQRT_2PI
    ps = transforms.psi_hat
    bps = set(transforms.breakpoints) | {b / d for b in model.breakpoints}
    return Kernel(j, lambda w: c * g(d * w) * np.conj(ps(w)),
                  lambda w: c * g(d * w) * np.abs(ps(w)),
                  transforms.C1, transforms.psi_support, d, c, tuple(sorted(bps)))


def domain_radius(model: SpectralModel, ker: Kernel, tol: float = TRUNC_TOL) -> float:
    """Half-width ``W`` with ``∫_{|w|>W} |h| <= tol``.

    Compact wavelets give ``W`` directly.  Otherwise the declared tail of
    ``g`` fixes a far radius, and dyadic shells are integrated inwards
    until their accumulated mass reaches ``tol/2``.
    """
    if ker.support is not None:
        return float(ker.support)
    dec = model.g_decay
    scale = ker.prefactor * ker.wave_sup / ker.dilation
    if scale == 0.0 or dec.scale == 0.0:
        return 1.0
    far = max(dec.radius_for(0.5 * tol / scale) / ker.dilation, 1.0)
    acc, r = 0.0, far
    while r > 1e-3:
        inner = 0.5 * r
        # |h| is even in w for even g and a real wavelet
        shell = 2.0 * integrate_interval(ker.abs_fn, inner, r, rel_tol=1e-6,
                                         abs_floor=1e-3 * tol, breakpoints=ker.breakpoints).real
        if acc + shell > 0.5 * tol:
            return r
        acc += shell
        r = inner
    return r


def sup_bound(model: SpectralModel, ker: Kernel, radius: float, tol: float = TRUNC_TOL) -> float:
    """``∫ |h|``, an upper bound on ``sup_v |p(v)|``."""
    body = integrate_interval(ker.abs_fn, -radius, radius, rel_tol=1e-8, abs_floor=1e-3 * tol,
                              breakpoints=ker.breakpoints)
    return float(body.real + body.abs_error_estimate + tol)


# profiles -------------------------------------------------------------------

class Profile:
    """One sampled profile on ``v = start + step * i``; zero outside."""

    def __init__(self, level, step, start, values, derivs, sup, null=False):
        self.level = level
        self.step = float(step)
        self.start = float(start)
        self.values = np.asarray(values, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        self.sup = float(sup)
        self.null = bool(null)
        self._spline = None

    @property
    def window(self) -> tuple:
        if self.null or self.values.size == 0:
            return (0.0, 0.0)
        return (self.start, self.start + self.step * (self.values.size - 1))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.null or self.values.size < 2:
            return np.zeros(v.shape)
        if self._spline is None:
            x = self.start + self.step * np.arange(self.values.size)
            self._spline = CubicHermiteSpline(x, self.values, self.derivs, extrapolate=False)
        out = self._spline(v)
        return np.where(np.isnan(out), 0.0, out)


def _fft_profile(fn, radius, step, window_tol, alias_tol):
    """Trapezoid sums of ``h(w) exp(-i w v)`` on the grid ``v = m * step``.

    With spacing ``dw`` the sums equal the exact transform plus its images
    shifted by multiples of ``2 pi / dw``; the grid is doubled until the
    outer band of the computed period is below ``alias_tol``.
    """
    span = 2.0 * math.pi / step          # N * dw
    n = 2 ** max(12, math.ceil(math.log2(2.0 * radius / span * 64)))
    while n <= MAX_FFT:
        dw = span / n
        idx = np.arange(-n // 2, n // 2)
        w = idx * dw
        inside = np.abs(w) <= radius
        h = np.zeros(n, dtype=complex)
        h[inside] = fn(w[inside])
        vals = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(h))) * dw
        ders = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(-1j * w * h))) * dw
        mag = np.abs(vals)
        band = max(1, n // 10)
        edge = max(mag[:band].max(), mag[-band:].max())
        if edge <= alias_tol:
            return idx * step, vals, ders
        n *= 2
    raise NonConvergence(f"profile aliasing stays above {alias_tol:g} at FFT length {MAX_FFT}")


def build_profile(model, transforms, level, step=DEFAULT_GRID_STEP, window_tol=WINDOW_TOL,
                  null_tol=NULL_TOL) -> Profile:
    ker = kernel(model, transforms, level)
    radius = domain_radius(model, ker)
    sup = sup_bound(model, ker, radius)
    if sup <= null_tol:
        return Profile(level, step, 0.0, [], [], sup, null=True)
    # the grid must sample the whole frequency domain
    step = min(step, 0.95 * math.pi / radius)
    v, vals, ders = _fft_profile(ker.fn, radius, step, window_tol, ALIAS_TOL)
    scale = np.abs(vals.real)
    if np.any(np.abs(vals.imag) > REALNESS_TOL * (1.0 + scale)):
        raise DomainError("coefficient profile is not real; the density must be even")
    big = np.nonzero(np.abs(vals) > window_tol)[0]
    if big.size == 0:
        return Profile(level, step, 0.0, [], [], sup, null=True)
    lo = max(big[0] - 4, 0)
    hi = min(big[-1] + 4, v.size - 1)
    return Profile(level, step, v[lo], vals.real[lo:hi + 1], ders.real[lo:hi + 1], sup)


# direct quadrature ----------------------------------------------------------

def _raw(ker: Kernel, radius, t_scaled, shift, rel_tol):
    """``∫ h(w) exp(-i w t_scaled) exp(i w shift) dw`` with both phases kept apart."""
    freq = abs(t_scaled - shift)
    width = 0.5 * 2.0 * math.pi / freq if freq > 1.0 else None

    def fn(w):
        return ker.fn(w) * np.exp(-1j * w * t_scaled) * np.exp(1j * w * shift)

    # each phase carries a rounding error of about eps * |w * t|, so that is
    # the best absolute accuracy the integrand allows
    floor = max(1e-14, 0.1 * np.finfo(float).eps * radius * (abs(t_scaled) + abs(shift)))
    return integrate_interval(fn, -radius, radius, rel_tol=rel_tol, abs_floor=floor,
                              breakpoints=ker.breakpoints, max_width=width, max_panels=1_000_000)


class DirectCoefficients:
    """Coefficient functions evaluated by quadrature on every call.

    The integrals are taken in the frequency variable of each profile; the
    substitution ``y = 2**j w`` turns them into the textbook form.
    """

    def __init__(self, model: SpectralModel, transforms: WaveletTransforms, rel_tol=1e-11):
        self.model = model
        self.transforms = transforms
        self.rel_tol = rel_tol
        self._kernels = {}

    def _kernel(self, level):
        if level not in self._kernels:
            ker = kernel(self.model, self.transforms, level)
            self._kernels[level] = (ker, domain_radius(self.model, ker))
        return self._kernels[level]

    def raw_a0k(self, t, k) -> complex:
        ker, r = self._kernel(None)
        return complex(_raw(ker, r, float(t), float(k), self.rel_tol).value)

    def raw_bjk(self, t, j, k) -> complex:
        ker, r = self._kernel(int(j))
        return complex(_raw(ker, r, 2.0 ** j * float(t), float(k), self.rel_tol).value)

    def a0k(self, t, k) -> float:
        return self.raw_a0k(t, k).real

    def bjk(self, t, j, k) -> float:
        return self.raw_bjk(t, j, k).real


# cache ----------------------------------------------------------------------

def _workers() -> int:
    try:
        return max(1, int(os.environ.get("WAVESIM_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class CoefficientCache:
    """Sampled scale-0 profile and per-level wavelet profiles."""

    scale0: Profile
    levels: list
    grid_step: float
    key: str = ""
    probe_error: float = math.nan
    window_tol: float = WINDOW_TOL
    null_tol: float = NULL_TOL
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def profile(self, level: Optional[int]) -> Profile:
        if level is None:
            return self.scale0
        if not 0 <= level < len(self.levels):
            raise CacheMiss(f"level {level} not cached (have 0..{len(self.levels) - 1})")
        return self.levels[level]

    def a0k(self, t, k):
        return self.scale0(np.asarray(t, dtype=float) - np.asarray(k, dtype=float))

    def bjk(self, t, j, k):
        return self.profile(int(j))(2.0 ** j * np.asarray(t, dtype=float) - np.asarray(k, dtype=float))

    def nonzero_k(self, level: Optional[int], t_lo: float, t_hi: float) -> tuple:
        """Inclusive range of ``k`` whose coefficient can be nonzero for ``t`` in ``[t_lo, t_hi]``."""
        prof = self.profile(level)
        if prof.null or prof.values.size == 0:
            return (0, -1)
        d = 1.0 if level is None else 2.0 ** level
        lo, hi = prof.window
        return (math.ceil(d * t_lo - hi), math.floor(d * t_hi - lo))

    # persistence
    def save(self, path):
        arrays = {"s0_values": self.scale0.values, "s0_derivs": self.scale0.derivs}
        info = {"key": self.key, "grid_step": self.grid_step, "probe_error": self.probe_error,
                "window_tol": self.window_tol, "null_tol": self.null_tol, "meta": self.meta,
                "profiles": []}
        for prof in [self.scale0] + self.levels:
            info["profiles"].append({"level": prof.level, "step": prof.step, "start": prof.start,
                                     "sup": prof.sup, "null": prof.null})
        for j, prof in enumerate(self.levels):
            arrays[f"l{j}_values"] = prof.values
            arrays[f"l{j}_derivs"] = prof.derivs
        np.savez_compressed(path, info=np.array(json.dumps(info)), **arrays)

    @classmethod
    def load(cls, path, expected_key: Optional[str] = None) -> "CoefficientCache":
        with np.load(path, allow_pickle=False) as z:
            info = json.loads(str(z["info"]))
            if expected_key is not None and info["key"] != expected_key:
                raise CacheMiss(f"cache key {info['key']} does not match {expected_key}")
            ps = info["profiles"]

            def mk(p, name):
                return Profile(p["level"], p["step"], p["start"], z[f"{name}_values"],
                               z[f"{name}_derivs"], p["sup"], p["null"])

            s0 = mk(ps[0], "s0")
            levels = [mk(p, f"l{j}") for j, p in enumerate(ps[1:])]
        return cls(s0, levels, info["grid_step"], info["key"], info["probe_error"],
                   info["window_tol"], info["null_tol"], info["meta"])


def cache_key(model: SpectralModel, transforms: WaveletTransforms, n_levels: int,
              grid_step: float) -> str:
    # the profiles depend on the plan only through the number of levels
    doc = {"density": model.describe(), "wavelet": transforms.spec.as_dict(),
           "levels": int(n_levels), "grid_step": float(grid_step),
           "window_tol": WINDOW_TOL, "null_tol": NULL_TOL}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def probe_cache(cache: CoefficientCache, direct: DirectCoefficients, T: float, n_probes=100,
                seed=0) -> float:
    """Largest |cache - quadrature| at random ``(t, j, k)`` near the profile windows."""
    rng = np.random.default_rng(seed)
    live = [None] + [j for j, p in enumerate(cache.levels) if not p.null]
    worst = 0.0
    for _ in range(n_probes):
        level = live[rng.integers(len(live))]
        prof = cache.profile(level)
        lo, hi = prof.window
        t = rng.uniform(0.0, T)
        v = rng.uniform(lo - 2.0, hi + 2.0)
        if level is None:
            k = round(t - v)
            err = abs(float(cache.a0k(t, k)) - direct.a0k(t, k))
        else:
            k = round(2.0 ** level * t - v)
            err = abs(float(cache.bjk(t, level, k)) - direct.bjk(t, level, k))
        worst = max(worst, err)
    return worst


def build_cache(plan, model: SpectralModel, transforms: WaveletTransforms,
                grid_step: float = DEFAULT_GRID_STEP, T: float = 1.0, n_probes: int = 100,
                probe_tol: float = PROBE_TOL, seed: int = 0, workers: Optional[int] = None,
                n_levels: Optional[int] = None) -> CoefficientCache:
    """Profiles for every level of ``plan`` (or ``n_levels``), checked against quadrature."""
    if not 0.0 < grid_step <= 0.01:
        raise DomainError("grid_step must lie in (0, 0.01]")
    n = int(n_levels if n_levels is not None else plan.N)
    workers = workers or _workers()
    todo = [None] + list(range(n))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            profs = list(ex.map(lambda lv: build_profile(model, transforms, lv, grid_step), todo))
    else:
        profs = [build_profile(model, transforms, lv, grid_step) for lv in todo]
    cache = CoefficientCache(profs[0], profs[1:], grid_step,
                             key=cache_key(model, transforms, n, grid_step),
                             meta={"density": model.describe(), "wavelet": transforms.spec.as_dict()})
    if n_probes:
        err = probe_cache(cache, DirectCoefficients(model, transforms), T, n_probes, seed)
        cache.probe_error = err
        if err > probe_tol:
            raise NonConvergence(f"cache probe error {err:.3e} exceeds {probe_tol:g}")
    return cache


def a0k(source, t, k):
    """``a_0k(t)`` from a :class:`CoefficientCache` or :class:`DirectCoefficients`."""
    return source.a0k(t, k)


def bjk(source, t, j, k):
    """``b_jk(t)`` from a :class:`CoefficientCache` or :class:`DirectCoefficients`."""
    return source.bjk(t, j, k)


# decay bounds ---------------------------------------------------------------

@dataclass
class DecayReport:
    checked: int = 0
    violations: list = field(default_factory=list)
    worst: dict = field(default_factory=dict)
    # smallest bound among indices whose cached value is exactly 0
    min_bound_outside: float = math.inf
    zero_tolerance: float = WINDOW_TOL

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def tolerance_resolved(self) -> bool:
        """True when every bound exceeds the level at which values were zeroed."""
        return self.min_bound_outside >= self.zero_tolerance

    def as_dict(self) -> dict:
        return {"checked": self.checked, "violations": len(self.violations),
                "worst": self.worst, "min_bound_outside": self.min_bound_outside,
                "zero_tolerance": self.zero_tolerance, "tolerance_resolved": self.tolerance_resolved}


def _note(report, name, ratios, where):
    if ratios.size == 0:
        return
    i = int(np.argmax(ratios))
    if ratios[i] > report.worst.get(name, {}).get("ratio", -1.0):
        report.worst[name] = {"ratio": float(ratios[i]), "where": where(i)}
    for b in np.nonzero(ratios > 1.0)[0][:10]:
        report.violations.append((name, where(int(b)), float(ratios[b])))


def _ratio(value, bound):
    value = np.abs(value)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, value / bound, np.where(value > 0, np.inf, 0.0))
    return r


def verify_decay(plan, constants: PlanConstants, cache: CoefficientCache, t_samples,
                 raise_on_violation: bool = True) -> DecayReport:
    """Check the three decay inequalities over the whole plan at each ``t``.

    Only indices inside the profile windows carry nonzero cached values;
    the rest are zero and satisfy their bounds trivially, so the report
    also records the smallest bound among them to compare with the
    zeroing tolerance.
    """
    c = constants
    rep = DecayReport(zero_tolerance=max(cache.window_tol, cache.null_tol))
    rep.min_bound_outside = min(rep.min_bound_outside, c.A1 / (plan.N0 - 1))
    for t in np.asarray(t_samples, dtype=float):
        at = abs(t)
        lo, hi = cache.nonzero_k(None, t, t)
        ks = np.arange(max(lo, -(plan.N0 - 1)), min(hi, plan.N0 - 1) + 1)
        ks = ks[ks != 0]
        vals = cache.a0k(t, ks)
        rep.checked += ks.size
        _note(rep, "a0k", _ratio(vals, (c.A1 + c.B1 * at) / np.abs(ks)),
              lambda i, ks=ks, t=t: {"j": None, "k": int(ks[i]), "t": float(t)})
        for j in range(plan.N):
            mj = plan.M[j]
            b0 = float(cache.bjk(t, j, 0))
            bound0 = c.B / 2.0 ** (1.5 * j)
            rep.min_bound_outside = min(rep.min_bound_outside, bound0,
                                        c.A / ((mj - 1) * 2.0 ** (0.5 * j)))
            rep.checked += 1
            _note(rep, "bj0", _ratio(np.array([b0]), np.array([bound0])),
                  lambda i, j=j, t=t: {"j": j, "k": 0, "t": float(t)})
            if j >= cache.n_levels:
                continue
            lo, hi = cache.nonzero_k(j, t, t)
            ks = np.arange(max(lo, -(mj - 1)), min(hi, mj - 1) + 1)
            ks = ks[ks != 0]
            vals = cache.bjk(t, j, ks)
            rep.checked += ks.size
            _note(rep, "bjk", _ratio(vals, (c.A + c.B * at) / (np.abs(ks) * 2.0 ** (0.5 * j))),
                  lambda i, ks=ks, j=j, t=t: {"j": j, "k": int(ks[i]), "t": float(t)})
    if rep.violations and raise_on_violation:
        name, where, ratio = rep.violations[0]
        raise BoundViolation(f"{name} exceeds its decay bound by ratio {ratio:.4g} at {where}", where)
    return rep


def coefficient_energy(plan, cache: CoefficientCache, t) -> float:
    """``Σ a_0k(t)^2 + Σ b_jk(t)^2`` over the plan's index set."""
    t = float(t)
    lo, hi = cache.nonzero_k(None, t, t)
    ks = np.arange(max(lo, -(plan.N0 - 1)), min(hi, plan.N0 - 1) + 1)
    total = float(np.sum(cache.a0k(t, ks) ** 2))
    for j in range(min(plan.N, cache.n_levels)):
        lo, hi = cache.nonzero_k(j, t, t)
        mj = plan.M[j]
        ks = np.arange(max(lo, -(mj - 1)), min(hi, mj - 1) + 1)
        total += float(np.sum(cache.bjk(t, j, ks) ** 2))
    if plan.N > cache.n_levels:
        raise CacheMiss(f"plan has {plan.N} levels, cache only {cache.n_levels}")
    return total
