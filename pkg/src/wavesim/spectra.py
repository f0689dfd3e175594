"""Spectral densities, correlation functions and the plan constants A, B, A1, B1."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NonConvergence
from .numerics import Decay, Integrand, integrate_interval, integrate_line, integrate_oscillatory
from .wavelets import WaveletTransforms

SQRT_2PI = math.sqrt(2.0 * math.pi)
FD_STEP = 1e-6


@dataclass(frozen=True)
class SpectralModel:
    """A stationary spectral density ``f`` with ``g = sqrt(f)`` and ``g'``.

    ``g_decay`` / ``g_deriv_decay`` bound ``g`` and ``|g'|`` in the tails;
    quadrature truncation radii are derived from them.
    """

    family: str
    params: dict
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    g_deriv: Callable[[np.ndarray], np.ndarray]
    g_decay: Decay
    g_deriv_decay: Decay
    breakpoints: tuple = field(default_factory=tuple)
    admissibility_declared: bool = False

    def describe(self) -> dict:
        return {"family": self.family, **self.params}


@dataclass(frozen=True)
class PlanConstants:
    A: float
    B: float
    A1: float
    B1: float
    R0: float

    def __post_init__(self):
        for name in ("A", "B", "A1", "B1", "R0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"plan constant {name} = {v} must be finite and >= 0")

    def as_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "A1": self.A1, "B1": self.B1, "R0": self.R0}


# built-in families ----------------------------------------------------------

def _inverse_poly(n):
    n = int(n)

    def g(y):
        return 1.0 / (1.0 + y ** (2 * n))

    def gd(y):
        return -2.0 * n * y ** (2 * n - 1) / (1.0 + y ** (2 * n)) ** 2

    return g, gd, Decay("polynomial", 2 * n, 1.0), Decay("polynomial", 2 * n + 1, 2.0 * n), ()


def _lorentzian_power(n):
    n = int(n)

    def g(y):
        return (1.0 + y * y) ** (-n)

    def gd(y):
        return -2.0 * n * y * (1.0 + y * y) ** (-n - 1)

    return g, gd, Decay("polynomial", 2 * n, 1.0), Decay("polynomial", 2 * n + 1, 2.0 * n), ()


def _two_bump(m, a):
    m, a = int(m), float(a)

    def g(y):
        return (1.0 + (y - a) ** 2) ** (-m) + (1.0 + (y + a) ** 2) ** (-m)

    def gd(y):
        return (-2.0 * m * (y - a) * (1.0 + (y - a) ** 2) ** (-m - 1)
                - 2.0 * m * (y + a) * (1.0 + (y + a) ** 2) ** (-m - 1))

    # for |y| >= 2|a|, |y -+ a| >= |y|/2
    start = max(1.0, 2.0 * abs(a))
    gdec = Decay("polynomial", 2 * m, 2.0 ** (2 * m + 1), start)
    ddec = Decay("polynomial", 2 * m + 1, m * 2.0 ** (2 * m + 3), start)
    bps = (-abs(a), abs(a)) if a != 0.0 else ()
    return g, gd, gdec, ddec, bps


FAMILIES = {
    # f(y) = (1 + y^(2n))^-2
    "inverse_poly": (("n",), _inverse_poly),
    # f(y) = (1 + y^2)^(-2n)
    "lorentzian_power": (("n",), _lorentzian_power),
    # f(y) = ((1+(y-a)^2)^-m + (1+(y+a)^2)^-m)^2
    "two_bump": (("m", "a"), _two_bump),
}


def make_density(family_id: str, **params) -> SpectralModel:
    """Built-in spectral density with closed-form ``g`` and ``g'``."""
    if family_id not in FAMILIES:
        raise DomainError(f"unknown density family {family_id!r}; known: {sorted(FAMILIES)}")
    names, factory = FAMILIES[family_id]
    missing = [k for k in names if k not in params]
    extra = [k for k in params if k not in names]
    if missing or extra:
        raise DomainError(f"{family_id} takes parameters {names}, got {sorted(params)}")
    for key in ("n", "m"):
        if key in params:
            v = params[key]
            if int(v) != v or v < 2:
                raise DomainError(f"{family_id}: {key} must be an integer >= 2, got {v}")
    if "a" in params and not math.isfinite(float(params["a"])):
        raise DomainError("two_bump: a must be finite")
    g, gd, gdec, ddec, bps = factory(**params)
    clean = {k: (int(v) if k in ("n", "m") else float(v)) for k, v in params.items()}
    return SpectralModel(
        family=family_id,
        params=clean,
        f=lambda y: g(np.asarray(y, dtype=float)) ** 2,
        g=lambda y: g(np.asarray(y, dtype=float)),
        g_deriv=lambda y: gd(np.asarray(y, dtype=float)),
        g_decay=gdec,
        g_deriv_decay=ddec,
        breakpoints=bps,
        admissibility_declared=True,
    )


def custom_density(g: Callable, g_decay: Decay, g_deriv: Optional[Callable] = None,
                   g_deriv_decay: Optional[Decay] = None, fd_step: float = FD_STEP,
                   breakpoints=(), name: str = "custom") -> SpectralModel:
    """User-supplied density given through ``g = sqrt(f)``.

    Without an analytic ``g_deriv`` a central difference with step
    ``fd_step * max(1, |y|)`` is used.
    """
    if g_deriv is None:
        def g_deriv(y):
            y = np.asarray(y, dtype=float)
            h = fd_step * np.maximum(1.0, np.abs(y))
            return (g(y + h) - g(y - h)) / (2.0 * h)
    if g_deriv_decay is None:
        g_deriv_decay = g_decay
    return SpectralModel(
        family=name,
        params={"fd_step": fd_step},
        f=lambda y: np.asarray(g(np.asarray(y, dtype=float)), dtype=float) ** 2,
        g=lambda y: np.asarray(g(np.asarray(y, dtype=float)), dtype=float),
        g_deriv=lambda y: np.asarray(g_deriv(np.asarray(y, dtype=float)), dtype=float),
        g_decay=g_decay,
        g_deriv_decay=g_deriv_decay,
        breakpoints=tuple(breakpoints),
    )


def scale_density(model: SpectralModel, c: float) -> SpectralModel:
    """The density ``c**2 * f`` (so ``g`` scales by ``|c|``)."""
    c = abs(float(c))
    g, gd, f = model.g, model.g_deriv, model.f
    return replace(
        model,
        params={**model.params, "scale": c},
        f=lambda y: c * c * f(y),
        g=lambda y: c * g(y),
        g_deriv=lambda y: c * gd(y),
        g_decay=model.g_decay.scaled(c),
        g_deriv_decay=model.g_deriv_decay.scaled(c),
    )


def _squared(d: Decay) -> Decay:
    if d.kind == "compact":
        return d
    return Decay(d.kind, 2.0 * d.rate, d.scale ** 2, d.start)


def _product(d: Decay, factor: float, extra_power: float = 0.0) -> Decay:
    """Envelope of ``h * w * |y|**extra_power`` where ``|w| <= factor``."""
    if d.kind == "compact":
        return d
    if d.kind == "polynomial":
        return Decay("polynomial", d.rate - extra_power, d.scale * factor, d.start)
    # exp(-r|y|) |y|^q <= (q/(e r'))^q exp(-(r - r')|y|) with r' = r/2
    half = 0.5 * d.rate
    c = (extra_power / (math.e * half)) ** extra_power if extra_power else 1.0
    return Decay("exponential", half if extra_power else d.rate, d.scale * factor * c, d.start)


def _sum(d1: Decay, d2: Decay) -> Decay:
    if d1.kind == d2.kind == "compact":
        return Decay("compact", max(d1.rate, d2.rate))
    if "compact" in (d1.kind, d2.kind):
        return d2 if d1.kind == "compact" else d1
    start = max(d1.start, d2.start, 1.0)
    if d1.kind == d2.kind == "polynomial":
        return Decay("polynomial", min(d1.rate, d2.rate), d1.scale + d2.scale, start)
    if d1.kind == d2.kind == "exponential":
        return Decay("exponential", min(d1.rate, d2.rate), d1.scale + d2.scale, start)
    poly, expo = (d1, d2) if d1.kind == "polynomial" else (d2, d1)
    # exp(-r|y|) <= (q/(e r))^q |y|^-q
    q = max(poly.rate, 0.0)
    c = (q / (math.e * expo.rate)) ** q if q else 1.0
    return Decay("polynomial", poly.rate, poly.scale + expo.scale * c, start)


def density_integrand(model: SpectralModel) -> Integrand:
    return Integrand(model.f, _squared(model.g_decay), model.breakpoints, "f")


def correlation(model: SpectralModel, tau: float, rel_tol: float = 1e-10) -> float:
    """``R(tau) = ∫ f(y) exp(-i y tau) dy`` (real for even ``f``)."""
    res = integrate_oscillatory(density_integrand(model), float(tau), rel_tol)
    return res.real


def _breaks(model, transforms):
    return tuple(sorted(set(model.breakpoints) | set(transforms.breakpoints)))


def _integrands(model: SpectralModel, transforms: WaveletTransforms) -> dict:
    g, gd = model.g, model.g_deriv
    ph, phd = transforms.phi_hat, transforms.phi_hat_deriv
    gdec, ddec = model.g_decay, model.g_deriv_decay
    bps = _breaks(model, transforms)
    if transforms.phi_support is not None:
        wave = Decay("compact", transforms.phi_support)
        dec_a1 = dec_b1 = wave
    else:
        dec_a1 = _sum(_product(ddec, transforms.phi_sup), _product(gdec, transforms.phi_deriv_sup))
        dec_b1 = _product(gdec, transforms.phi_sup)
    return {
        "int g": Integrand(lambda y: g(y), gdec, bps, "g"),
        "int |g'||y|": Integrand(lambda y: np.abs(gd(y)) * np.abs(y), _product(ddec, 1.0, 1.0), bps,
                                 "|g'||y|"),
        "int g|y|": Integrand(lambda y: g(y) * np.abs(y), _product(gdec, 1.0, 1.0), bps, "g|y|"),
        "int |g'||phi_hat|": Integrand(lambda y: np.abs(gd(y)) * np.abs(ph(y)),
                                       _product(ddec, transforms.phi_sup) if transforms.phi_support is None
                                       else Decay("compact", transforms.phi_support), bps,
                                       "|g'||phi_hat|"),
        "int g|phi_hat'|": Integrand(lambda y: g(y) * np.abs(phd(y)),
                                     _product(gdec, transforms.phi_deriv_sup) if transforms.phi_support is None
                                     else Decay("compact", transforms.phi_support), bps,
                                     "g|phi_hat'|"),
        "A1": Integrand(lambda y: np.abs(gd(y)) * np.abs(ph(y)) + g(y) * np.abs(phd(y)), dec_a1, bps, "A1"),
        "B1": Integrand(lambda y: g(y) * np.abs(ph(y)), dec_b1, bps, "B1"),
        "A": Integrand(lambda y: np.abs(gd(y)) * np.abs(y) + g(y),
                       _sum(_product(ddec, 1.0, 1.0), gdec), bps, "A"),
    }


def plan_constants(model: SpectralModel, transforms: WaveletTransforms,
                   rel_tol: float = 1e-8) -> PlanConstants:
    """The constants A, B, A1, B1 and R(0) for one (density, wavelet) pair."""
    ig = _integrands(model, transforms)
    c2 = transforms.C2
    A = c2 / SQRT_2PI * integrate_line(ig["A"], rel_tol).real
    B = c2 / SQRT_2PI * integrate_line(ig["int g|y|"], rel_tol).real
    A1 = integrate_line(ig["A1"], rel_tol).real / SQRT_2PI
    B1 = integrate_line(ig["B1"], rel_tol).real / SQRT_2PI
    R0 = integrate_line(density_integrand(model), rel_tol).real
    return PlanConstants(A=max(A, 0.0), B=max(B, 0.0), A1=max(A1, 0.0), B1=max(B1, 0.0), R0=max(R0, 0.0))


# admissibility --------------------------------------------------------------

@dataclass
class Condition:
    name: str
    value: float
    finite: bool
    detail: str = ""


@dataclass
class AdmissibilityReport:
    conditions: list

    @property
    def ok(self) -> bool:
        return all(c.finite for c in self.conditions)

    @property
    def failing(self) -> list:
        return [c.name for c in self.conditions if not c.finite]

    def as_dict(self) -> dict:
        return {c.name: {"value": c.value, "finite": c.finite, "detail": c.detail}
                for c in self.conditions}


def growing_partial_integrals(fn, r0: float = 4.0, doublings: int = 12, breakpoints=()):
    """Partial integrals of ``fn`` over ``[-r, r]`` for ``r = r0 * 2**i``.

    Returns ``(radii, partials)``.
    """
    radii = r0 * 2.0 ** np.arange(doublings + 1)
    partials = [integrate_interval(fn, -r0, r0, rel_tol=1e-7, breakpoints=breakpoints).real]
    for lo, hi in zip(radii[:-1], radii[1:]):
        shell = (integrate_interval(fn, lo, hi, rel_tol=1e-7, breakpoints=breakpoints).real
                 + integrate_interval(fn, -hi, -lo, rel_tol=1e-7, breakpoints=breakpoints).real)
        partials.append(partials[-1] + shell)
    return radii, np.array(partials)


def _converges(partials: np.ndarray) -> tuple[bool, str]:
    d = np.diff(partials)
    last, prev = abs(d[-1]), abs(d[-2])
    total = abs(partials[-1])
    if last <= 1e-14 * max(total, 1.0):
        return True, "tail negligible"
    ratio = last / prev if prev > 0 else math.inf
    if ratio < 0.9:
        tail = last * ratio / (1.0 - ratio)
        return True, f"shell ratio {ratio:.3f}, extrapolated tail {tail:.2e}"
    return False, f"shell contributions not shrinking (ratio {ratio:.3f})"


def check_admissibility(model: SpectralModel, transforms: WaveletTransforms,
                        doublings: int = 12) -> AdmissibilityReport:
    """Numerical certificate for the integrability/boundedness conditions.

    Each integral is tested by growing partial integrals over dyadic shells;
    a condition is flagged when the shell contributions stop shrinking.
    """
    ig = _integrands(model, transforms)
    bps = _breaks(model, transforms)
    r0 = max(4.0, max((abs(b) for b in bps), default=0.0) + 1.0)
    conds = []
    for name in ("int g", "int |g'||y|", "int g|y|", "int |g'||phi_hat|", "int g|phi_hat'|"):
        fn = ig[name]
        try:
            with np.errstate(all="ignore"):
                radii, partials = growing_partial_integrals(fn, r0, doublings, bps)
        except NonConvergence as exc:
            conds.append(Condition(name, math.inf, False, f"quadrature failed: {exc}"))
            continue
        if not np.all(np.isfinite(partials)):
            conds.append(Condition(name, math.inf, False, "non-finite partial integral"))
            continue
        ok, detail = _converges(partials)
        conds.append(Condition(name, float(partials[-1]) if ok else math.inf, ok, detail))
    ys = np.linspace(-r0 * 4, r0 * 4, 200_001)
    sup_phi = float(np.max(np.abs(transforms.phi_hat(ys))))
    sup_g = float(np.max(model.g(ys)))
    conds.append(Condition("sup |phi_hat|", sup_phi, math.isfinite(sup_phi)))
    conds.append(Condition("sup g", sup_g, math.isfinite(sup_g)))
    far = r0 * 2.0 ** doublings
    f_far = float(np.max(model.f(np.array([-far, far]))))
    f_max = float(np.max(model.f(ys)))
    vanish = f_far <= 1e-3 * max(f_max, 1e-300) or f_max == 0.0
    conds.append(Condition("f -> 0 at infinity", f_far, vanish, f"f({far:.3g}) = {f_far:.3e}"))
    return AdmissibilityReport(conds)
