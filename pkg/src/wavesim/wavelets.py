"""Frequency-domain scaling functions and wavelets.

Conventions: ``phi_hat(y) = ∫ phi(x) exp(-i x y) dx``, so an orthonormal
scaling function has ``sum_k |phi_hat(y + 2 pi k)|^2 = 1`` and
``phi_hat(y) = m0(y/2) phi_hat(y/2)``; the mother wavelet is
``psi_hat(y) = conj(m0(y/2 + pi)) exp(-i y/2) phi_hat(y/2)``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import comb

from .errors import DomainError, ScanTooNarrow

TWO_PI = 2.0 * math.pi
FD_STEP = 1e-5
SAFETY = 1.05


@dataclass(frozen=True)
class WaveletSpec:
    family: str = "meyer"
    order: Optional[int] = None
    product_depth: int = 24

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in ("meyer", "daubechies"):
            raise DomainError(f"unsupported wavelet family {self.family!r}")
        if fam == "daubechies":
            if self.order is None or int(self.order) < 1:
                raise DomainError("Daubechies order must be >= 1")
            if self.product_depth < 8:
                raise DomainError("product_depth must be >= 8")

    def as_dict(self) -> dict:
        d = {"family": self.family}
        if self.family == "daubechies":
            d.update(order=int(self.order), product_depth=int(self.product_depth))
        return d


@dataclass(frozen=True)
class WaveletTransforms:
    """Vectorised evaluators of phi_hat, psi_hat and their derivatives."""

    spec: WaveletSpec
    phi_hat: Callable[[np.ndarray], np.ndarray]
    psi_hat: Callable[[np.ndarray], np.ndarray]
    phi_hat_deriv: Callable[[np.ndarray], np.ndarray]
    psi_hat_deriv: Callable[[np.ndarray], np.ndarray]
    C1: float = math.nan
    C2: float = math.nan
    # sup |phi_hat| and sup |phi_hat'|, used to scale tail envelopes
    phi_sup: float = 1.0
    phi_deriv_sup: float = math.nan
    # radius beyond which phi_hat / psi_hat vanish (None: not compact)
    phi_support: Optional[float] = None
    psi_support: Optional[float] = None
    breakpoints: tuple = field(default_factory=tuple)
    filter: Optional[np.ndarray] = None

    def m0(self, xi):
        if self.filter is None:
            raise AttributeError("closed-form wavelet carries no filter")
        return _m0(self.filter, xi)


# Meyer ---------------------------------------------------------------------

def _nu(x):
    x = np.clip(x, 0.0, 1.0)
    return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)


def _nu_deriv(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 140.0 * x**3 * (1.0 - x) ** 3, 0.0)


def meyer_phi_hat(y):
    a = np.abs(np.asarray(y, dtype=float))
    x = 3.0 * a / TWO_PI - 1.0
    out = np.cos(0.5 * math.pi * _nu(x))
    return np.where(a <= 4.0 * math.pi / 3.0, out, 0.0)


def meyer_phi_hat_deriv(y):
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    x = 3.0 * a / TWO_PI - 1.0
    d = -np.sin(0.5 * math.pi * _nu(x)) * 0.5 * math.pi * _nu_deriv(x) * 3.0 / TWO_PI
    return np.sign(y) * np.where(a <= 4.0 * math.pi / 3.0, d, 0.0)


def meyer_psi_hat(y):
    y = np.asarray(y, dtype=float)
    return np.exp(-0.5j * y) * meyer_phi_hat(np.abs(y) - TWO_PI) * meyer_phi_hat(0.5 * y)


def meyer_psi_hat_deriv(y):
    y = np.asarray(y, dtype=float)
    s = np.sign(y)
    a = meyer_phi_hat(np.abs(y) - TWO_PI)
    b = meyer_phi_hat(0.5 * y)
    da = s * meyer_phi_hat_deriv(np.abs(y) - TWO_PI)
    db = 0.5 * meyer_phi_hat_deriv(0.5 * y)
    e = np.exp(-0.5j * y)
    return e * (-0.5j * a * b + da * b + a * db)


@functools.lru_cache(maxsize=None)
def build_meyer() -> WaveletTransforms:
    """Meyer wavelet with the degree-7 polynomial transition."""
    bps = tuple(s * v for v in (TWO_PI / 3, 2 * TWO_PI / 3, 4 * TWO_PI / 3) for s in (-1.0, 1.0))
    t = WaveletTransforms(
        spec=WaveletSpec("meyer"),
        phi_hat=lambda y: meyer_phi_hat(y).astype(complex),
        psi_hat=meyer_psi_hat,
        phi_hat_deriv=lambda y: meyer_phi_hat_deriv(y).astype(complex),
        psi_hat_deriv=meyer_psi_hat_deriv,
        phi_support=4.0 * math.pi / 3.0,
        psi_support=8.0 * math.pi / 3.0,
        breakpoints=tuple(sorted(bps)),
    )
    c1, c2 = estimate_sup_bounds(t, scan_radius=3.0 * math.pi, scan_points=100_001)
    dsup = float(np.max(np.abs(meyer_phi_hat_deriv(np.linspace(0, 4.2, 20001)))))
    return _replace(t, C1=c1, C2=c2, phi_deriv_sup=SAFETY * dsup)


# Daubechies ----------------------------------------------------------------

def daubechies_filter(order: int) -> np.ndarray:
    """Minimum-phase Daubechies low-pass filter with ``order`` vanishing moments.

    Normalised so the taps sum to sqrt(2).
    """
    order = int(order)
    if order < 1:
        raise DomainError("Daubechies order must be >= 1")
    if order == 1:
        return np.array([1.0, 1.0]) / math.sqrt(2.0)
    # P(y) = sum_k C(N-1+k, k) y^k with y = sin^2(xi/2) = (2 - z - 1/z)/4
    coeffs = [comb(order - 1 + k, k, exact=True) for k in range(order)]
    yroots = np.roots(coeffs[::-1])
    zroots = []
    for yr in yroots:
        c = 1.0 - 2.0 * yr
        disc = np.sqrt(c * c - 1.0 + 0j)
        z1, z2 = c + disc, c - disc
        zroots.append(z1 if abs(z1) < 1.0 else z2)
    poly = np.array([1.0 + 0j])
    for _ in range(order):
        poly = np.convolve(poly, [1.0, 1.0])
    for z in zroots:
        poly = np.convolve(poly, [1.0, -z])
    h = np.real(poly)
    return h * math.sqrt(2.0) / h.sum()


def _m0(h, xi):
    z = np.exp(-1j * np.asarray(xi, dtype=float))
    out = np.full(z.shape, h[-1] / math.sqrt(2.0), dtype=complex)
    for hk in h[-2::-1]:
        out = out * z + hk / math.sqrt(2.0)
    return out


def _daub_phi_hat(h, depth, y, corrected=True):
    y = np.asarray(y, dtype=float)
    out = np.ones(y.shape, dtype=complex)
    scale = 1.0
    for _ in range(depth):
        scale *= 0.5
        out *= _m0(h, y * scale)
    if corrected:
        # phi_hat(w) = exp(-i c w) (1 + O(w^2)) near 0, c the centre of mass
        c = float(np.dot(np.arange(h.size), h) / h.sum())
        out *= np.exp(-1j * c * y * scale)
    return out


@functools.lru_cache(maxsize=None)
def build_daubechies(order: int, product_depth: int = 24) -> WaveletTransforms:
    """Daubechies scaling function / wavelet via the truncated infinite product."""
    spec = WaveletSpec("daubechies", int(order), int(product_depth))
    h = daubechies_filter(spec.order)
    depth = spec.product_depth

    def phi_hat(y):
        return _daub_phi_hat(h, depth, y)

    def psi_hat(y):
        y = np.asarray(y, dtype=float)
        return np.conj(_m0(h, 0.5 * y + math.pi)) * np.exp(-0.5j * y) * phi_hat(0.5 * y)

    t = WaveletTransforms(
        spec=spec,
        phi_hat=phi_hat,
        psi_hat=psi_hat,
        phi_hat_deriv=_central_difference(phi_hat),
        psi_hat_deriv=_central_difference(psi_hat),
        filter=h,
    )
    c1, c2 = estimate_sup_bounds(t)
    ys = np.linspace(-200.0, 200.0, 100_001)
    dsup = float(np.max(np.abs(t.phi_hat_deriv(ys))))
    psup = float(np.max(np.abs(phi_hat(ys))))
    return _replace(t, C1=c1, C2=c2, phi_sup=SAFETY * psup, phi_deriv_sup=SAFETY * dsup)


def _central_difference(fn, step=FD_STEP):
    def deriv(y):
        y = np.asarray(y, dtype=float)
        return (fn(y + step) - fn(y - step)) / (2.0 * step)
    return deriv


def _replace(t: WaveletTransforms, **kw) -> WaveletTransforms:
    from dataclasses import replace
    return replace(t, **kw)


# sup bounds ----------------------------------------------------------------

def _scan_grid(scan_radius, scan_points, dense_radius):
    r_dense = min(scan_radius, dense_radius)
    dense = np.linspace(-r_dense, r_dense, int(scan_points))
    if scan_radius <= r_dense:
        return dense
    # sparse log-spaced tail; the sup of these decaying envelopes sits near the origin
    tail = np.geomspace(r_dense, scan_radius, 20_001)
    return np.concatenate([dense, tail, -tail])


def estimate_sup_bounds(transforms: WaveletTransforms, scan_radius: float | None = None,
                        scan_points: int = 100_001, dense_radius: float = 200.0):
    """Grid estimates of ``sup |psi_hat|`` and ``sup |psi_hat'|`` times 1.05.

    The scan must reach far enough that ``|psi_hat|`` is below 1e-6 on the
    outermost 1% of the range, otherwise :class:`ScanTooNarrow` is raised.
    """
    if scan_radius is None:
        scan_radius = 3.0 * math.pi if transforms.psi_support else _default_scan_radius(transforms)
    band = np.linspace(0.99 * scan_radius, scan_radius, 2001)
    band = np.concatenate([band, -band])
    edge = float(np.max(np.abs(transforms.psi_hat(band))))
    if edge >= 1e-6:
        raise ScanTooNarrow(
            f"|psi_hat| reaches {edge:.3e} near the scan boundary {scan_radius:.4g}"
        )
    ys = _scan_grid(scan_radius, scan_points, dense_radius)
    c1 = float(np.max(np.abs(transforms.psi_hat(ys))))
    c2 = float(np.max(np.abs(transforms.psi_hat_deriv(ys))))
    return SAFETY * c1, SAFETY * c2


def _default_scan_radius(transforms: WaveletTransforms) -> float:
    r = 256.0
    while r < 1e9:
        band = np.linspace(0.99 * r, r, 2001)
        if np.max(np.abs(transforms.psi_hat(np.concatenate([band, -band])))) < 1e-6:
            return r
        r *= 2.0
    raise ScanTooNarrow("psi_hat does not fall below 1e-6 before |y| = 1e9")
