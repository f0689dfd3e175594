"""Wavelet-expansion models of stationary Gaussian processes with
guaranteed L_p accuracy for powers and products."""

from .errors import (AdmissibilityError, BoundViolation, BudgetTooTight, CacheMiss, DomainError,
                     GridMismatch, NegativeDeficit, NonConvergence, ScanTooNarrow, WavesimError)
from .numerics import Decay, Integrand, gamma, integrate_line, integrate_oscillatory, log_gamma
from .wavelets import WaveletSpec, build_daubechies, build_meyer
from .spectra import (PlanConstants, SpectralModel, check_admissibility, correlation,
                      custom_density, make_density, plan_constants)
from .planner import (AccuracySpec, ProductPlan, TruncationPlan, delta1_for_power, plan_power,
                      plan_product, truncation_from_budget)
from .coeffs import CoefficientCache, DirectCoefficients, a0k, bjk, build_cache, verify_decay
from .sampler import (SamplePath, draw_coefficients, evaluate_base, power_path, product_path,
                      time_grid)
from .verify import (VerificationReport, empirical_covariance, empirical_reliability,
                     moment_inequality_check, variance_deficit)

__version__ = "0.1.0"
