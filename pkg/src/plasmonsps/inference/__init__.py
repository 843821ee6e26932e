"""Analysis of detection streams: correlations, fits and derived metrics."""

from .blinking import BlinkingStats, blinking_stats, fit_two_gaussians
from .correlation import (CorrelationHistogram, brute_force_correlate, correlate,
                          correlate_channels, g2_cw, normalize_cw)
from .fits import (DecayHistogram, PurityResult, cos2_model, decay_histogram, decay_model,
                   exp_gauss, fit_antibunching_cw, fit_cos_squared, fit_decay, fit_saturation,
                   g2_cw_model, measured_rate, pulsed_purity, saturation_model)
from .metrics import MetricsReport, derived_metrics, gamma_sp
from .nlls import FitResult, least_squares, numeric_jacobian, poisson_mle

__all__ = [
    "BlinkingStats", "CorrelationHistogram", "DecayHistogram", "FitResult", "MetricsReport",
    "PurityResult", "blinking_stats", "brute_force_correlate", "correlate",
    "correlate_channels", "cos2_model", "decay_histogram", "decay_model", "derived_metrics",
    "exp_gauss", "fit_antibunching_cw", "fit_cos_squared", "fit_decay", "fit_saturation",
    "fit_two_gaussians", "g2_cw", "g2_cw_model", "gamma_sp", "least_squares",
    "measured_rate", "normalize_cw", "numeric_jacobian", "poisson_mle", "pulsed_purity",
    "saturation_model",
]
