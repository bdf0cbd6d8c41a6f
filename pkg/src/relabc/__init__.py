"""Rejection ABC with acceptance regions calibrated by a relative-entropy budget.

The workflow for one data set: summarise it by its sufficient statistic,
build the leading-order quadratic form of the divergence between the exact
and the ABC posterior, pick the largest region whose predicted divergence
stays below a tolerance, then sample.
"""

__version__ = "0.1.0"

from .calibrate import (
    CalibrationResult,
    calibrate,
    calibrate_ball,
    calibrate_ellipse_closed,
    calibrate_ellipse_numeric,
    region_volume,
)
from .diagnostics import (
    BiasPrediction,
    bias_exponential_rate,
    bias_generic,
    bias_normal_mean,
    bias_normal_variance,
    exponential_bias_limit,
    rejection_ratio_generic,
    rejection_ratio_normal,
)
from .estimator import EntropyCalibrator, RejectionABC, sufficient_statistic
from .exceptions import *  # noqa: F401,F403
from .expansion import (
    REQuadraticForm,
    form_for,
    re_form_exponential,
    re_form_generic,
    re_form_normal,
    weight_mean,
)
from .models import (
    EXPONENTIAL,
    NORMAL,
    GammaParams,
    NormalGammaParams,
    NormalTheta,
    ObservedStat,
    RateTheta,
    natural_moment_table,
    sample_prior,
    sample_stat,
    update,
)
from .oracle import QuadratureSpec, acceptance_probability, kl_numeric, perturbed_bias, perturbed_moment
from .sampler import AbcRun, AcceptanceRegion, Estimate, estimate, run_abc
