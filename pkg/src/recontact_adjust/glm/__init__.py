from .fits import (
    DesignMatrix,
    GlmFit,
    ZinbFit,
    draw_coefficients,
    fit_logistic,
    fit_negbin,
    fit_zinb,
    loglik_zinb,
    predict_expected_count,
)
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "DesignMatrix",
    "GlmFit",
    "ZinbFit",
    "draw_coefficients",
    "fit_logistic",
    "fit_negbin",
    "fit_zinb",
    "loglik_zinb",
    "predict_expected_count",
]
