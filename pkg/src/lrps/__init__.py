"""Low-rank pre-smoothing (LRPS), reduced-rank regression (RRR) and OLS
for multi-response linear regression ``Y = X B + E``."""

from lrps.estimators import (
    FittedModel,
    RegressionData,
    Smoother,
    fit,
    lrps_fit,
    ols_fit,
    predict,
    presmooth,
    rrr_fit,
)
from lrps.exceptions import (
    ConfigError,
    EigenTieError,
    LRPSError,
    PipelineError,
    ReplicationError,
    SingularDesignError,
)
from lrps.model_selection import CvResult, cv_mspe, select_k

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CvResult",
    "EigenTieError",
    "FittedModel",
    "LRPSError",
    "PipelineError",
    "RegressionData",
    "ReplicationError",
    "SingularDesignError",
    "Smoother",
    "cv_mspe",
    "fit",
    "lrps_fit",
    "ols_fit",
    "predict",
    "presmooth",
    "rrr_fit",
    "select_k",
]
