"""Isotropic Gaussian fields on the sphere cross time: excursion areas, chaos variances, limit laws."""

__version__ = "0.1.0"

from .covariance import CovarianceModel, ModelError, Multipole, classify_regime, load_model
from .excursion import chaos_projections, m_functional, m_monochromatic
from .simulate import TimeGrid, simulate_field
from .special import SphereQuadrature, gaunt3
from .variance import asymptotic_prediction, var_chaos, var_total

__all__ = [
    "CovarianceModel", "ModelError", "Multipole", "SphereQuadrature", "TimeGrid",
    "asymptotic_prediction", "chaos_projections", "classify_regime", "gaunt3", "load_model",
    "m_functional", "m_monochromatic", "simulate_field", "var_chaos", "var_total",
]
