"""Asymptotics of ridge logistic regression with missing or noisy covariates."""
from .bayes import BayesParams, BayesSolution, solve_overlap
from .kernels import prox_logistic, moreau_envelope_derivatives
from .lab import DesignSpec, GroundTruth, Observation, fit_ridge_logistic, make_dataset
from .quadrature import make_rule
from .state_evolution import (
    FixedPoint, ProblemParams, StatePair, asymptotic_loss, optimal_lambda, phi_angle,
    phi_test, solve_fixed_point, system_residual,
)

__all__ = [
    "BayesParams", "BayesSolution", "DesignSpec", "FixedPoint", "GroundTruth", "Observation",
    "ProblemParams", "StatePair", "asymptotic_loss", "fit_ridge_logistic", "make_dataset",
    "make_rule", "moreau_envelope_derivatives", "optimal_lambda", "phi_angle", "phi_test",
    "prox_logistic", "solve_fixed_point", "solve_overlap", "system_residual",
]
