"""Shooting-method construction of bubble-cluster CMC spheres.

Numerical library and CLI for the meridian-curve ODE of constant-mean-
curvature surfaces of revolution in asymptotically Schwarzschild
3-manifolds: adaptive integration with event detection, trichotomy
classification, critical-parameter searches, surface reconstruction, and
verification of closed-form integral identities.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .metric import MetricParams, MetricDomainError, ConfigError
from .ode import (
    State,
    OdeConfig,
    Orbit,
    Event,
    Terminal,
    OdeDomainError,
    integrate,
    rho_exact,
    rho_expanded,
    rhs,
    delaunay_rhs,
)

__all__ = [
    "__version__",
    "MetricParams",
    "MetricDomainError",
    "ConfigError",
    "State",
    "OdeConfig",
    "Orbit",
    "Event",
    "Terminal",
    "OdeDomainError",
    "integrate",
    "rho_exact",
    "rho_expanded",
    "rhs",
    "delaunay_rhs",
]
