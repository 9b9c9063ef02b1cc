"""Kahler Einstein structures of diagonal type on the nonzero cotangent bundle
of a constant positive curvature manifold, with numerical certification."""

from .base_geometry import BaseModel, CotangentPoint, DomainError, eval_metric
from .connection_curvature import (
    curvature_blocks,
    holomorphic_sectional,
    nabla_k_norm,
    qps_explicit,
    qps_generic,
    ricci_trace,
)
from .einstein_solver import IntegralB1, ThetaIntegrand, b1_of_t, einstein_residual, ode_residual
from .harness_cli import ConfigError, RunConfig, emit_report, load_config, run_suite
from .lift_structures import (
    Exponential,
    ParameterDomainError,
    ParameterFamily,
    Polynomial,
    Power,
)

__version__ = "0.1.0"
