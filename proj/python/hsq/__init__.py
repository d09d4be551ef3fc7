"""Hessian-based adaptive sparse quadrature for Bayesian inverse problems."""

from ._core import InvalidArgument, checkpoint_ladder, default_config, estimate_rate, hermite_rule, run

__all__ = ["InvalidArgument", "checkpoint_ladder", "default_config", "estimate_rate", "hermite_rule", "run"]
