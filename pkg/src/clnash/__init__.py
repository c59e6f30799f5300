"""Closed-loop Nash equilibria of an N-agent trading game with shared price impact."""
from .errors import (BranchInvalid, ConfigError, DenominatorVanished, DomainError,
                     NoAdmissibleRoot, NoConvergence, SignConstraintViolated, SolverError)
from .model import (EquilibriumKind, ModelParams, Policy, ScalingMode, apply_scaling,
                    load_config, validate)

__version__ = "0.1.0"
