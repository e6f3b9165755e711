"""Solvers for the Bayesian game of locks, bombs and testing."""
from .model import (Allocation, DefenderMix, FixedLocks, GameSpec, IIDLocks,
                    LockConfig, Signal, SpecError, damage_given_locks,
                    explosion_prob, validate_spec)
from .posterior import (critical_ratio_A, critical_ratio_B, marginal_no_lock,
                        minus_count_dist, posterior_locks, signal_likelihood,
                        signal_prob)
from .symmetric import depth, uap_allocate, value, value_given_x
from .equilibrium import (NonConvergenceError, best_response, expected_loss,
                          solve_2x1, solve_general, solve_noninformative)
from .oracle import (exhaustive_best_allocation, exhaustive_symmetric_value,
                     grid_min_defender, simulate)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "DefenderMix", "FixedLocks", "GameSpec", "IIDLocks", "LockConfig",
    "Signal", "SpecError", "damage_given_locks", "explosion_prob", "validate_spec",
    "critical_ratio_A", "critical_ratio_B", "marginal_no_lock", "minus_count_dist",
    "posterior_locks", "signal_likelihood", "signal_prob",
    "depth", "uap_allocate", "value", "value_given_x",
    "NonConvergenceError", "best_response", "expected_loss", "solve_2x1",
    "solve_general", "solve_noninformative",
    "exhaustive_best_allocation", "exhaustive_symmetric_value", "grid_min_defender",
    "simulate",
]
