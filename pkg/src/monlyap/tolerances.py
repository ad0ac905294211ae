"""Centralized numerical tolerances shared by every module.

Keeping the constants in one record makes test expectations reproducible:
all validation code reads from DEFAULT instead of sprinkling magic numbers.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    unit_norm: float = 1e-10            # state vectors stay normalized to this
    gate_norm_drift: float = 1e-12      # norm change allowed per gate application
    unitarity: float = 1e-10            # ||U+U - I|| for gates checked in debug mode
    hermiticity: float = 1e-10          # density matrices
    trace_unit: float = 1e-10
    psd_floor: float = -1e-10           # eigenvalues of density matrices may dip this low
    kraus_completeness: float = 1e-12
    orthonormality: float = 1e-8        # tracked Lyapunov frames
    entropy_slack: float = 1e-9         # S may exceed |A| ln 2 by at most this
    width_bound_slack: float = 1e-9
    annihilation_norm: float = 1e-150   # below this a measured branch is dead
    rank_collapse_residual: float = 1e-13   # normalized Gram-Schmidt residual floor
    convergence_floor: float = 1e-9     # |mean| scale below which std tests go absolute


DEFAULT = Tolerances()

# Optional expensive validation (e.g. gate unitarity checks inside hot loops).
DEBUG_CHECKS = False
