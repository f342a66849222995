"""Finite-element simulation and spectral analysis of piezoelectric
sandwich beams under static boundary feedback."""

from .errors import AssemblyError, ConfigError, NumericalError, ValidationError
from .materials import (CompositeSpec, DEFAULT_SPEC, DerivedCoefficients,
                        check_definiteness, derive_mm, derive_rn)
from .operators import EllipticSolver, Grid, apply_j, apply_pxi, build_grid
from .models import (DiscreteSystem, ModelKind, assemble, bending_free_subsystem,
                     energy, inertial_sliding_subsystem)
from .control import FeedbackLaw, close_loop, observe

__version__ = "0.1.0"
