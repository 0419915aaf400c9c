"""Simulation, exact computation and statistical checks for elephant random
walks with delays, focused on the zero / nonzero step counts."""

from .pmf import Pmf
from .walk import (
    FIRST_AND_LAST,
    FIRST_ONLY,
    FULL,
    LAST_ONLY,
    MemoryKernel,
    ModelIntegrityError,
    ProbTriple,
    WalkState,
    advance,
    first_step,
    last_window,
    simulate_path,
    step_distribution,
)

__version__ = "0.1.0"
