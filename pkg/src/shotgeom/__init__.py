"""Geometric functionals of shot-noise fields driven by marked Poisson input."""
from .configuration import MarkedConfiguration, superpose
from .errors import (DegenerateConfigurationError, DegenerateSampleError,
                     InvalidParameterError, ReplicateBudgetExceeded,
                     SingularEvaluationError)
from .field import FieldGrid, build_grid, eval_field, eval_gradient
from .geometry import LatticeWindow, Region, lattice_boundary, make_cube_window, restrict
from .kernels import FieldSpec, RadialKernel, TokenKernel
from .process import MarkDistribution, SeedStream, sample_poisson

__version__ = "0.1.0"
