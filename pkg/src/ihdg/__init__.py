"""Iterative HDG (iHDG) solvers for linear transport, shallow water and
convection-diffusion on structured quad/hex meshes."""
from __future__ import annotations

from .flux import FluxScheme
from .mesh import Mesh, build_box
from .models import (ConvectionDiffusion, Problem, ShallowWater, Transport, EXPERIMENTS,
                     evaluate_exact)
from .reference import ReferenceElement, build_reference
from .solver import (Discretization, IterationReport, SolverConfig, discretize,
                     power_iterate, solve)
from .timestep import TimeLoopConfig, advance, time_discretization

__all__ = [
    "ConvectionDiffusion", "Discretization", "EXPERIMENTS", "FluxScheme", "IterationReport",
    "Mesh", "Problem", "ReferenceElement", "ShallowWater", "SolverConfig", "TimeLoopConfig",
    "Transport", "advance", "build_box", "build_reference", "discretize", "evaluate_exact",
    "power_iterate", "solve", "time_discretization",
]
__version__ = "0.1.0"
