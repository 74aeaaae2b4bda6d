"""Morse and Maslov indices for discretized Schrodinger operators.

The package discretizes ``-Delta + V`` on ``[-1, 1]^d`` with Dirichlet,
Neumann, Robin or mixed conditions, follows the trace path of the rescaled
domains around a rectangle in ``(lambda, t)`` and counts its intersections
with the boundary-condition subspace.
"""

from .assembly import (
    SEGMENTS,
    BoundaryCondition,
    GammaPath,
    PencilFamily,
    assemble_pencil,
    auto_lambda,
    build_stiffness_mass,
    kernel_basis,
    morse_index,
)
from .asymptotics import compute_boundary_form, eigenvalue_expansion_fit, verify_small_tau_morse
from .dtn import TraceMaps, dirichlet_to_neumann, neumann_to_dirichlet, upsilon_frame
from .estimators import MorseMaslovIndex, SmallTauExpansion
from .exceptions import *  # noqa: F401,F403
from .experiments import EXPERIMENTS, ExperimentConfig, VerificationReport, emit_report, run_experiment
from .grid import GridDomain, PotentialField, build_square_grid
from .maslov import (
    MaslovProblem,
    crossing_form,
    detect_crossings,
    maslov_closed_loop,
    maslov_index_crossing_form,
    maslov_index_spectral_flow,
    spectral_flow,
)
from .symplectic import (
    LagrangianFrame,
    SymplecticSpace,
    build_graph_lagrangian,
    intersection_dim,
    souriau_unitary,
    symplectic_form,
)

__version__ = "0.1.0"
