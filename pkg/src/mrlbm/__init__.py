"""Multiresolution lattice Boltzmann solver for 1D meshes with a level jump."""

from .exact import WaveProblem, exact_u, exact_v, gaussian_u0
from .mesh import MeshConfig, MultiLevelGrid, build_jump_mesh, build_uniform_mesh, cell_center
from .metrics import (
    ErrorReport,
    convergence_rates,
    diff_vs_ref,
    error_vs_exact,
    l1_norm,
    reflected_diff,
)
from .multiresolution import compute_weights, predict, project, reconstruct, update_ghosts
from .scheme import (
    SchemeSpec,
    collide,
    d1q3_wave_scheme,
    equilibrium_populations,
    moments,
    populations,
)
from .solver import FieldState, InstabilityError, init_at_equilibrium, run, step, total_conserved_moment

__version__ = "0.1.0"
