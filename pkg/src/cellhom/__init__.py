"""Periodic homogenization of linear elasticity on voxel cells, with executable checks of the underlying identities."""
from .core import Grid, Lattice, LPField, SymField, VecField, cell_average, inner, pair
from .material import MaterialMap, Phase, isotropic_tensor, laminate_map, random_two_phase
from .solver import SolverError, deflated_pcg, solve_cell_problem
from .homogenize import HomReport, homogenized_tensor, laminate_oracle

__version__ = "0.1.0"

__all__ = [
    "Grid", "Lattice", "LPField", "SymField", "VecField", "cell_average", "inner", "pair",
    "MaterialMap", "Phase", "isotropic_tensor", "laminate_map", "random_two_phase",
    "SolverError", "deflated_pcg", "solve_cell_problem",
    "HomReport", "homogenized_tensor", "laminate_oracle",
]
