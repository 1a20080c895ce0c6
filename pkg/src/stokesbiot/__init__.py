"""Adaptive finite elements for coupled free-flow / poroelastic systems.

Stokes flow and quasi-static Biot poroelasticity on a split rectangular
domain, coupled across the shared interface by mass conservation, stress
balance, and a Beavers-Joseph-Saffman slip condition enforced through an
edgewise-constant Lagrange multiplier.  The package provides the monolithic
backward-Euler solver, a residual-based a posteriori error estimator, and
newest-vertex-bisection adaptivity driven by Dorfler marking.
"""

__version__ = "0.1.0"

from .mesh import Mesh, split_rectangle_mesh, refine, refine_uniform
from .spaces import DofMap, build_dof_map

__all__ = [
    "Mesh",
    "split_rectangle_mesh",
    "refine",
    "refine_uniform",
    "DofMap",
    "build_dof_map",
    "__version__",
]
