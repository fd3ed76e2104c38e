"""Collision-avoiding variational trajectories for multi-agent systems on Riemannian manifolds."""

from .bvp import BoundaryCase, Scenario, SolverConfig, TrajectorySolution, multi_start, shoot, validate_scenario
from .manifolds import circle_target, euclidean, latitude_target, manifold_by_name, se2, sphere2
from .potentials import CollisionSpec, ObstacleSpec, PotentialBundle
from .variational import ProblemParams

__version__ = "0.1.0"

__all__ = [
    "BoundaryCase",
    "CollisionSpec",
    "ObstacleSpec",
    "PotentialBundle",
    "ProblemParams",
    "Scenario",
    "SolverConfig",
    "TrajectorySolution",
    "circle_target",
    "euclidean",
    "latitude_target",
    "manifold_by_name",
    "multi_start",
    "se2",
    "shoot",
    "sphere2",
    "validate_scenario",
]
