"""Post-solve checks: Euler-Lagrange residual, clearance, local minimality probe."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial

from .bvp import Scenario, TrajectorySolution
from .variational import cost_J, el_residual


def perturbation_field(rng: np.random.Generator, times: np.ndarray, n: int, dim: int, degree: int = 3):
    """Random smooth field with X = X' = 0 at both ends, scaled to ‖X‖∞ = 1.

    Returns (X, X', X'') sampled on ``times``, each of shape (N, n, dim).
    """
    T = times[-1]
    window = Polynomial([0, 0, 1]) * Polynomial([T, -1]) ** 2  # t²(T − t)²
    X, X1, X2 = (np.empty((len(times), n, dim)) for _ in range(3))
    for i in range(n):
        for k in range(dim):
            p = window * Polynomial(rng.normal(size=degree + 1))
            X[:, i, k] = p(times)
            X1[:, i, k] = p.deriv(1)(times)
            X2[:, i, k] = p.deriv(2)(times)
    scale = np.max(np.abs(X))
    return X / scale, X1 / scale, X2 / scale


def perturbed_jets(jets: np.ndarray, field, r: float) -> np.ndarray:
    X, X1, X2 = field
    out = np.array(jets, dtype=float)
    out[:, :, 0] += r * X
    out[:, :, 1] += r * X1
    out[:, :, 2] += r * X2
    return out


def minimality_probe(scenario: Scenario, solution: TrajectorySolution, n_probes: int = 100, r: float = 1e-3, seed=None):
    """J(x* + rX) − J(x*) for ``n_probes`` random admissible fields X.

    The fields vanish with their first derivative at both endpoints, so they
    are admissible for every boundary case.
    """
    rng = np.random.default_rng(scenario.solver.seed if seed is None else seed)
    spec, bundle, params = scenario.manifold, scenario.bundle, scenario.params
    t = solution.times
    J0 = cost_J(spec, bundle, params, t, solution.jets)
    n, dim = solution.jets.shape[1], solution.jets.shape[3]
    deltas = np.empty(n_probes)
    for k in range(n_probes):
        fld = perturbation_field(rng, t, n, dim)
        deltas[k] = cost_J(spec, bundle, params, t, perturbed_jets(solution.jets, fld, r)) - J0
    return deltas


def verify_solution(scenario: Scenario, solution: TrajectorySolution, n_probes: int = 100, r: float = 1e-3) -> dict:
    res = el_residual(scenario.manifold, scenario.bundle, scenario.params, solution.times, solution.jets)
    deltas = minimality_probe(scenario, solution, n_probes, r)
    return {
        "max_el_residual": float(np.nanmax(res)),
        "clearance": solution.clearance.as_dict() if solution.clearance else None,
        "minimality_probe": {
            "n_probes": n_probes,
            "r": r,
            "min_delta_J": float(np.min(deltas)),
            "passed": bool(np.min(deltas) >= -1e-9),
        },
        "newton_tail_constants": solution.diagnostics.get("tail_constants"),
    }
