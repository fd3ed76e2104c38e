"""
Two-point boundary value solver: RK4 forward integration of the
Euler-Lagrange system and damped Newton shooting on the unknown initial
second and third derivatives of every agent, with continuation in the
potential strengths.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    BarrierViolation,
    ConstraintCountError,
    IntegrationError,
    RankDeficientError,
    SingularChartError,
)
from .geometry import (
    ManifoldSpec,
    check_domain,
    christoffel_jet_raw,
    velocity_covariant_derivatives,
)
from .manifolds import SubmanifoldSpec
from .potentials import ClearanceReport, PotentialBundle, clearance_report, potential_value
from .variational import ProblemParams, cost_J, rhs_unchecked

logger = logging.getLogger(__name__)

CASE_IDS = ("fixed_endpoint_tangent_velocity", "fully_clamped", "free_on_submanifold")


@dataclass(frozen=True)
class BoundaryCase:
    """Boundary data for all agents; arrays have shape (n, dim).

    fixed_endpoint_tangent_velocity: x(T) = p_T, x'(T) ∈ TS, D²x(T) ⊥ TS.
    fully_clamped: x(T) = p_T, x'(T) = v_T.
    free_on_submanifold: x(T) ∈ S, x'(T) ∈ TS, D²x(T) ⊥ TS, κx' − D³x ⊥ TS at T.
    """

    case_id: str
    p0: np.ndarray
    v0: np.ndarray
    pT: Optional[np.ndarray] = None
    vT: Optional[np.ndarray] = None
    target: Optional[SubmanifoldSpec] = None

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise ValueError(f"unknown boundary case {self.case_id!r}")

    @property
    def n_agents(self) -> int:
        return int(np.shape(self.p0)[0])


@dataclass(frozen=True)
class SolverConfig:
    grid_points: int = 101
    newton_tol: float = 1e-8
    max_iters: int = 50
    damping: float = 0.5
    max_halvings: int = 20
    fd_jacobian_step: float = 1e-6
    continuation_steps: int = 5
    seed: int = 42

    def __post_init__(self):
        if self.grid_points < 51 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be an odd integer >= 51")
        for name in ("newton_tol", "max_iters", "max_halvings", "fd_jacobian_step", "continuation_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


@dataclass(frozen=True)
class Scenario:
    manifold: ManifoldSpec
    bundle: PotentialBundle
    params: ProblemParams
    boundary: BoundaryCase
    solver: SolverConfig = field(default_factory=SolverConfig)
    name: str = "scenario"

    @property
    def n(self) -> int:
        return self.boundary.n_agents

    @property
    def dim(self) -> int:
        return self.manifold.dim


@dataclass
class TrajectorySolution:
    times: np.ndarray
    jets: np.ndarray  # (N, n, 4, dim)
    converged: bool
    residual_norm: float
    iterations: int
    cost: float
    clearance: Optional[ClearanceReport]
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def positions(self) -> np.ndarray:
        return self.jets[:, :, 0, :]


# --- forward integration -------------------------------------------------------


def time_grid(T: float, grid_points: int) -> np.ndarray:
    return np.linspace(0.0, T, grid_points)


def _deriv(spec, bundle, params, S):
    x4, valid = rhs_unchecked(spec, bundle, params, S)
    dS = np.empty_like(S)
    dS[..., :3, :] = S[..., 1:, :]
    dS[..., 3, :] = x4
    return dS, valid


def integrate_batch(spec, bundle, params, S0, grid):
    """RK4 over ``grid`` for a batch of states (B, n, 4, dim).

    Returns the sampled states (N, B, n, 4, dim) and, per batch member, the
    first grid time at which integration failed (NaN when it succeeded).
    Failed members are frozen at NaN instead of aborting the whole batch.
    """
    S = np.array(S0, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.empty((len(grid),) + S.shape)
    out[0] = S
    fail_t = np.full(S.shape[0], np.nan)
    ok = np.ones(S.shape[0], dtype=bool)
    for k in range(len(grid) - 1):
        h = grid[k + 1] - grid[k]
        k1, v1 = _deriv(spec, bundle, params, S)
        k2, v2 = _deriv(spec, bundle, params, S + 0.5 * h * k1)
        k3, v3 = _deriv(spec, bundle, params, S + 0.5 * h * k2)
        k4, v4 = _deriv(spec, bundle, params, S + h * k3)
        good = v1 & v2 & v3 & v4
        newly = ok & ~good
        fail_t[newly] = grid[k]
        ok &= good
        with np.errstate(all="ignore"):
            S = S + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        S[~ok] = np.nan
        out[k + 1] = S
    return out, fail_t


def integrate(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, initial, grid) -> np.ndarray:
    """Classical RK4 of the first-order Euler-Lagrange system; samples (N, n, 4, dim).

    Raises IntegrationError with the failing time when the trajectory leaves
    the chart domain or crosses a barrier.
    """
    from .variational import _state_array

    S0 = _state_array(initial)
    x0 = S0[..., 0, :]
    try:
        check_domain(spec, x0)
        potential_value(bundle, spec, x0)
    except (SingularChartError, BarrierViolation) as exc:
        raise IntegrationError(f"invalid initial state: {exc}", t=float(grid[0])) from exc
    traj, fail_t = integrate_batch(spec, bundle, params, S0[None], grid)
    if np.isfinite(fail_t[0]):
        raise IntegrationError(
            f"integration left the admissible region near t={fail_t[0]:.6g}", t=float(fail_t[0])
        )
    return traj[:, 0]


# --- boundary conditions -------------------------------------------------------


def tangent_basis(jac: np.ndarray) -> np.ndarray:
    """Basis (dim, dim − codim) of the kernel of a full-row-rank Jacobian.

    Built from a column-pivoted reduced row echelon form, so the basis varies
    smoothly with the Jacobian while the pivot choice is unchanged.
    """
    A = np.array(jac, dtype=float)
    codim, dim = A.shape
    scale = np.max(np.abs(A)) if A.size else 0.0
    pivots = []
    for r in range(codim):
        free = [c for c in range(dim) if c not in pivots]
        c = max(free, key=lambda j: abs(A[r, j]))
        if abs(A[r, c]) <= 1e-12 * max(scale, 1e-300):
            raise RankDeficientError("constraint Jacobian is rank deficient")
        A[r] /= A[r, c]
        for rr in range(codim):
            if rr != r:
                A[rr] -= A[rr, c] * A[r]
        pivots.append(c)
    free = [c for c in range(dim) if c not in pivots]
    N = np.zeros((dim, len(free)))
    for k, f in enumerate(free):
        N[f, k] = 1.0
        for r, p in enumerate(pivots):
            N[p, k] = -A[r, f]
    return N


def tangent_projector(jac: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Metric-orthogonal projector onto the kernel of ``jac``."""
    ginv = np.linalg.inv(g)
    JGi = jac @ ginv
    return np.eye(len(g)) - ginv @ jac.T @ np.linalg.solve(JGi @ jac.T, jac)


def boundary_residual(case: BoundaryCase, final_state, spec: ManifoldSpec, kappa: float = 0.0) -> np.ndarray:
    """Terminal residual vector of length 2·dim·n for a state (n, 4, dim) at t = T.

    Orthogonality to TS is expressed through the metric inner products with
    a basis of TS, i.e. the tangent projection in coordinates.
    """
    S = np.asarray(final_state, dtype=float)
    blocks = []
    for i in range(S.shape[0]):
        x, v = S[i, 0], S[i, 1]
        if case.case_id == "fully_clamped":
            blocks += [x - case.pT[i], v - case.vT[i]]
            continue
        jac = case.target.constraint_jacobian(x)
        if np.linalg.matrix_rank(jac) < case.target.codim:
            raise RankDeficientError(f"constraint Jacobian rank deficient at x(T)={x}")
        N = tangent_basis(jac)
        g = spec.metric(x)
        _, v2, v3 = velocity_covariant_derivatives(christoffel_jet_raw(spec, x), S[i, 1], S[i, 2], S[i, 3])
        if case.case_id == "fixed_endpoint_tangent_velocity":
            blocks += [x - case.pT[i], jac @ v, N.T @ g @ v2]
        else:
            blocks += [case.target.value(x), jac @ v, N.T @ g @ v2, N.T @ g @ (kappa * v - v3)]
    return np.concatenate(blocks)


@dataclass
class ConstraintReport:
    rows: list
    total: int
    required: int

    def table(self) -> str:
        width = max(len(r[0]) for r in self.rows)
        lines = [f"{label:<{width}}  {count}" for label, count in self.rows]
        lines.append(f"{'TOTAL':<{width}}  {self.total} (required {self.required})")
        return "\n".join(lines)


def _rows_present(arr, n, dim) -> int:
    if arr is None:
        return 0
    a = np.asarray(arr, dtype=float)
    return dim * n if a.shape == (n, dim) and np.all(np.isfinite(a)) else 0


def constraint_rows(case: BoundaryCase, dim: int) -> list:
    n = case.n_agents
    codim = case.target.codim if case.target is not None else 0
    tan = dim - codim if case.target is not None else 0
    rows = [
        ("x_i(0) = p0", _rows_present(case.p0, n, dim)),
        ("x_i'(0) = v0", _rows_present(case.v0, n, dim)),
    ]
    if case.case_id == "fixed_endpoint_tangent_velocity":
        rows += [
            ("x_i(T) = pT", _rows_present(case.pT, n, dim)),
            ("x_i'(T) in TS", codim * n),
            ("D2x_i(T) perp TS", tan * n),
        ]
    elif case.case_id == "fully_clamped":
        rows += [
            ("x_i(T) = pT", _rows_present(case.pT, n, dim)),
            ("x_i'(T) = vT", _rows_present(case.vT, n, dim)),
            ("D2x_i(T) perp TS (vacuous)", 0),
        ]
    else:
        rows += [
            ("x_i(T) in S", codim * n),
            ("x_i'(T) in TS", codim * n),
            ("D2x_i(T) perp TS", tan * n),
            ("kappa x_i' - D3x_i perp TS at T", tan * n),
        ]
    return rows


def validate_scenario(scenario: Scenario) -> ConstraintReport:
    """Tally the boundary conditions against the 4·dim·n the system needs."""
    case = scenario.boundary
    dim, n = scenario.dim, case.n_agents
    if case.case_id != "fully_clamped" and case.target is not None:
        if not 1 <= case.target.codim <= dim:
            rows = constraint_rows(replace(case, target=None), dim)
            raise ConstraintCountError(f"target codimension {case.target.codim} invalid for dim {dim}", rows)
    rows = constraint_rows(case, dim)
    total = sum(c for _, c in rows)
    report = ConstraintReport(rows, total, 4 * dim * n)
    if total != report.required:
        raise ConstraintCountError(
            f"boundary data gives {total} conditions, {report.required} required\n{report.table()}", rows
        )
    return report


# --- seeds -----------------------------------------------------------------------


def _project_to(target: SubmanifoldSpec, g: np.ndarray, x: np.ndarray, iters: int = 50) -> np.ndarray:
    ginv = np.linalg.inv(g)
    for _ in range(iters):
        c = target.value(x)
        if np.linalg.norm(c) < 1e-13:
            break
        J = target.constraint_jacobian(x)
        x = x - ginv @ J.T @ np.linalg.solve(J @ ginv @ J.T, c)
    return x


def closest_point(target: SubmanifoldSpec, g: np.ndarray, p: np.ndarray, steps: int = 200, step: float = 1e-2):
    """Point of S near ``p`` by projected gradient descent on ½‖x − p‖²_g."""
    x = _project_to(target, g, np.array(p, dtype=float))
    for _ in range(steps):
        x = _project_to(target, g, x - step * (x - p))
    return x


def terminal_seed(scenario: Scenario):
    """Terminal positions and velocities used for the cubic Hermite seed."""
    case, spec, T = scenario.boundary, scenario.manifold, scenario.params.T
    p0, v0 = np.asarray(case.p0, dtype=float), np.asarray(case.v0, dtype=float)
    if case.case_id == "fully_clamped":
        return np.asarray(case.pT, dtype=float), np.asarray(case.vT, dtype=float)
    pT, vT = [], []
    for i in range(case.n_agents):
        g0 = spec.metric(p0[i])
        if case.case_id == "fixed_endpoint_tangent_velocity":
            pe = np.asarray(case.pT[i], dtype=float)
        else:
            pe = closest_point(case.target, g0, p0[i])
        P = tangent_projector(case.target.constraint_jacobian(pe), spec.metric(pe))
        pT.append(pe)
        vT.append(P @ ((pe - p0[i]) / T))
    return np.array(pT), np.array(vT)


def hermite_coefficients(p0, v0, pT, vT, T):
    """x(t) = p0 + v0 t + a t² + b t³ matching position and velocity at 0 and T."""
    dp = pT - p0
    a = (3 * dp - (2 * v0 + vT) * T) / T**2
    b = (-2 * dp + (v0 + vT) * T) / T**3
    return a, b


def seed_unknowns(scenario: Scenario) -> np.ndarray:
    case, T = scenario.boundary, scenario.params.T
    p0, v0 = np.asarray(case.p0, dtype=float), np.asarray(case.v0, dtype=float)
    pT, vT = terminal_seed(scenario)
    a, b = hermite_coefficients(p0, v0, pT, vT, T)
    return np.stack([2 * a, 6 * b], axis=1).reshape(-1)


def seed_trajectory(scenario: Scenario, times=None) -> tuple:
    """Cubic Hermite seed sampled exactly: (times, jets (N, n, 4, dim))."""
    case, T = scenario.boundary, scenario.params.T
    if times is None:
        times = time_grid(T, scenario.solver.grid_points)
    t = np.asarray(times)[:, None, None]
    p0, v0 = np.asarray(case.p0, dtype=float), np.asarray(case.v0, dtype=float)
    pT, vT = terminal_seed(scenario)
    a, b = hermite_coefficients(p0, v0, pT, vT, T)
    x = p0 + v0 * t + a * t**2 + b * t**3
    d1 = v0 + 2 * a * t + 3 * b * t**2
    d2 = 2 * a + 6 * b * t
    d3 = np.broadcast_to(6 * b, x.shape)
    return np.asarray(times), np.stack([x, d1, d2, d3], axis=2)


# --- shooting ----------------------------------------------------------------------


def _initial_states(scenario: Scenario, U: np.ndarray) -> np.ndarray:
    case = scenario.boundary
    n, dim = case.n_agents, scenario.dim
    U = np.atleast_2d(U)
    S = np.empty((U.shape[0], n, 4, dim))
    S[:, :, 0] = case.p0
    S[:, :, 1] = case.v0
    S[:, :, 2:] = U.reshape(U.shape[0], n, 2, dim)
    return S


class _Shooter:
    def __init__(self, scenario: Scenario, bundle: PotentialBundle):
        self.sc = scenario
        self.bundle = bundle
        self.grid = time_grid(scenario.params.T, scenario.solver.grid_points)
        self.evaluations = 0

    def residuals(self, U: np.ndarray) -> np.ndarray:
        """Terminal residuals (B, P) for unknown vectors U (B, P); failed rows are NaN."""
        sc = self.sc
        traj, fail_t = integrate_batch(sc.manifold, self.bundle, sc.params, _initial_states(sc, U), self.grid)
        self.evaluations += U.shape[0]
        out = np.full(U.shape, np.nan)
        for b in range(U.shape[0]):
            if np.isnan(fail_t[b]):
                try:
                    out[b] = boundary_residual(sc.boundary, traj[-1, b], sc.manifold, sc.params.kappa)
                except (RankDeficientError, np.linalg.LinAlgError):
                    pass
        return out

    def jacobian(self, u: np.ndarray, r: np.ndarray) -> Optional[np.ndarray]:
        h = self.sc.solver.fd_jacobian_step * np.maximum(1.0, np.abs(u))
        P = len(u)
        R = self.residuals(u + np.diag(h))
        Jac = (R - r).T / h
        bad = ~np.all(np.isfinite(Jac), axis=0)
        if np.any(bad):
            idx = np.flatnonzero(bad)
            Rb = self.residuals(u - np.diag(h)[idx])
            Jac[:, idx] = (r[:, None] - Rb.T) / h[idx]
        if not np.all(np.isfinite(Jac)):
            return None
        return Jac.reshape(P, P)

    def newton(self, u0: np.ndarray):
        cfg = self.sc.solver
        u = np.array(u0, dtype=float)
        r = self.residuals(u[None])[0]
        norms = [float(np.linalg.norm(r))]
        status = "max_iters"
        iters = 0
        if not np.all(np.isfinite(r)):
            return u, r, norms, 0, "seed_integration_failed"
        while iters < cfg.max_iters:
            if norms[-1] < cfg.newton_tol:
                status = "converged"
                break
            Jac = self.jacobian(u, r)
            if Jac is None:
                status = "jacobian_failed"
                break
            step = np.linalg.lstsq(Jac, -r, rcond=None)[0]
            # full step first; all halvings are then tried as one batch
            lams = np.array([1.0])
            trial_r = self.residuals(u[None] + step[None])
            trial_n = np.linalg.norm(trial_r, axis=1)
            if not (np.isfinite(trial_n[0]) and trial_n[0] < norms[-1]):
                lams = cfg.damping ** np.arange(1, cfg.max_halvings + 1)
                trial_r = self.residuals(u[None] + lams[:, None] * step[None])
                trial_n = np.linalg.norm(trial_r, axis=1)
            accept = np.flatnonzero(np.isfinite(trial_n) & (trial_n < norms[-1]))
            iters += 1
            if len(accept) == 0:
                status = "line_search_failed"
                break
            k = accept[0]
            u, r = u + lams[k] * step, trial_r[k]
            norms.append(float(trial_n[k]))
        else:
            if norms[-1] < cfg.newton_tol:
                status = "converged"
        return u, r, norms, iters, status


def _tail_constants(norms) -> list:
    """r_{k+1} / r_k^1.5 over the last three Newton steps."""
    tail = norms[-4:]
    return [b / a**1.5 if a > 0 else float("nan") for a, b in zip(tail[:-1], tail[1:])]


def shoot(scenario: Scenario, config: Optional[SolverConfig] = None, jitter: Optional[np.ndarray] = None) -> TrajectorySolution:
    """Solve the boundary value problem by damped Newton shooting.

    Potential strengths are ramped through ``continuation_steps`` equally
    spaced factors in [0, 1]; each stage seeds the next. A stage that fails
    to converge ends the solve, and the best iterate is returned with
    ``converged=False``.
    """
    if config is not None:
        scenario = replace(scenario, solver=config)
    cfg = scenario.solver
    validate_scenario(scenario)
    spec, case = scenario.manifold, scenario.boundary
    check_domain(spec, case.p0)
    potential_value(scenario.bundle, spec, np.asarray(case.p0, dtype=float))

    u = seed_unknowns(scenario)
    if jitter is not None:
        u = u + jitter
    u_seed = u.copy()
    factors = [1.0] if scenario.bundle.is_zero else list(np.linspace(0.0, 1.0, cfg.continuation_steps))
    history = []
    total_iters = 0
    status = "converged"
    r_norm = float("nan")
    for gamma in factors:
        shooter = _Shooter(scenario, scenario.bundle.scaled(gamma))
        u_new, r, norms, iters, status = shooter.newton(u)
        if status == "seed_integration_failed" and not np.array_equal(u, u_seed):
            # previous stage's path crosses a barrier of this stage: restart from the seed
            u_new, r, norms, iters, status = shooter.newton(u_seed)
        total_iters += iters
        history.append({"factor": float(gamma), "iterations": iters, "residual_norms": norms, "status": status})
        logger.debug("continuation factor %.3f: %s after %d iterations, |r|=%.3e", gamma, status, iters, norms[-1])
        if np.all(np.isfinite(r)):
            u, r_norm = u_new, norms[-1]
        if status != "converged":
            break

    final_factor = history[-1]["factor"]
    converged = status == "converged" and final_factor == 1.0
    grid = time_grid(scenario.params.T, cfg.grid_points)
    bundle = scenario.bundle.scaled(final_factor) if not converged else scenario.bundle
    traj, fail_t = integrate_batch(spec, bundle, scenario.params, _initial_states(scenario, u), grid)
    jets = traj[:, 0]
    cost, clear = float("nan"), None
    if np.isnan(fail_t[0]):
        try:
            cost = cost_J(spec, scenario.bundle, scenario.params, grid, jets)
            clear = clearance_report(scenario.bundle, spec, jets[:, :, 0, :])
        except (BarrierViolation, SingularChartError):
            converged = False
    else:
        converged = False
    tail = _tail_constants(history[-1]["residual_norms"])
    if converged:
        logger.info("converged in %d Newton iterations, |r|=%.3e, tail constants %s", total_iters, r_norm, tail)
    return TrajectorySolution(
        times=grid,
        jets=jets,
        converged=bool(converged),
        residual_norm=float(r_norm),
        iterations=total_iters,
        cost=cost,
        clearance=clear,
        history=history,
        diagnostics={
            "status": status,
            "final_factor": final_factor,
            "tail_constants": tail,
            "unknowns": u.tolist(),
            "seed_unknowns": u_seed.tolist(),
        },
    )


def multi_start(scenario: Scenario, n_starts: int, workers: Optional[int] = None) -> list:
    """Solve from the Hermite seed and ``n_starts − 1`` jittered copies of it.

    Jitter k uses ``default_rng(seed + k)``. Returns (start index, solution)
    pairs for every start, converged first, ordered by (J, start index).
    """
    base = seed_unknowns(scenario)
    scale = 0.1 * np.maximum(1.0, np.abs(base))
    jitters = [None] + [
        np.random.default_rng(scenario.solver.seed + k).normal(size=base.shape) * scale for k in range(1, n_starts)
    ]

    def run(k):
        try:
            return k, shoot(scenario, jitter=jitters[k])
        except (BarrierViolation, SingularChartError, IntegrationError) as exc:
            logger.warning("start %d failed: %s", k, exc)
            return k, None

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, range(n_starts)))

    def key(item):
        k, sol = item
        if sol is None or not sol.converged:
            return (1, float("inf"), k)
        return (0, sol.cost, k)

    return sorted(results, key=key)
