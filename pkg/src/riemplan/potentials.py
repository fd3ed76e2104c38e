"""
Artificial potentials: obstacle barriers and pairwise collision terms.

Every term is a barrier ``phi(u)`` of a scalar level ``u`` that must stay
strictly positive (distance-like quantity to the obstacle or the other agent):

=====================  ======================================  ==============
term                   level u                                 phi(u)
=====================  ======================================  ==============
planar_disc            ‖q − p‖² − (d + r)²                     τ / u
sphere_cap             θ − θ_cap                               τ / u²
level_set              B(x)                                    τ / u
inverse_distance       d_M(x_i, x_j)                           σ / u
se2_squared            ‖q_i − q_j‖² − 4d²                      σ / u
sphere_inverse_dsq     d_M(x_i, x_j)²                          σ / (2u)
=====================  ======================================  ==============

``q`` denotes the first two chart coordinates and ``d`` the agent radius.
Collision terms are summed once per unordered pair, which equals the
½-weighted double sum over ordered pairs j ≠ i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BarrierViolation, UnsupportedManifoldError
from .geometry import ManifoldSpec, check_domain

OBSTACLE_KINDS = ("planar_disc", "sphere_cap", "level_set")
COLLISION_FORMS = ("inverse_distance", "se2_squared", "sphere_inverse_dsq")


@dataclass(frozen=True)
class ObstacleSpec:
    kind: str
    tau: float = 1.0
    center: Optional[tuple] = None
    radius: Optional[float] = None
    theta_cap: Optional[float] = None
    level: Optional[Callable[[np.ndarray], np.ndarray]] = None
    level_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in OBSTACLE_KINDS:
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if self.tau < 0:
            raise ValueError("obstacle strength tau must be non-negative")
        if self.kind == "planar_disc" and (self.center is None or self.radius is None):
            raise ValueError("planar_disc needs center and radius")
        if self.kind == "sphere_cap" and self.theta_cap is None:
            raise ValueError("sphere_cap needs theta_cap")
        if self.kind == "level_set" and (self.level is None or self.level_grad is None):
            raise ValueError("level_set needs a level function and its gradient")


@dataclass(frozen=True)
class CollisionSpec:
    sigma: float = 0.0
    d: float = 0.0
    form: str = "inverse_distance"

    def __post_init__(self):
        if self.form not in COLLISION_FORMS:
            raise ValueError(f"unknown collision form {self.form!r}")
        if self.sigma < 0 or self.d < 0:
            raise ValueError("sigma and d must be non-negative")


@dataclass(frozen=True)
class PotentialBundle:
    """Obstacles plus collision term.

    ``cutoff=(L0, L1)`` multiplies every term by a C² bump of its level that
    is 1 for u ≤ L0 and 0 for u ≥ L1. Off by default.
    """

    obstacles: tuple = ()
    collision: CollisionSpec = field(default_factory=CollisionSpec)
    cutoff: Optional[tuple] = None

    def scaled(self, factor: float) -> "PotentialBundle":
        from dataclasses import replace

        return PotentialBundle(
            tuple(replace(o, tau=o.tau * factor) for o in self.obstacles),
            replace(self.collision, sigma=self.collision.sigma * factor),
            self.cutoff,
        )

    @property
    def is_zero(self) -> bool:
        return self.collision.sigma == 0 and all(o.tau == 0 for o in self.obstacles)


def _bump(u, cutoff):
    """C² step: (w, dw/du)."""
    if cutoff is None:
        return 1.0, 0.0
    L0, L1 = cutoff
    s = np.clip((u - L0) / (L1 - L0), 0.0, 1.0)
    w = 1.0 - s**3 * (10 - 15 * s + 6 * s**2)
    dw = -30.0 * s**2 * (1 - s) ** 2 / (L1 - L0)
    return w, dw


def _evaluate(bundle: PotentialBundle, spec: ManifoldSpec, X: np.ndarray, grad: bool = True):
    batch, n = X.shape[:-2], X.shape[-2]
    co = bundle.cutoff
    per_agent = np.zeros(batch + (n,))
    cov = np.zeros_like(X)  # chart differential contributions
    vec = np.zeros_like(X)  # contributions that are already metric-raised
    min_ob = np.full(batch + (n,), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for ob in bundle.obstacles:
            if ob.tau == 0:
                continue
            if ob.kind == "planar_disc":
                _need_planar(spec)
                diff = X[..., :2] - np.asarray(ob.center, dtype=float)
                u = np.sum(diff**2, axis=-1) - (bundle.collision.d + ob.radius) ** 2
                phi, dphi = ob.tau / u, -ob.tau / u**2
                du = np.zeros_like(X)
                du[..., :2] = 2.0 * diff
            elif ob.kind == "sphere_cap":
                u = X[..., 0] - ob.theta_cap
                phi, dphi = ob.tau / u**2, -2.0 * ob.tau / u**3
                du = np.zeros_like(X)
                du[..., 0] = 1.0
            else:
                u = np.asarray(ob.level(X), dtype=float)
                phi, dphi = ob.tau / u, -ob.tau / u**2
                du = np.asarray(ob.level_grad(X), dtype=float)
            w, dw = _bump(u, co)
            per_agent = per_agent + w * phi
            min_ob = np.minimum(min_ob, u)
            if grad:
                cov = cov + (w * dphi + dw * phi)[..., None] * du
        value = per_agent.sum(axis=-1)

        col = bundle.collision
        pair_min = np.full(batch, np.inf)
        if col.sigma != 0 and n > 1:
            for i in range(n):
                for j in range(i + 1, n):
                    xi, xj = X[..., i, :], X[..., j, :]
                    if col.form == "se2_squared":
                        _need_planar(spec)
                        diff = xi[..., :2] - xj[..., :2]
                        u = np.sum(diff**2, axis=-1) - 4.0 * col.d**2
                        phi, dphi = col.sigma / u, -col.sigma / u**2
                        w, dw = _bump(u, co)
                        if grad:
                            k = (2.0 * (w * dphi + dw * phi))[..., None] * diff
                            cov[..., i, :2] += k
                            cov[..., j, :2] -= k
                    else:
                        log_ij, log_ji = _logs(spec, xi, xj)
                        dist = np.sqrt(np.einsum("...i,...ij,...j->...", log_ij, spec.metric(xi), log_ij))
                        if col.form == "inverse_distance":
                            u = dist
                            phi, dphi = col.sigma / u, -col.sigma / u**2
                            gi, gj = -log_ij / u[..., None], -log_ji / u[..., None]
                        else:
                            u = dist**2
                            phi, dphi = 0.5 * col.sigma / u, -0.5 * col.sigma / u**2
                            gi, gj = -2.0 * log_ij, -2.0 * log_ji
                        w, dw = _bump(u, co)
                        if grad:
                            k = (w * dphi + dw * phi)[..., None]
                            vec[..., i, :] += k * gi
                            vec[..., j, :] += k * gj
                    value = value + w * phi
                    pair_min = np.minimum(pair_min, u)

    min_ob = min_ob.min(axis=-1)
    valid = np.isfinite(value) & (min_ob > 0) & (pair_min > 0)
    out = {"value": value, "valid": valid, "min_obstacle_level": min_ob, "min_pair_level": pair_min}
    if grad:
        g = spec.metric(X)
        out["gradient"] = np.linalg.solve(g, cov[..., None])[..., 0] + vec
        out["differential"] = cov + np.einsum("...ij,...j->...i", g, vec)
    return out


def _need_planar(spec: ManifoldSpec):
    if spec.dim < 2:
        raise UnsupportedManifoldError("planar potential terms need at least two chart coordinates")


def _logs(spec, xi, xj):
    if spec.log is None:
        raise UnsupportedManifoldError(f"manifold {spec.name!r} has no log map for collision terms")
    return spec.log(xi, xj), spec.log(xj, xi)


def _dist(spec, xi, xj):
    if spec.distance is not None:
        return spec.distance(xi, xj)
    v = spec.log(xi, xj)
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, spec.metric(xi), v))


def _prepare(spec, positions):
    X = check_domain(spec, positions)
    if X.ndim < 2:
        raise ValueError("positions must have shape (..., n_agents, dim)")
    return X


def _raise_if_invalid(res):
    if not np.all(res["valid"]):
        raise BarrierViolation(
            "potential barrier violated: min obstacle level "
            f"{np.min(res['min_obstacle_level']):.6g}, min pair level {np.min(res['min_pair_level']):.6g}"
        )


def potential_value(bundle: PotentialBundle, spec: ManifoldSpec, positions):
    """Total potential V at an agent configuration of shape (..., n, dim)."""
    res = _evaluate(bundle, spec, _prepare(spec, positions), grad=False)
    _raise_if_invalid(res)
    return res["value"][()]


def potential_gradient(bundle: PotentialBundle, spec: ManifoldSpec, positions) -> np.ndarray:
    """Riemannian gradient grad_i V for every agent i, shape (..., n, dim)."""
    res = _evaluate(bundle, spec, _prepare(spec, positions))
    _raise_if_invalid(res)
    return res["gradient"]


def potential_differential(bundle: PotentialBundle, spec: ManifoldSpec, positions) -> np.ndarray:
    """Chart partial derivatives ∂V/∂x_i (the covector before raising)."""
    res = _evaluate(bundle, spec, _prepare(spec, positions))
    _raise_if_invalid(res)
    return res["differential"]


def evaluate_unchecked(bundle, spec, X):
    """Value, gradient and a validity mask without raising; for batched integration."""
    return _evaluate(bundle, spec, X)


@dataclass
class ClearanceReport:
    """Per-sample minima along a trajectory.

    ``min_obstacle_level`` is the smallest obstacle level u over all agents
    and obstacles, ``min_pair_level`` the smallest collision level, and
    ``min_pair_distance`` the smallest geodesic inter-agent distance. Absent
    terms report +inf.
    """

    min_obstacle_level: np.ndarray
    min_pair_level: np.ndarray
    min_pair_distance: np.ndarray

    @property
    def obstacle_clearance(self) -> float:
        return float(np.min(self.min_obstacle_level))

    @property
    def pair_clearance(self) -> float:
        return float(np.min(self.min_pair_level))

    @property
    def pair_distance(self) -> float:
        return float(np.min(self.min_pair_distance))

    def as_dict(self) -> dict:
        return {
            "min_obstacle_level": self.obstacle_clearance,
            "min_pair_level": self.pair_clearance,
            "min_pair_distance": self.pair_distance,
        }


def clearance_report(bundle: PotentialBundle, spec: ManifoldSpec, samples) -> ClearanceReport:
    """Clearance minima over trajectory samples of shape (N, n, dim)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 2:
        X = X[None]
    n = X.shape[-2]
    # evaluate levels with unit strengths so zero-strength terms still report
    from dataclasses import replace

    probe = PotentialBundle(
        tuple(replace(o, tau=1.0) for o in bundle.obstacles),
        replace(bundle.collision, sigma=1.0),
    )
    res = _evaluate(probe, spec, X, grad=False)
    min_ob = np.broadcast_to(res["min_obstacle_level"], X.shape[:-2]).astype(float)
    min_pair = np.broadcast_to(res["min_pair_level"], X.shape[:-2]).astype(float)
    dist = np.full(X.shape[:-2], np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            if spec.distance is not None or spec.log is not None:
                dij = _dist(spec, X[..., i, :], X[..., j, :])
            else:
                dij = np.linalg.norm(X[..., i, :] - X[..., j, :], axis=-1)
            dist = np.minimum(dist, dij)
    return ClearanceReport(min_ob.copy(), min_pair.copy(), dist)
