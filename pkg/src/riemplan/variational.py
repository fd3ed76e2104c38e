"""
Euler-Lagrange system for the multi-agent cost

    J = ∫_0^T [ ½ Σ_i (‖D²x_i/dt²‖² + κ‖dx_i/dt‖²) + V(x_1, ..., x_n) ] dt

whose critical points satisfy, for every agent,

    D⁴x_i/dt⁴ + R(D²x_i/dt², dx_i/dt) dx_i/dt − κ D²x_i/dt² + grad_i V = 0.

States are stored as arrays of shape ``(..., n, 4, dim)`` holding
(x, x', x'', x''') per agent; the leading axes batch independent states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import BarrierViolation, GridError
from .geometry import (
    ManifoldSpec,
    apply_curvature,
    check_domain,
    christoffel_jet_raw,
    domain_mask,
    riemann_tensor,
    velocity_covariant_derivatives,
)
from .potentials import PotentialBundle, evaluate_unchecked, potential_gradient, potential_value


@dataclass(frozen=True)
class ProblemParams:
    kappa: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


@dataclass(frozen=True)
class AgentJet:
    x: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([np.asarray(v, dtype=float) for v in (self.x, self.d1, self.d2, self.d3)])


@dataclass(frozen=True)
class SystemState:
    agents: tuple
    t: float = 0.0

    def __post_init__(self):
        if len(self.agents) < 1:
            raise ValueError("a system needs at least one agent")

    def as_array(self) -> np.ndarray:
        return np.stack([a.as_array() for a in self.agents])

    @classmethod
    def from_array(cls, arr, t: float = 0.0) -> "SystemState":
        arr = np.asarray(arr, dtype=float)
        return cls(tuple(AgentJet(*a) for a in arr), t)


def _state_array(state) -> np.ndarray:
    if isinstance(state, SystemState):
        return state.as_array()
    arr = np.asarray(state, dtype=float)
    if arr.ndim < 3 or arr.shape[-2] != 4:
        raise ValueError("state array must have shape (..., n, 4, dim)")
    return arr


def to_first_order(state) -> np.ndarray:
    """Flatten a state agent-major, then derivative order, then coordinate."""
    return _state_array(state).reshape(-1).copy()


def from_first_order(flat, n: int, dim: int, t: float = 0.0) -> SystemState:
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (4 * dim * n,):
        raise ValueError(f"expected a flat state of length {4 * dim * n}, got {flat.shape}")
    return SystemState.from_array(flat.reshape(n, 4, dim), t)


def _geometry_terms(spec: ManifoldSpec, S: np.ndarray):
    """Γ-jet, V1..V3, Γ-part of V4 and R(V2, V1)V1 for states S (..., n, 4, dim)."""
    x, x1, x2, x3 = S[..., 0, :], S[..., 1, :], S[..., 2, :], S[..., 3, :]
    cjet = christoffel_jet_raw(spec, x)
    v1, v2, v3, v4_rest = velocity_covariant_derivatives(cjet, x1, x2, x3, np.zeros_like(x1))
    riem = riemann_tensor(cjet.gamma, cjet.dgamma)
    curv = apply_curvature(riem, v2, v1, v1)
    return v1, v2, v3, v4_rest, curv


def rhs_unchecked(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, S: np.ndarray):
    """x'''' for every agent plus a validity mask over the batch axes."""
    x = S[..., 0, :]
    with np.errstate(all="ignore"):
        in_dom = np.all(domain_mask(spec, x), axis=-1)
        _, v2, _, v4_rest, curv = _geometry_terms(spec, S)
        pot = evaluate_unchecked(bundle, spec, x)
        target = params.kappa * v2 - curv - pot["gradient"]
        x4 = target - v4_rest
    valid = in_dom & pot["valid"] & np.all(np.isfinite(x4), axis=(-1, -2))
    return x4, valid


def el_rhs(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, state) -> np.ndarray:
    """Fourth chart derivative x'''' of every agent solving the Euler-Lagrange equation.

    V4 depends on x'''' affinely with identity coefficient, so x'''' is the
    target κV2 − R(V2,V1)V1 − grad_i V minus V4 evaluated at x'''' = 0.
    """
    S = _state_array(state)
    check_domain(spec, S[..., 0, :])
    potential_value(bundle, spec, S[..., 0, :])  # raises on barrier violation
    x4, valid = rhs_unchecked(spec, bundle, params, S)
    if not np.all(valid):
        raise BarrierViolation("Euler-Lagrange right-hand side is not finite")
    return x4


def el_expression(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, jets) -> np.ndarray:
    """D⁴x + R(D²x, x')x' − κD²x + grad V for jets of shape (..., n, 5, dim)."""
    J = np.asarray(jets, dtype=float)
    x = check_domain(spec, J[..., 0, :])
    v1, v2, v3, v4_rest, curv = _geometry_terms(spec, J[..., :4, :])
    v4 = v4_rest + J[..., 4, :]
    return v4 + curv - params.kappa * v2 + potential_gradient(bundle, spec, x)


def _check_grid(times, min_samples: int, odd: bool = False) -> float:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) < min_samples:
        raise GridError(f"need at least {min_samples} samples, got {len(t)}")
    if odd and len(t) % 2 == 0:
        raise GridError("Simpson quadrature needs an odd number of samples")
    h = np.diff(t)
    if np.any(h <= 0) or np.ptp(h) > 1e-9 * max(1.0, abs(h[0])):
        raise GridError("sample grid must be uniform and increasing")
    return float(h[0])


def cost_integrand(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, jets) -> np.ndarray:
    """½ Σ_i (‖V2‖² + κ‖V1‖²) + V at every sample; jets shape (N, n, >=3, dim)."""
    J = np.asarray(jets, dtype=float)
    x, x1, x2 = J[..., 0, :], J[..., 1, :], J[..., 2, :]
    check_domain(spec, x)
    g = spec.metric(x)
    gamma = christoffel_jet_raw(spec, x).gamma
    v2 = x2 + np.einsum("...kij,...i,...j->...k", gamma, x1, x1)
    acc = np.einsum("...i,...ij,...j->...", v2, g, v2)
    vel = np.einsum("...i,...ij,...j->...", x1, g, x1)
    kinetic = 0.5 * np.sum(acc + params.kappa * vel, axis=-1)
    return kinetic + potential_value(bundle, spec, x)


def cost_J(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, times, jets) -> float:
    """Composite-Simpson value of J on a uniform grid with an odd sample count."""
    h = _check_grid(times, 3, odd=True)
    f = cost_integrand(spec, bundle, params, jets)
    return float(simpson(f, dx=h))


def el_residual(spec: ManifoldSpec, bundle: PotentialBundle, params: ProblemParams, times, jets) -> np.ndarray:
    """Metric norm of the Euler-Lagrange expression at every sample and agent.

    x'''' is estimated from the sampled x''' by the fourth-order central
    stencil, so the two samples at either end are NaN.

    Parameters
    ----------
    times : (N,) uniform grid, N >= 7
    jets : (N, n, 4, dim) sampled (x, x', x'', x''')

    Returns
    -------
    (N, n) array of residual norms
    """
    h = _check_grid(times, 7)
    J = np.asarray(jets, dtype=float)
    d3 = J[:, :, 3, :]
    d4 = np.full_like(d3, np.nan)
    d4[2:-2] = (-d3[4:] + 8 * d3[3:-1] - 8 * d3[1:-3] + d3[:-4]) / (12 * h)
    inner = slice(2, len(J) - 2)
    full = np.concatenate([J[inner], d4[inner][:, :, None, :]], axis=2)
    e = el_expression(spec, bundle, params, full)
    g = spec.metric(J[inner, :, 0, :])
    out = np.full(J.shape[:2], np.nan)
    out[inner] = np.sqrt(np.einsum("...i,...ij,...j->...", e, g, e))
    return out


def jets_from_samples(states: Sequence) -> np.ndarray:
    """Stack a sequence of states into an (N, n, 4, dim) array."""
    return np.stack([_state_array(s) for s in states])

