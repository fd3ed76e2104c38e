"""Concrete manifolds (Euclidean space, SE(2), the 2-sphere) and target submanifolds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CutLocusError
from .geometry import FD_REL_STEP, ChristoffelJet, ManifoldSpec

MANIFOLD_NAMES = ("euclidean", "se2", "sphere2")

SPHERE_CHART_EPS = 1e-3
ANTIPODAL_TOL = 1e-9


def _zeros_jet(x: np.ndarray, dim: int) -> ChristoffelJet:
    batch = x.shape[:-1]
    return ChristoffelJet(
        np.zeros(batch + (dim,) * 3),
        np.zeros(batch + (dim,) * 4),
        np.zeros(batch + (dim,) * 5),
    )


def _flat(name: str, diag: np.ndarray, params: dict) -> ManifoldSpec:
    dim = len(diag)
    G = np.diag(diag)

    def metric(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(G, x.shape[:-1] + (dim, dim)).copy()

    def christoffel(x):
        return np.zeros(np.shape(x)[:-1] + (dim,) * 3)

    def log(p, q):
        return np.asarray(q, dtype=float) - np.asarray(p, dtype=float)

    def exp(p, v):
        return np.asarray(p, dtype=float) + np.asarray(v, dtype=float)

    def distance(p, q):
        d = log(p, q)
        return np.sqrt(np.einsum("...i,i,...i->...", d, diag, d))

    return ManifoldSpec(
        name=name,
        dim=dim,
        metric=metric,
        christoffel=christoffel,
        christoffel_jet=lambda x: _zeros_jet(np.asarray(x, dtype=float), dim),
        exp=exp,
        log=log,
        distance=distance,
        params=params,
    )


def euclidean(dim: int) -> ManifoldSpec:
    """Standard flat ℝ^dim; exp and log are affine."""
    if int(dim) != dim or dim < 1:
        raise ValueError("dim must be a positive integer")
    return _flat("euclidean", np.ones(int(dim)), {"dim": int(dim)})


@dataclass(frozen=True)
class Se2Params:
    mass: float = 1.0
    inertia: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.inertia > 0):
            raise ValueError("SE(2) mass and inertia must be strictly positive")


def se2(params: Se2Params = Se2Params()) -> ManifoldSpec:
    """SE(2) in the chart (x, y, θ) with the kinetic-energy metric diag(m, m, J).

    θ is an unwrapped real coordinate; the metric is constant so the
    connection and curvature vanish identically.
    """
    return _flat(
        "se2",
        np.array([params.mass, params.mass, params.inertia], dtype=float),
        {"mass": params.mass, "inertia": params.inertia},
    )


# --- the unit sphere in polar chart (θ, φ) ------------------------------------


def sphere_embed(x) -> np.ndarray:
    """(θ, φ) -> (sinθ sinφ, sinθ cosφ, cosθ) in ℝ³."""
    x = np.asarray(x, dtype=float)
    th, ph = x[..., 0], x[..., 1]
    return np.stack([np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), np.cos(th)], axis=-1)


def _sphere_frame(x):
    th, ph = x[..., 0], x[..., 1]
    e_th = np.stack([np.cos(th) * np.sin(ph), np.cos(th) * np.cos(ph), -np.sin(th)], axis=-1)
    e_ph = np.stack([np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), np.zeros_like(th)], axis=-1)
    return e_th, e_ph


def _sphere_metric(x):
    x = np.asarray(x, dtype=float)
    s2 = np.sin(x[..., 0]) ** 2
    g = np.zeros(x.shape[:-1] + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = s2
    return g


def _sphere_jet(x) -> ChristoffelJet:
    x = np.asarray(x, dtype=float)
    th = x[..., 0]
    s, c = np.sin(th), np.cos(th)
    batch = x.shape[:-1]
    G = np.zeros(batch + (2, 2, 2))
    dG = np.zeros(batch + (2, 2, 2, 2))
    d2G = np.zeros(batch + (2, 2, 2, 2, 2))
    G[..., 0, 1, 1] = -s * c
    G[..., 1, 0, 1] = G[..., 1, 1, 0] = c / s
    dG[..., 0, 1, 1, 0] = -np.cos(2 * th)
    dG[..., 1, 0, 1, 0] = dG[..., 1, 1, 0, 0] = -1.0 / s**2
    d2G[..., 0, 1, 1, 0, 0] = 2.0 * np.sin(2 * th)
    d2G[..., 1, 0, 1, 0, 0] = d2G[..., 1, 1, 0, 0, 0] = 2.0 * c / s**3
    return ChristoffelJet(G, dG, d2G)


def _sphere_in_domain(x):
    th = np.asarray(x, dtype=float)[..., 0]
    return (th > SPHERE_CHART_EPS) & (th < np.pi - SPHERE_CHART_EPS)


def _sphere_angle(a, b):
    """Angle between unit vectors; atan2 form stays accurate near 0 and π."""
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.einsum("...i,...i->...", a, b))


def _sphere_log(p, q):
    p = np.asarray(p, dtype=float)
    a, b = sphere_embed(p), sphere_embed(q)
    c = np.einsum("...i,...i->...", a, b)
    if np.any(c < -1.0 + ANTIPODAL_TOL):
        raise CutLocusError("log map undefined for antipodal points on the sphere")
    w = b - c[..., None] * a
    s = np.linalg.norm(w, axis=-1)
    d = np.arctan2(s, c)
    scale = np.where(s > 1e-300, d / np.where(s > 1e-300, s, 1.0), 1.0)
    v = scale[..., None] * w
    e_th, e_ph = _sphere_frame(p)
    s2 = np.sin(p[..., 0]) ** 2
    return np.stack(
        [np.einsum("...i,...i->...", e_th, v), np.einsum("...i,...i->...", e_ph, v) / s2],
        axis=-1,
    )


def _sphere_exp(p, v):
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    e_th, e_ph = _sphere_frame(p)
    w = v[..., 0:1] * e_th + v[..., 1:2] * e_ph
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    sinc = np.where(nw > 1e-300, np.sin(nw) / np.where(nw > 1e-300, nw, 1.0), 1.0)
    y = np.cos(nw) * sphere_embed(p) + sinc * w
    th = np.arctan2(np.hypot(y[..., 0], y[..., 1]), y[..., 2])
    ph = np.arctan2(y[..., 0], y[..., 1])
    ph = p[..., 1] + (ph - p[..., 1] + np.pi) % (2 * np.pi) - np.pi
    return np.stack([th, ph], axis=-1)


def _sphere_distance(p, q):
    a, b = sphere_embed(p), sphere_embed(q)
    if np.any(np.einsum("...i,...i->...", a, b) < -1.0 + ANTIPODAL_TOL):
        raise CutLocusError("distance requested for antipodal points")
    return _sphere_angle(a, b)


def sphere2() -> ManifoldSpec:
    """Unit sphere in the polar chart (θ, φ), metric diag(1, sin²θ).

    The chart excludes the bands θ ≤ 1e-3 and θ ≥ π − 1e-3 around the poles.
    """
    return ManifoldSpec(
        name="sphere2",
        dim=2,
        metric=_sphere_metric,
        christoffel=lambda x: _sphere_jet(x).gamma,
        christoffel_jet=_sphere_jet,
        in_domain=_sphere_in_domain,
        exp=_sphere_exp,
        log=_sphere_log,
        distance=_sphere_distance,
        embed=sphere_embed,
    )


def manifold_by_name(name: str, params: Optional[dict] = None) -> ManifoldSpec:
    params = dict(params or {})
    if name == "euclidean":
        return euclidean(int(params.get("dim", 2)))
    if name == "se2":
        return se2(Se2Params(float(params.get("mass", 1.0)), float(params.get("inertia", 1.0))))
    if name == "sphere2":
        return sphere2()
    raise ValueError(f"unknown manifold {name!r}; expected one of {', '.join(MANIFOLD_NAMES)}")


# --- target submanifolds -----------------------------------------------------


@dataclass(frozen=True)
class SubmanifoldSpec:
    """Level set {c(x) = 0} of ``codim`` chart functions."""

    constraint: Callable[[np.ndarray], np.ndarray]
    codim: int
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "level_set"
    params: dict = field(default_factory=dict)

    def value(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.constraint(np.asarray(x, dtype=float)), dtype=float))

    def constraint_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.atleast_2d(np.asarray(self.jacobian(x), dtype=float))
        h = FD_REL_STEP * np.maximum(1.0, np.abs(x))
        cols = []
        for l in range(len(x)):
            e = np.zeros(len(x))
            e[l] = h[l]
            cols.append((self.value(x + e) - self.value(x - e)) / (2 * h[l]))
        return np.stack(cols, axis=-1)


def circle_target(center, radius: float) -> SubmanifoldSpec:
    """Circle of the given radius in the first two chart coordinates (times the rest).

    On SE(2) this is S¹ × S(p⁰, l): position on the circle, heading free.
    """
    if not radius > 0:
        raise ValueError("circle radius must be positive")
    cx, cy = (float(v) for v in center)

    def constraint(x):
        return np.array([(x[0] - cx) ** 2 + (x[1] - cy) ** 2 - radius**2])

    def jacobian(x):
        row = np.zeros((1, len(x)))
        row[0, 0] = 2 * (x[0] - cx)
        row[0, 1] = 2 * (x[1] - cy)
        return row

    return SubmanifoldSpec(
        constraint, 1, jacobian, name="circle", params={"center": [cx, cy], "radius": float(radius)}
    )


def latitude_target(theta0: float) -> SubmanifoldSpec:
    """Latitude circle θ = θ0 on the sphere chart."""
    theta0 = float(theta0)
    return SubmanifoldSpec(
        lambda x: np.array([x[0] - theta0]),
        1,
        lambda x: np.array([[1.0] + [0.0] * (len(x) - 1)]),
        name="latitude",
        params={"theta0": theta0},
    )
