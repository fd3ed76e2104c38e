"""
Chart-based Riemannian primitives.

All functions accept points with arbitrary leading batch axes: a point is an
array of shape ``(..., dim)``, the metric ``(..., dim, dim)``, Christoffel
symbols ``(..., k, i, j)`` with ``gamma[..., k, i, j] = Γ^k_ij``, and chart
derivatives append their differentiation indices at the end, e.g.
``dgamma[..., k, i, j, l] = ∂_l Γ^k_ij``.

Curvature follows R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z, so that
⟨R(X,Y)Y, X⟩ is the (unnormalised) sectional curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import SingularChartError, UnsupportedManifoldError

Array = np.ndarray

FD_REL_STEP = 1e-5
# second derivatives of Γ by nested differences; 1e-5 would leave ~1e-6 roundoff
FD_REL_STEP_SECOND = 1e-4
# Γ itself differenced from g: its jet uses 5-point stencils with wider steps
FD_REL_STEPS_METRIC_ONLY = (1e-4, 1e-3)


class ChartPoint(NamedTuple):
    coords: Array


class ChartVector(NamedTuple):
    base: ChartPoint
    comps: Array


class CurveJet(NamedTuple):
    """Chart position and ordinary time derivatives of orders 1-3."""

    x: Array
    d1: Array
    d2: Array
    d3: Array


class ChristoffelJet(NamedTuple):
    gamma: Array
    dgamma: Array
    d2gamma: Array


@dataclass(frozen=True)
class ManifoldSpec:
    """A chart of a Riemannian manifold.

    Only ``metric`` is mandatory. Missing Christoffel symbols are obtained by
    central differences of the metric, and a missing Christoffel jet by nested
    central differences of the Christoffel symbols (never by third differences
    of the metric).
    """

    name: str
    dim: int
    metric: Callable[[Array], Array]
    christoffel: Optional[Callable[[Array], Array]] = None
    christoffel_jet: Optional[Callable[[Array], ChristoffelJet]] = None
    in_domain: Optional[Callable[[Array], Array]] = None
    exp: Optional[Callable[[Array, Array], Array]] = None
    log: Optional[Callable[[Array, Array], Array]] = None
    distance: Optional[Callable[[Array, Array], Array]] = None
    embed: Optional[Callable[[Array], Array]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _coords(p) -> Array:
    if isinstance(p, ChartVector):
        p = p.base
    if isinstance(p, ChartPoint):
        p = p.coords
    return np.asarray(p, dtype=float)


def _comps(v) -> Array:
    if isinstance(v, ChartVector):
        v = v.comps
    return np.asarray(v, dtype=float)


def domain_mask(spec: ManifoldSpec, p) -> Array:
    """Boolean mask (shape ``p.shape[:-1]``) of finite, non-singular points."""
    x = _coords(p)
    ok = np.all(np.isfinite(x), axis=-1)
    if spec.in_domain is not None:
        ok = ok & np.asarray(spec.in_domain(x), dtype=bool)
    return ok


def check_domain(spec: ManifoldSpec, p) -> Array:
    x = _coords(p)
    if x.shape[-1] != spec.dim:
        raise ValueError(f"expected chart points of length {spec.dim}, got shape {x.shape}")
    if not np.all(domain_mask(spec, x)):
        raise SingularChartError(f"point outside the chart domain of {spec.name}: {x}")
    return x


def _steps(x: Array, rel: float) -> Array:
    return rel * np.maximum(1.0, np.abs(x))


def _central_diff(fn: Callable[[Array], Array], x: Array, rel: float, points: int = 3) -> Array:
    """∂_l fn(x) by a 3- or 5-point central stencil, stacked on a new trailing axis l."""
    h = _steps(x, rel)
    dim = x.shape[-1]
    cols = []
    for l in range(dim):
        e = np.zeros(dim)
        e[l] = 1.0
        hl = h[..., l : l + 1]
        fp = fn(x + hl * e)
        fm = fn(x - hl * e)
        hb = h[..., l].reshape(h.shape[:-1] + (1,) * (np.ndim(fp) - x.ndim + 1))
        if points == 5:
            fpp = fn(x + 2.0 * hl * e)
            fmm = fn(x - 2.0 * hl * e)
            cols.append((fmm - 8.0 * fm + 8.0 * fp - fpp) / (12.0 * hb))
        else:
            cols.append((fp - fm) / (2.0 * hb))
    return np.stack(cols, axis=-1)


def christoffel_from_metric(metric: Callable[[Array], Array], x: Array) -> Array:
    """Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij) with differenced ∂g."""
    g = metric(x)
    dg = _central_diff(metric, x, FD_REL_STEP)  # dg[..., a, b, c] = ∂_c g_ab
    ginv = np.linalg.inv(g)
    # lowered[..., l, i, j] = ∂_i g_jl + ∂_j g_il − ∂_l g_ij
    lowered = (
        np.einsum("...jli->...lij", dg)
        + np.einsum("...ilj->...lij", dg)
        - np.einsum("...ijl->...lij", dg)
    )
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lowered)


def metric_at(spec: ManifoldSpec, p) -> Array:
    x = check_domain(spec, p)
    return np.asarray(spec.metric(x), dtype=float)


def _christoffel_raw(spec: ManifoldSpec, x: Array) -> Array:
    if spec.christoffel is not None:
        return np.asarray(spec.christoffel(x), dtype=float)
    return christoffel_from_metric(spec.metric, x)


def christoffel_at(spec: ManifoldSpec, p) -> Array:
    x = check_domain(spec, p)
    return _christoffel_raw(spec, x)


def christoffel_jet_raw(spec: ManifoldSpec, x: Array) -> ChristoffelJet:
    """(Γ, ∂Γ, ∂²Γ) without the domain check; used on hot paths."""
    if spec.christoffel_jet is not None:
        return spec.christoffel_jet(x)
    gamma = _christoffel_raw(spec, x)
    if spec.christoffel is not None:
        (h1, h2), pts = (FD_REL_STEP, FD_REL_STEP_SECOND), 3
    else:
        (h1, h2), pts = FD_REL_STEPS_METRIC_ONLY, 5
    dgamma = _central_diff(lambda y: _christoffel_raw(spec, y), x, h1, pts)
    d2gamma = _central_diff(
        lambda y: _central_diff(lambda z: _christoffel_raw(spec, z), y, h2, pts),
        x,
        h2,
        pts,
    )
    return ChristoffelJet(gamma, dgamma, d2gamma)


def christoffel_jet_at(spec: ManifoldSpec, p) -> ChristoffelJet:
    x = check_domain(spec, p)
    return christoffel_jet_raw(spec, x)


def riemann_tensor(gamma: Array, dgamma: Array) -> Array:
    """R^l_kij = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik.

    Returned with index order ``[..., l, k, i, j]``.
    """
    d_i = np.einsum("...ljki->...lkij", dgamma)
    quad = np.einsum("...lim,...mjk->...lkij", gamma, gamma)
    return d_i - np.swapaxes(d_i, -1, -2) + quad - np.swapaxes(quad, -1, -2)


def apply_curvature(riemann: Array, X: Array, Y: Array, Z: Array) -> Array:
    """R(X,Y)Z = R^l_kij X^i Y^j Z^k."""
    return np.einsum("...lkij,...i,...j,...k->...l", riemann, X, Y, Z)


def curvature_at(spec: ManifoldSpec, p, X, Y, Z) -> Array:
    x = check_domain(spec, p)
    jet = christoffel_jet_raw(spec, x)
    riem = riemann_tensor(jet.gamma, jet.dgamma)
    return apply_curvature(riem, _comps(X), _comps(Y), _comps(Z))


def inner(spec: ManifoldSpec, p, u, v) -> Array:
    g = spec.metric(_coords(p))
    return np.einsum("...i,...ij,...j->...", _comps(u), g, _comps(v))


def norm(spec: ManifoldSpec, p, u) -> Array:
    return np.sqrt(np.maximum(inner(spec, p, u, u), 0.0))


def gamma_apply(gamma: Array, a: Array, b: Array) -> Array:
    """Γ(a, b)^k = Γ^k_ij a^i b^j."""
    return np.einsum("...kij,...i,...j->...k", gamma, a, b)


def covariant_derivative_along(gamma: Array, x1: Array, w: Array, w1: Array) -> Array:
    """(DW/dt)^k = W'^k + Γ^k_ij x'^i W^j."""
    return w1 + gamma_apply(gamma, x1, w)


def velocity_covariant_derivatives(
    jet: ChristoffelJet, x1: Array, x2: Array, x3: Array, x4: Optional[Array] = None
) -> tuple:
    """V1..V4 for a curve with chart derivatives x1..x4 at a point with Γ-jet ``jet``.

    ``x4=None`` returns (V1, V2, V3). Passing ``x4=0`` yields the part of V4
    that does not involve x'''' (V4 is x'''' plus that part).
    """
    G, dG, d2G = jet
    Gt = np.einsum("...kijl,...l->...kij", dG, x1)
    v2 = x2 + gamma_apply(G, x1, x1)
    v2_t = x3 + gamma_apply(Gt, x1, x1) + 2.0 * gamma_apply(G, x2, x1)
    v3 = v2_t + gamma_apply(G, x1, v2)
    if x4 is None:
        return x1, v2, v3
    Gtt = np.einsum("...kijlm,...l,...m->...kij", d2G, x1, x1) + np.einsum(
        "...kijl,...l->...kij", dG, x2
    )
    v2_tt = (
        x4
        + gamma_apply(Gtt, x1, x1)
        + 4.0 * gamma_apply(Gt, x2, x1)
        + 2.0 * gamma_apply(G, x3, x1)
        + 2.0 * gamma_apply(G, x2, x2)
    )
    v3_t = v2_tt + gamma_apply(Gt, x1, v2) + gamma_apply(G, x2, v2) + gamma_apply(G, x1, v2_t)
    v4 = v3_t + gamma_apply(G, x1, v3)
    return x1, v2, v3, v4


def covariant_derivatives_of_velocity(spec: ManifoldSpec, jet: CurveJet, d4=None, order: int = 4):
    """Covariant derivatives D^k x/dt^k, k = 1..order, of the velocity along a curve.

    Parameters
    ----------
    spec : ManifoldSpec
    jet : CurveJet
        Chart position and ordinary derivatives of orders 1-3.
    d4 : array, optional
        Fourth ordinary derivative; required when ``order == 4``.
    order : int
        Highest order requested, 1 to 4.

    Returns
    -------
    list of arrays [V1, ..., V_order]
    """
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    x = check_domain(spec, jet.x)
    d1, d2, d3 = (np.asarray(a, dtype=float) for a in (jet.d1, jet.d2, jet.d3))
    if order == 4 and d4 is None:
        raise ValueError("fourth derivative d4 is required for order 4")
    cjet = christoffel_jet_raw(spec, x)
    if order == 4:
        vs = velocity_covariant_derivatives(cjet, d1, d2, d3, np.asarray(d4, dtype=float))
    else:
        vs = velocity_covariant_derivatives(cjet, d1, d2, d3)
    return list(vs[:order])


def _require(spec: ManifoldSpec, name: str):
    fn = getattr(spec, name)
    if fn is None:
        raise UnsupportedManifoldError(f"manifold {spec.name!r} does not provide {name}")
    return fn


def geodesic_distance(spec: ManifoldSpec, p, q) -> Array:
    x, y = check_domain(spec, p), check_domain(spec, q)
    if spec.distance is not None:
        return spec.distance(x, y)
    log = _require(spec, "log")
    return norm(spec, x, log(x, y))


def log_map(spec: ManifoldSpec, p, q) -> Array:
    x, y = check_domain(spec, p), check_domain(spec, q)
    return _require(spec, "log")(x, y)


def exp_map(spec: ManifoldSpec, p, v) -> Array:
    x = check_domain(spec, p)
    return _require(spec, "exp")(x, _comps(v))
