"""Independent reference computations used by the tests.

Nothing here imports the package; each oracle is a direct transcription of a
closed form or a plain loop implementation.
"""

import numpy as np


def sphere_embedding(theta, phi):
    return np.array([np.sin(theta) * np.sin(phi), np.sin(theta) * np.cos(phi), np.cos(theta)])


def sphere_pullback_metric(theta, phi):
    """g = EᵀE with E the embedding Jacobian."""
    e_theta = np.array([np.cos(theta) * np.sin(phi), np.cos(theta) * np.cos(phi), -np.sin(theta)])
    e_phi = np.array([np.sin(theta) * np.cos(phi), -np.sin(theta) * np.sin(phi), 0.0])
    E = np.column_stack([e_theta, e_phi])
    return E.T @ E


def sphere_distance(p, q):
    c = np.clip(sphere_embedding(*p) @ sphere_embedding(*q), -1.0, 1.0)
    return float(np.arccos(c))


def fd_christoffel(metric, x, h=1e-6):
    """Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij) with loop-based central differences."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    dg = np.zeros((m, m, m))  # dg[l, i, j] = ∂_l g_ij
    for l in range(m):
        e = np.zeros(m)
        e[l] = h
        dg[l] = (metric(x + e) - metric(x - e)) / (2 * h)
    ginv = np.linalg.inv(metric(x))
    gamma = np.zeros((m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(m):
                s = 0.0
                for l in range(m):
                    s += ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                gamma[k, i, j] = 0.5 * s
    return gamma


def unit_sphere_curvature(g, X, Y, Z):
    """R(X,Y)Z = ⟨Y,Z⟩X − ⟨X,Z⟩Y for sectional curvature 1."""
    return (Y @ g @ Z) * X - (X @ g @ Z) * Y


def sphere_d4(th, ph):
    """Chart components of D⁴x/dt⁴ on S² from jets th = (θ, θ', ..., θ''''), ph likewise.

    Re-derived symbolically from g = diag(1, sin²θ); the φ'³ coefficient
    sin2θ − cotθ(5cos²θ − 1) equals (7/2)sin2θ − 4cotθ.
    """
    t, t1, t2, t3, t4 = th
    _, p1, p2, p3, p4 = ph
    s, c = np.sin(t), np.cos(t)
    cot = c / s
    s2 = np.sin(2 * t)
    d4_theta = (
        t4
        + 5 * s2 * t1**2 * p1**2
        + (1 - 7 * c**2) * t2 * p1**2
        + (5 - 17 * c**2) * t1 * p1 * p2
        - 3 * s * c * p2**2
        - 2 * s2 * p1 * p3
        + s * c**3 * p1**4
    )
    d4_phi = (
        p4
        - 7 * t1 * t2 * p1
        - 5 * t1**2 * p2
        + 4 * cot * t3 * p1
        + 6 * cot * t2 * p2
        + 4 * cot * p3 * t1
        + (s2 - cot * (5 * c**2 - 1)) * t1 * p1**3
        - 6 * c**2 * p1**2 * p2
        - 2 * cot * p1 * t1**3
    )
    return np.array([d4_theta, d4_phi])


def cubic_hermite(t):
    """Solution of x'''' = 0 with (x, x')(0) = (0, 0), (x, x')(1) = (1, 0)."""
    return 3 * t**2 - 2 * t**3


def central_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function of an array argument."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        step = h * max(1.0, abs(x[idx]))
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        out[idx] = (f(xp) - f(xm)) / (2 * step)
    return out
