import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cases import POTENTIAL_FORMS, SE2
from riemplan.errors import BarrierViolation, UnsupportedManifoldError
from riemplan.manifolds import euclidean, sphere2
from riemplan.potentials import (
    CollisionSpec,
    ObstacleSpec,
    PotentialBundle,
    clearance_report,
    potential_differential,
    potential_gradient,
    potential_value,
)

DISC = ObstacleSpec("planar_disc", 1.0, center=(0.0, 0.0), radius=1.0)


def test_disc_value_example():
    bundle = PotentialBundle((DISC,), CollisionSpec(0.0, 0.5))
    v = potential_value(bundle, SE2, [[3.0, 0.0, 0.0]])
    assert abs(v - 1.0 / 6.75) < 1e-15
    assert abs(v - 0.148148148148148) < 1e-12


def test_zero_strengths_give_zero():
    bundle = PotentialBundle((ObstacleSpec("planar_disc", 0.0, center=(0, 0), radius=1.0),), CollisionSpec(0.0, 0.5))
    X = [[0.1, 0.0, 0.0], [0.2, 0.0, 0.0]]
    assert potential_value(bundle, SE2, X) == 0.0
    assert not np.any(potential_gradient(bundle, SE2, X))
    assert bundle.is_zero


def test_sphere_collision_example():
    bundle = PotentialBundle(collision=CollisionSpec(1.0, 0.0, "sphere_inverse_dsq"))
    v = potential_value(bundle, sphere2(), [[np.pi / 2, 0.0], [np.pi / 2, np.pi / 2]])
    assert abs(v - 2.0 / np.pi**2) < 1e-14


def test_sphere_cap_gradient_example():
    bundle = PotentialBundle((ObstacleSpec("sphere_cap", 1.0, theta_cap=np.pi / 4),))
    g = potential_gradient(bundle, sphere2(), [[np.pi / 2, 0.3]])
    assert abs(g[0, 0] - (-2.0 / (np.pi / 4) ** 3)) < 1e-12
    assert abs(g[0, 0] + 4.128196) < 1e-6
    assert g[0, 1] == 0.0


def test_se2_pair_gradient_matches_fd():
    bundle = PotentialBundle(collision=CollisionSpec(1.0, 0.25, "se2_squared"))
    X = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    dV = potential_differential(bundle, SE2, X)
    fd = oracles.central_gradient(lambda Y: potential_value(bundle, SE2, Y), X)
    assert np.max(np.abs(dV[0] - fd[0])) < 1e-6 * np.max(np.abs(fd[0]))
    # u = 4 − 0.25, ∂V/∂x1 = −σ u'/u² with u' = 2(x1 − x2)
    assert abs(dV[0, 0] - (-1.0 * (-4.0) / 3.75**2)) < 1e-14


def check_gradient(spec, bundle, X):
    """Relative error of the raised gradient against central differences of V."""
    grad = potential_gradient(bundle, spec, X)
    lowered = np.einsum("nij,nj->ni", spec.metric(X), grad)
    fd = oracles.central_gradient(lambda Y: potential_value(bundle, spec, Y), X)
    return np.linalg.norm(lowered - fd) / max(np.linalg.norm(fd), 1e-300)


@pytest.mark.parametrize("form", sorted(POTENTIAL_FORMS))
def test_gradient_vs_finite_differences(form):
    spec, bundle, sample = POTENTIAL_FORMS[form]
    rng = np.random.default_rng(7)
    errs = [check_gradient(spec, bundle, sample(rng)) for _ in range(50)]
    assert max(errs) < 1e-5


@pytest.mark.parametrize("form", sorted(POTENTIAL_FORMS))
def test_differential_is_lowered_gradient(form):
    spec, bundle, sample = POTENTIAL_FORMS[form]
    X = sample(np.random.default_rng(8))
    np.testing.assert_allclose(
        potential_differential(bundle, spec, X),
        np.einsum("nij,nj->ni", spec.metric(X), potential_gradient(bundle, spec, X)),
        rtol=1e-12,
        atol=1e-12,
    )


@pytest.mark.parametrize("form", ["se2_squared", "sphere_inverse_dsq", "inverse_distance", "cutoff_mixed"])
def test_permutation_symmetry(form):
    spec, bundle, sample = POTENTIAL_FORMS[form]
    rng = np.random.default_rng(9)
    for _ in range(10):
        X = sample(rng)
        perm = rng.permutation(len(X))
        assert potential_value(bundle, spec, X[perm]) == pytest.approx(potential_value(bundle, spec, X), rel=1e-15)
        np.testing.assert_allclose(
            potential_gradient(bundle, spec, X[perm]), potential_gradient(bundle, spec, X)[perm], rtol=1e-13, atol=1e-15
        )


def test_half_double_sum_equals_pair_sum():
    spec, bundle, sample = POTENTIAL_FORMS["sphere_inverse_dsq"]
    X = sample(np.random.default_rng(10))
    n = len(X)
    double = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                double += 0.5 / oracles.sphere_distance(X[i], X[j]) ** 2
    assert potential_value(bundle, spec, X) == pytest.approx(0.5 * double, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(angle=st.floats(0, 2 * np.pi), start=st.floats(1.5, 4.0))
def test_barrier_blowup_monotone(angle, start):
    bundle = PotentialBundle((DISC,), CollisionSpec(0.0, 0.2))
    direction = np.array([np.cos(angle), np.sin(angle)])
    boundary = 1.2 * direction
    s = np.linspace(0.0, 1.0 - 1e-6, 200)
    pts = [np.r_[boundary + (start - 1.2) * (1 - si) * direction, 0.0] for si in s]
    vals = np.array([potential_value(bundle, SE2, [p]) for p in pts])
    assert np.all(np.diff(vals[-10:]) > 0)


def test_sphere_cap_blowup_monotone():
    bundle = PotentialBundle((ObstacleSpec("sphere_cap", 1.0, theta_cap=np.pi / 4),))
    thetas = np.linspace(1.5, np.pi / 4 + 1e-6, 100)
    vals = [potential_value(bundle, sphere2(), [[th, 0.4]]) for th in thetas]
    assert np.all(np.diff(vals[-10:]) > 0)


def test_barrier_violation_raises():
    bundle = PotentialBundle((DISC,), CollisionSpec(0.0, 0.2))
    with pytest.raises(BarrierViolation):
        potential_value(bundle, SE2, [[0.5, 0.0, 0.0]])
    with pytest.raises(BarrierViolation):
        potential_gradient(bundle, SE2, [[0.5, 0.0, 0.0]])
    pair = PotentialBundle(collision=CollisionSpec(1.0, 0.5, "se2_squared"))
    with pytest.raises(BarrierViolation):
        potential_value(pair, SE2, [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])


def test_self_interaction_excluded():
    bundle = PotentialBundle(collision=CollisionSpec(1.0, 0.1, "se2_squared"))
    assert potential_value(bundle, SE2, [[0.0, 0.0, 0.0]]) == 0.0


def test_batched_evaluation_matches_loop():
    spec, bundle, sample = POTENTIAL_FORMS["cutoff_mixed"]
    rng = np.random.default_rng(11)
    X = np.stack([sample(rng) for _ in range(6)])
    batched = potential_value(bundle, spec, X)
    for k in range(6):
        assert batched[k] == potential_value(bundle, spec, X[k])


def test_cutoff_switches_terms_off():
    bundle = PotentialBundle((DISC,), CollisionSpec(0.0, 0.0), cutoff=(1.0, 2.0))
    assert potential_value(bundle, SE2, [[3.0, 0.0, 0.0]]) == 0.0
    near = potential_value(bundle, SE2, [[1.2, 0.0, 0.0]])
    assert near == pytest.approx(1.0 / (1.44 - 1.0))


def test_planar_terms_need_planar_chart():
    bundle = PotentialBundle((DISC,))
    with pytest.raises(UnsupportedManifoldError):
        potential_value(bundle, euclidean(1), [[3.0]])


def test_clearance_report_single_agent():
    bundle = PotentialBundle((DISC,), CollisionSpec(1.0, 0.2, "se2_squared"))
    samples = np.array([[[3.0, 0.0, 0.0]], [[2.5, 1.0, 0.0]]])
    rep = clearance_report(bundle, SE2, samples)
    assert np.all(rep.min_obstacle_level > 0)
    assert rep.pair_clearance == np.inf
    assert rep.pair_distance == np.inf


def test_clearance_report_reports_zero_strength_terms():
    bundle = PotentialBundle(
        (ObstacleSpec("planar_disc", 0.0, center=(0, 0), radius=1.0),), CollisionSpec(0.0, 0.2, "se2_squared")
    )
    rep = clearance_report(bundle, SE2, np.array([[[3.0, 0.0, 0.0], [0.0, 3.0, 0.0]]]))
    assert rep.obstacle_clearance == pytest.approx(9.0 - 1.44)
    assert rep.pair_clearance == pytest.approx(18.0 - 0.16)
    assert rep.pair_distance == pytest.approx(np.sqrt(2.0 * 18.0))


def test_clearance_on_se2_fixture(se2_two_agents):
    sol = se2_two_agents.solution
    rep = clearance_report(se2_two_agents.scenario.bundle, SE2, sol.positions)
    assert rep.pair_clearance > 0
    assert rep.obstacle_clearance > 0
