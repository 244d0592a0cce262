import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_lab.cones import (ConicalTestFn, MollifiedGraph, admissible_radius, bump_rule,
                               conical_test_fn, graph_g, mollified_graph, perturbed_psi_gauge,
                               psi_gauge, touching_check)
from finsler_lab.norms import PNorm, make_face
from finsler_lab.regularize import regularize

from conftest import library_norm


@pytest.fixture(scope="module")
def segment_cone(frozen):
    c = frozen["cone"]
    F = make_face(np.array([c["a"], c["b"]]), c["e"])
    return ConicalTestFn(np.array(c["e"]), F, c["nu"]), c


def test_psi_matches_ray_oracle(segment_cone):
    cone, c = segment_cone
    got = psi_gauge(cone, np.array(c["points"]))
    np.testing.assert_allclose(got, c["psi"], rtol=1e-9)


def test_psi_is_homogeneous(segment_cone):
    cone, c = segment_cone
    x = np.array(c["points"])
    np.testing.assert_allclose(psi_gauge(cone, 3.0 * x), 3.0 * psi_gauge(cone, x), rtol=1e-10)


def test_psi_infinite_on_missing_rays(segment_cone):
    cone, _ = segment_cone
    assert psi_gauge(cone, np.array([-1.0, -1.0])) == np.inf
    assert psi_gauge(cone, np.zeros(2)) == 0.0


def test_face_off_hyperplane_rejected():
    F = make_face(np.array([[1.0, 0.0], [0.0, 2.0]]), [1.0, 1.0])
    with pytest.raises(ValueError):
        ConicalTestFn(np.array([1.0, 1.0]), F, 0.2)


def test_nonpositive_nu_rejected():
    with pytest.raises(ValueError):
        conical_test_fn(PNorm(1.0), [1.0, 1.0], 0.0)


def test_euclidean_nu_one_touches_on_ray():
    """The unit disc is its own interior ball: ψ = φ on the ray and ψ >= φ elsewhere."""
    rep = touching_check(PNorm(2.0), [0.6, 0.8], 1.0, samples=2000, seed=1, ray_samples=50)
    assert rep.ray_error <= 1e-10
    assert rep.min_gap >= -1e-10


@pytest.mark.parametrize("base", ["l1", "hexagon", "triangle"])
def test_touching_regularized(base):
    reg = regularize(library_norm(base), 0.3)
    rep = touching_check(reg, [1.0, 0.4], 0.3, samples=3000, seed=2, ray_samples=50)
    assert rep.min_gap >= -1e-8
    assert rep.ray_error <= 1e-8


def test_strict_touching_when_nu_below_zeta():
    reg = regularize(library_norm("hexagon"), 0.3)
    rep = touching_check(reg, [1.0, 1.0], 0.15, samples=3000, seed=3, ray_samples=30, zeta=0.3)
    assert rep.strict_margin > 0


def test_graph_g_on_face_is_c(segment_cone):
    cone, _ = segment_cone
    mid = cone.Gp.vertices.mean(axis=0)
    assert graph_g(cone, mid) == pytest.approx(cone.c, abs=1e-15)


def test_graph_g_outside_domain_raises(segment_cone):
    cone, _ = segment_cone
    far = cone.Gp.vertices[0] + 10 * (cone.Gp.vertices[0] - cone.Gp.vertices[1])
    with pytest.raises(ValueError):
        graph_g(cone, far)


def test_graph_points_have_unit_psi(segment_cone):
    cone, _ = segment_cone
    r = admissible_radius(cone, probes=32, seed=0)
    assert 0 < r <= cone.nu / 4


@pytest.mark.parametrize("dim", [1, 2])
def test_bump_rule_normalised(dim):
    nodes, w = bump_rule(dim, 24)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
    assert np.all(w >= 0)
    assert np.all(np.linalg.norm(nodes, axis=1) < 1.0)


def test_bump_rule_dim_three_unsupported():
    with pytest.raises(ValueError):
        bump_rule(3)


def test_mollified_flat_inside_face():
    reg = regularize(PNorm(1.0), 0.3)
    cone = conical_test_fn(reg, [1.0, 1.0], 0.3)
    mg = MollifiedGraph(cone, 0.05)
    G = cone.Gp.vertices
    t = np.linspace(0.1, 0.9, 9)[:, None]
    pts = (1 - t) * G[0] + t * G[1]  # depth >= 0.14 > ε along the face
    assert np.max(np.abs(mollified_graph(mg, pts) - cone.c)) <= 1e-10


def test_mollified_scale_must_be_below_nu(segment_cone):
    cone, _ = segment_cone
    with pytest.raises(ValueError):
        MollifiedGraph(cone, cone.nu)


def test_mollified_domain_check(segment_cone):
    cone, _ = segment_cone
    mg = MollifiedGraph(cone, 0.1)
    far = cone.Gp.vertices[0] + 0.25 * (cone.Gp.vertices[0] - cone.Gp.vertices[1])
    with pytest.raises(ValueError):
        mg.evaluate(far)


def test_perturbed_gauge_dominates_psi_near_face(segment_cone):
    # the mollified hypograph sits inside F_(e,ν), so its gauge is not smaller
    cone, _ = segment_cone
    mg = MollifiedGraph(cone, 0.05)
    rng = np.random.default_rng(0)
    G = cone.F.vertices
    t = rng.uniform(0.0, 1.0, (40, 1))
    x = ((1 - t) * G[0] + t * G[1]) * rng.uniform(0.5, 2.0, (40, 1))
    pg = perturbed_psi_gauge(mg, 0.05, x)
    ps = psi_gauge(cone, x)
    finite = np.isfinite(pg)
    assert np.any(finite)
    assert np.all(pg[finite] >= ps[finite] - 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.3, 3.0))
def test_psi_equals_norm_on_cone_over_face(t, s):
    reg = regularize(library_norm("triangle"), 0.25)
    cone = conical_test_fn(reg, [1.0, 1.0], 0.25)
    G = cone.F.vertices
    x = s * ((1 - t) * G[0] + t * G[-1])
    assert psi_gauge(cone, x) == pytest.approx(reg(x), abs=1e-8 * s)
