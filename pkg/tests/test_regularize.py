import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_lab.norms import PNorm
from finsler_lab.regularize import (dual_rule_value, face_by_membership, gamma_constant,
                                    hessian_bound_check, regularization_report, regularize)

from conftest import library_norm


@pytest.mark.parametrize("base", ["l1", "hexagon", "triangle"])
@pytest.mark.parametrize("zeta", [0.1, 0.3, 0.5])
def test_gauge_matches_bisection_oracle(base, zeta, frozen):
    reg = regularize(library_norm(base), zeta)
    got = reg(np.array(frozen["regularized_points"]))
    np.testing.assert_allclose(got, frozen["regularized"][f"{base}:{zeta}"], rtol=1e-10)


def test_euclidean_regularization_is_a_ball():
    reg = regularize(PNorm(2.0), 0.25)
    x = np.random.default_rng(0).standard_normal((50, 2))
    np.testing.assert_allclose(reg(x), np.linalg.norm(x, axis=1) / 1.25, rtol=1e-12)


def test_euclidean_face_shift_is_exact():
    reg = regularize(PNorm(2.0), 0.4)
    p = np.array([0.6, -0.8])
    np.testing.assert_allclose(reg.face(p).vertices[0], 1.4 * p, atol=1e-15)


@pytest.mark.parametrize("zeta", [0.0, 1.0, -0.2, 1.5])
def test_zeta_out_of_range(zeta):
    with pytest.raises(ValueError):
        regularize(PNorm(1.0), zeta)


def test_additive_dual_rule_matches_gauge():
    reg = regularize(library_norm("hexagon"), 0.3)
    x = np.random.default_rng(1).standard_normal((40, 2))
    np.testing.assert_allclose(dual_rule_value(reg, x), reg(x), rtol=1e-8)


def test_membership_faces_shift_identity_l1():
    reg = regularize(PNorm(1.0), 0.3)
    dirs = np.random.default_rng(2).standard_normal((16, 2))
    dirs = np.vstack([dirs, [[1.0, 1.0], [-1.0, 1.0]]])  # exact facet normals
    for p, F in zip(dirs, face_by_membership(reg, dirs)):
        shifted = reg.base.face(p).translated(0.3 * p / np.linalg.norm(p))
        assert F.hausdorff(shifted) <= 1e-6


def test_report_l1_quarter():
    rep = regularization_report(regularize(PNorm(1.0), 0.25), samples=32, seed=0)
    assert rep.shift_error <= 1e-6
    assert rep.monotone_excess <= 1e-12
    assert rep.kappa > 0
    assert rep.interior_ball_defect >= -1e-6
    assert rep.exact_projection


def test_regularized_is_below_base():
    base = library_norm("triangle")
    reg = regularize(base, 0.2)
    x = np.random.default_rng(4).standard_normal((200, 2))
    assert np.all(reg(x) <= base(x) * (1 + 1e-12))


def test_hessian_bound_holds():
    rep = hessian_bound_check(regularize(PNorm(1.0), 0.3), samples=64, seed=0)
    assert rep.worst_ratio <= 1.0
    assert rep.gamma == pytest.approx(gamma_constant(rep.delta))


def test_euclidean_hessian_curvature():
    # φ_ζ = |x|/1.5: φ_ζ D²φ_ζ has largest eigenvalue 1/1.5² · ... <= 1
    rep = hessian_bound_check(regularize(PNorm(2.0), 0.5), samples=64, seed=0)
    assert rep.max_curvature <= 1.0 + 1e-4
    assert rep.max_curvature <= rep.bound


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0, 2 * np.pi))
def test_boundary_points_at_distance_zeta(zeta, theta):
    reg = regularize(library_norm("hexagon"), zeta)
    u = np.array([np.cos(theta), np.sin(theta)])
    q = reg.boundary_points(u)
    assert reg.base.ball_distance(q) == pytest.approx(zeta, abs=1e-9)
