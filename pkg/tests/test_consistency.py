import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_lab.consistency import (KAPPA, ball_extremum, barrier_check, consistency_probe,
                                     random_quadratic_probes, scheme_value)
from finsler_lab.functions import Quadratic
from finsler_lab.norms import PNorm

from conftest import library_norm


def _quad(case):
    return Quadratic(np.array(case["X"], float), np.array(case["p"], float))


def test_scheme_values_match_ball_sampling_oracle(frozen):
    # the oracle samples the ball densely, so it can only miss the extremum from inside
    for case in frozen["scheme_values"]:
        got = scheme_value(library_norm(case["norm"]), _quad(case), case["x0"], case["eps"])
        assert got == pytest.approx(case["value"], abs=2e-4), case


def test_linf_probe_value_is_exact():
    # f = x1 + x2²/2: max over the square is ε + ε²/2, min is -ε, so the value is -1/4
    f = Quadratic(np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([1.0, 0.0]))
    assert scheme_value(PNorm(np.inf), f, np.zeros(2), 0.01) == pytest.approx(-0.25, abs=1e-12)


def test_euclidean_radial_quadratic():
    # |x|²/2 at (1,0): up = (1+ε)²/2, down = (1-ε)²/2, so the value is -1/2
    f = Quadratic(np.eye(2), np.zeros(2))
    assert scheme_value(PNorm(2.0), f, [1.0, 0.0], 0.05) == pytest.approx(-0.5, abs=1e-12)


def test_ball_extremum_of_linear_function_is_dual_norm():
    norm = library_norm("triangle")
    p = np.array([0.3, -1.1])
    f = Quadratic(np.zeros((2, 2)), p)
    val = ball_extremum(norm, f, np.zeros(2), 0.2, "max")
    assert val == pytest.approx(0.2 * norm.dual(p), rel=1e-10)


@pytest.mark.parametrize("name", ["euclidean", "linf", "hexagon", "l1", "triangle"])
def test_linf_probe_limit_in_bracket(name):
    f = Quadratic(np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([1.0, 0.0]))
    rep = consistency_probe(library_norm(name), f, np.zeros(2))
    assert rep.kappa == KAPPA
    assert rep.margin >= -1e-6


@pytest.mark.parametrize("name", ["euclidean", "linf", "hexagon", "triangle"])
def test_random_quadratics_within_bracket(name):
    reps = random_quadratic_probes(library_norm(name), n=6, seed=11)
    assert min(r.margin for r in reps) >= -1e-5


def test_zero_gradient_uses_envelopes():
    f = Quadratic(np.array([[1.0, 0.2], [0.2, -0.4]]), np.zeros(2))
    rep = consistency_probe(library_norm("hexagon"), f, np.zeros(2))
    assert rep.envelope_mode
    assert rep.lower <= rep.upper


def test_stabilised_ladder_takes_last_value():
    f = Quadratic(np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([1.0, 0.0]))
    rep = consistency_probe(PNorm(np.inf), f, np.zeros(2))
    assert rep.limit == rep.values[-1]


@pytest.mark.parametrize("name", ["euclidean", "l3", "hexagon", "triangle"])
def test_radial_barrier_matches_oracle(name, frozen):
    # along the ray the extremes of φ^α over the ball are (r ± ε)^α for every norm
    norm = library_norm(name)
    f = lambda x: norm(x) ** 0.5
    x = np.array([0.6, 0.8])
    x = x / norm(x)
    for case in frozen["barrier_radial"]:
        assert scheme_value(norm, f, x, case["eps"]) == pytest.approx(case["value"], rel=1e-8)


@pytest.mark.parametrize("name", ["euclidean", "hexagon", "triangle", "l3"])
def test_barrier_signs(name):
    rep = barrier_check(library_norm(name), alpha=0.5, samples=12, seed=1)
    assert rep.sign_flips == 0
    assert rep.ok()
    assert min(rep.plus_min) > 0 > max(rep.minus_max)


def test_barrier_alpha_range():
    with pytest.raises(ValueError):
        barrier_check(PNorm(2.0), alpha=1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_scheme_value_is_translation_invariant_for_quadratics(t, a, b, c):
    # ε⁻²[f - M f] only sees Df(x0) and D²f, both affine in x0 for quadratics
    X = np.array([[a, b], [b, c]])
    p = np.array([np.cos(t), np.sin(t)])
    norm = library_norm("hexagon")
    v0 = scheme_value(norm, Quadratic(X, p), np.zeros(2), 0.05)
    shift = np.array([0.3, -0.2])
    g = Quadratic(X, p - X @ shift)  # same gradient at `shift` as f at 0
    v1 = scheme_value(norm, g, shift, 0.05)
    assert v0 == pytest.approx(v1, abs=1e-8)
