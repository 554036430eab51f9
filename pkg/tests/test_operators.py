import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabarrier.operators import (Operator, OperatorError, check_homogeneity, check_monotonicity,
                                   check_profile, dual, evaluate, from_key, inf_laplacian,
                                   jacobi_eigvalsh, p_laplacian_variant, pseudo_p, pucci_minus,
                                   pucci_plus, random_symmetric, weighted_inf, zoo)

finite = st.floats(-3, 3, allow_nan=False)


def test_inf_laplacian_quadratic_form():
    assert evaluate(inf_laplacian(2), [1.0, 0.0], np.eye(2)) == pytest.approx(1.0)


@pytest.mark.parametrize("op", zoo(2), ids=lambda o: o.name)
def test_zero_hessian_gives_zero(op):
    assert evaluate(op, [3.0, -1.0], np.zeros((2, 2))) == 0.0


def test_p_laplacian_variant_arithmetic():
    op = p_laplacian_variant(2, 0)
    assert evaluate(op, [0.0, 1.0], np.diag([2.0, 3.0])) == pytest.approx(5.0)


def test_evaluate_rejects_bad_shapes_and_asymmetry():
    op = inf_laplacian(2)
    with pytest.raises(OperatorError):
        evaluate(op, [1.0, 0.0, 0.0], np.eye(2))
    with pytest.raises(OperatorError):
        evaluate(op, [1.0, 0.0], np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_degree_validation():
    with pytest.raises(OperatorError):
        Operator("bad", -1, 1, 2, lambda p, X: 0 * p[..., 0])
    with pytest.raises(OperatorError):
        Operator("even", 0, 2, 2, lambda p, X: 0 * p[..., 0])


def test_inf_laplacian_scaling_in_gradient():
    op = inf_laplacian(2)
    rng = np.random.default_rng(3)
    X = random_symmetric(rng, 2, 1)[0]
    e = np.array([0.6, 0.8])
    assert evaluate(op, 2 * e, X) == pytest.approx(4 * evaluate(op, e, X))


@pytest.mark.parametrize("op", zoo(2), ids=lambda o: o.name)
def test_zoo_and_duals_pass_conditions(op):
    for o in (op, dual(op)):
        assert check_homogeneity(o, 1000, 0).passed
        assert check_monotonicity(o, 1000, 0).passed


def test_sign_flipped_trace_fails_monotonicity():
    bad = Operator("neg_trace", 0, 1, 2, lambda p, X: -np.trace(X, axis1=-2, axis2=-1))
    rep = check_monotonicity(bad, 200, 0)
    assert not rep.passed and len(rep.violations) > 0


def test_wrong_declared_degree_fails_homogeneity():
    lie = Operator("lie", 1, 1, 2, inf_laplacian(2).fn)
    assert not check_homogeneity(lie, 200, 0).passed


def test_closed_form_profiles():
    lams = np.linspace(-3, 5, 17)
    dirs = [[1, 0], [0.6, 0.8], [-1, 1]]
    for op in (inf_laplacian(2), p_laplacian_variant(1, 1), pucci_plus(1, 2), pucci_minus(1, 3, 1)):
        assert check_profile(op, lams, dirs).passed
    op = pucci_plus(1, 2)
    assert op.lambda_profile(0.5, None) == pytest.approx(2 * (2 - 0.5))


def test_from_key_round_trip():
    for op in zoo(2):
        again = from_key(op.key, 2)
        assert again.name == op.name and again.k == op.k
    with pytest.raises(OperatorError):
        from_key("nope(1)")
    with pytest.raises(OperatorError):
        from_key("pucci_minus(1,2)")


def test_weighted_inf_degrees():
    op = weighted_inf(2)
    assert (op.k1, op.k2, op.gamma) == (6, 1, 8)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_jacobi_matches_numpy(vals):
    a, b, d = vals
    A = np.array([[a, b], [b, d]])
    np.testing.assert_allclose(jacobi_eigvalsh(A), np.linalg.eigvalsh(A), atol=1e-10)


def test_jacobi_batched_3x3():
    rng = np.random.default_rng(1)
    A = random_symmetric(rng, 3, 50)
    np.testing.assert_allclose(jacobi_eigvalsh(A), np.linalg.eigvalsh(A), atol=1e-10)


@given(st.tuples(finite, finite), st.floats(0.1, 4.0), st.floats(0.1, 4.0),
       st.integers(0, 5))
def test_homogeneity_property(p, s, t, which):
    op = zoo(2)[which]
    rng = np.random.default_rng(which)
    X = random_symmetric(rng, 2, 1)[0]
    p = np.asarray(p)
    base = evaluate(op, p, X)
    scaled = evaluate(op, s * p, t * X)
    assert scaled == pytest.approx(s ** op.k1 * t ** op.k2 * base, rel=1e-9, abs=1e-9)


@given(st.tuples(finite, finite), st.tuples(finite, finite), st.integers(0, 5))
def test_monotonicity_property(p, v, which):
    op = zoo(2)[which]
    X = random_symmetric(np.random.default_rng(7), 2, 1)[0]
    v = np.asarray(v)
    W = np.outer(v, v)
    assert evaluate(op, p, X + W) >= evaluate(op, p, X) - 1e-9 * (1 + abs(evaluate(op, p, X)))


def test_pseudo_p_degree():
    op = pseudo_p(3, 1)
    assert op.k1 == 4 and op.k2 == 1
