import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabarrier.coercivity import profile
from parabarrier.operators import evaluate, inf_laplacian, pucci_minus, zoo
from parabarrier.radial import (RadialError, RadialProfile, bounds, m_mu_at, radial_gradient_hessian,
                                reduce)


def test_square_profile_derivatives():
    prof = RadialProfile(0.0, 1.0, 2.0, (0.2, -0.1))
    x = np.array([0.7, 0.4])
    p, X = radial_gradient_hessian(prof, x)
    np.testing.assert_allclose(p, 2 * (x - np.array([0.2, -0.1])), atol=1e-14)
    np.testing.assert_allclose(X, 2 * np.eye(2), atol=1e-14)


def test_square_root_profile_derivatives():
    prof = RadialProfile(1.0, 2.0, 0.5, (0.0, 0.0))
    e = np.array([0.6, 0.8])
    assert prof.d1(1.0) == pytest.approx(1.0)
    assert prof.d2(1.0) == pytest.approx(-0.5)
    _, X = radial_gradient_hessian(prof, e)
    np.testing.assert_allclose(X, np.eye(2) - 1.5 * np.outer(e, e), atol=1e-14)


def test_degenerate_profiles_rejected():
    with pytest.raises(RadialError):
        RadialProfile(1.0, 0.0, 2.0, (0, 0))
    with pytest.raises(RadialError):
        RadialProfile(1.0, 1.0, 0.0, (0, 0))


def test_inf_laplacian_reduction_value():
    prof = RadialProfile(1.0, 2.0, 0.5, (0.0, 0.0))
    assert float(reduce(inf_laplacian(2), prof, 1.0)) == pytest.approx(-0.5)


def test_reduction_at_beta_two():
    op = pucci_minus(1, 3, 1)
    b, r = 1.5, 0.7
    prof = RadialProfile(0.0, b, 2.0, (0.0, 0.0))
    want = (2 * b) ** op.k * r ** op.k1 * evaluate(op, [1.0, 0.0], np.eye(2))
    assert float(reduce(op, prof, r)) == pytest.approx(want)
    neg = RadialProfile(0.0, -b, 2.0, (0.0, 0.0))
    want = (2 * b) ** op.k * r ** op.k1 * evaluate(op, [1.0, 0.0], -np.eye(2))
    assert float(reduce(op, neg, r)) == pytest.approx(want)


def test_bounds_pinch_for_symmetric_profile():
    op = inf_laplacian(2)
    coer = profile(op, -4, 6, 41)
    lo, hi = bounds(op, coer, 1.0, 1.0, 1.0)
    assert lo == pytest.approx(0.0, abs=1e-9) and hi == pytest.approx(0.0, abs=1e-9)
    prof = RadialProfile(0.0, 1.0, 1.0, (0.0, 0.0))
    assert float(reduce(op, prof, 1.0)) == pytest.approx(0.0, abs=1e-12)
    lo, hi = bounds(op, coer, 0.8, 0.5, 1.3)
    val = float(reduce(op, RadialProfile(0.0, 0.8, 0.5, (0, 0)), 1.3))
    assert lo == pytest.approx(val) and hi == pytest.approx(val)


def test_bounds_outside_grid():
    op = inf_laplacian(2)
    coer = profile(op, -1, 2, 31)
    with pytest.raises(RadialError):
        bounds(op, coer, 1.0, 5.0, 1.0)


@given(st.integers(0, 5), st.floats(-1, 1), st.floats(0.1, 5) | st.floats(-5, -0.1),
       st.sampled_from([-1.5, -0.5, 0.5, 1.5, 2.5]), st.floats(0.2, 2.0), st.floats(0, 2 * np.pi))
def test_reduction_matches_direct_evaluation(which, a, b, beta, r, angle):
    op = zoo(2)[which]
    e = np.array([np.cos(angle), np.sin(angle)])
    prof = RadialProfile(a, b, beta, (0.3, -0.2))
    p, X = radial_gradient_hessian(prof, np.array([0.3, -0.2]) + r * e)
    direct = float(op(p, X))
    scale = max(abs(direct), abs(b * beta) ** op.k * r ** (beta * op.k - op.gamma))
    assert abs(float(reduce(op, prof, r, e)) - direct) <= 1e-8 * scale


def test_m_mu_at_is_cached():
    op = inf_laplacian(2)
    assert m_mu_at(op, 0.3) is m_mu_at(op, 0.3)


@given(st.floats(-2, 2), st.floats(0.2, 3) | st.floats(-3, -0.2), st.floats(-2.5, 3.0).filter(lambda v: abs(v) > 0.1),
       st.floats(0.3, 2.0))
def test_profile_derivatives_and_exponent_identity(a, b, beta, r):
    prof = RadialProfile(a, b, beta, (0.0, 0.0))
    h = 1e-5 * r
    fd1 = (prof.value(r + h) - prof.value(r - h)) / (2 * h)
    fd2 = (prof.d1(r + h) - prof.d1(r - h)) / (2 * h)
    assert fd1 == pytest.approx(prof.d1(r), rel=1e-6)
    assert fd2 == pytest.approx(prof.d2(r), rel=1e-6, abs=1e-9)
    assert r * prof.d2(r) / prof.d1(r) - 1 == pytest.approx(beta - 2, abs=1e-12)
