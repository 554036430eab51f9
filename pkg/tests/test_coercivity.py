import numpy as np
import pytest

from parabarrier.coercivity import (crosscheck_closed_form, m_mu, profile, sphere_extrema,
                                    sphere_points)
from parabarrier.operators import (Operator, inf_laplacian, p_laplacian_variant, pseudo_p,
                                   pucci_minus, pucci_plus, weighted_inf)


def test_sphere_points_are_unit():
    for n in (2, 3, 4):
        pts = sphere_points(n, 256)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)


def test_inf_laplacian_extrema_at_zero():
    ex = sphere_extrema(inf_laplacian(2), 0.0)
    assert tuple(ex) == pytest.approx((1.0, 1.0, -1.0, -1.0), abs=1e-9)


def test_pucci_plus_at_zero():
    ex = sphere_extrema(pucci_plus(1, 2, 0), 0.0)
    assert ex.m_min == pytest.approx(4.0, abs=1e-9) and ex.m_max == pytest.approx(4.0, abs=1e-9)


def test_pseudo_p_at_zero():
    ex = sphere_extrema(pseudo_p(2, 0), 0.0)
    assert ex.m_min == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [-3.0, -0.5, 0.0, 0.7, 1.0, 1.5, 3.2])
def test_inf_laplacian_profile_is_one_minus_lambda(lam):
    m, mu = m_mu(inf_laplacian(2), lam)
    assert m == pytest.approx(1 - lam, abs=1e-6) and mu == pytest.approx(1 - lam, abs=1e-6)


@pytest.mark.parametrize("lam", [-2.0, 0.0, 1.0, 2.5])
def test_p_laplacian_variant_profile(lam):
    q, a = 1.0, 1.0
    m, mu = m_mu(p_laplacian_variant(q, a), lam)
    want = 2 + a - lam * (1 + a)
    assert m == pytest.approx(want, abs=1e-6) and mu == pytest.approx(want, abs=1e-6)


def test_inf_laplacian_classification():
    prof = profile(inf_laplacian(2), -4, 4, 81)
    assert prof.case_tag == "CaseI"
    assert prof.lambda1 == pytest.approx(1.0, abs=1e-5) and prof.lambda0 == pytest.approx(1.0, abs=1e-5)
    assert prof.lambda_bar == pytest.approx(1.01)
    assert crosscheck_closed_form(prof, inf_laplacian(2)).max_error <= 1e-6


def test_pucci_minus_classification_and_mu():
    op = pucci_minus(1, 3, 1)
    prof = profile(op)
    assert prof.case_tag == "CaseII"
    assert prof.lambda_bar == pytest.approx(4.0, abs=1e-3)
    assert m_mu(op, 4.5)[1] == pytest.approx(-0.5, abs=1e-6)
    assert crosscheck_closed_form(prof, op).passed


def test_nonnegative_operator_fails_classification():
    op = Operator("pos_trace", 1, 1, 2,
                  lambda p, X: np.linalg.norm(p, axis=-1) * np.maximum(np.trace(X, axis1=-2, axis2=-1), 0))
    assert profile(op, -2, 4, 31).case_tag == "Fails"


def test_pseudo_p_sandwich_at_two():
    op = pseudo_p(2, 0)
    prof = profile(op, -4, 4, 81)
    rep = crosscheck_closed_form(prof, op)
    assert rep.passed
    _, mu = m_mu(op, 2.0)
    assert mu <= 1e-9


def test_weighted_inf_lower_bound_at_zero():
    m, _ = m_mu(weighted_inf(2), 0.0)
    assert m >= 0.25 - 1e-9


def test_profile_json_schema():
    d = profile(inf_laplacian(2), -1, 2, 31).as_dict()
    assert {"operator", "grid", "lambda1", "lambda0", "lambda_bar", "case"} <= set(d)
    assert {"lambda", "m", "mu"} <= set(d["grid"][0])


@pytest.mark.parametrize("idx", range(6))
def test_profile_invariants(idx):
    from parabarrier.operators import zoo
    from parabarrier.problem import default_profile
    op = zoo(2)[idx]
    prof = default_profile(op)
    m, mu, g = prof.m_values, prof.mu_values, prof.lambda_grid
    assert np.all(m <= mu + 1e-9)
    assert np.all(np.diff(m) <= 1e-9) and np.all(np.diff(mu) <= 1e-9)
    assert np.all(m[g <= 1] >= -1e-9)
    if prof.case_tag == "CaseI":
        assert 1 < prof.lambda_bar < 2 and m_mu(op, prof.lambda_bar)[1] < 0
    elif prof.case_tag == "CaseII":
        assert prof.lambda_bar >= 2 and np.all(mu[g > prof.lambda_bar] < 0)
