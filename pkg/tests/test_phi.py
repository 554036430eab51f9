import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabarrier.phi import (PhiError, RangeError, check_concavity, constant, exp_phi,
                             nonlinearity_from_key, power, solve_phi, transform, unit)


@dataclasses.dataclass(frozen=True)
class Field:
    values: np.ndarray
    meta: dict = dataclasses.field(default_factory=dict)


def test_constant_f_gives_linear_phi():
    sol = solve_phi(constant(4.0), 2.0, 0.5, (-1.0, 1.0), 400)
    taus = np.linspace(-1, 1, 13)
    np.testing.assert_allclose(sol.phi(taus), 0.5 + 4.0 * taus, atol=1e-9)
    assert sol.closed_form_tag == "Linear"


def test_f_equal_u_with_k3_gives_square():
    sol = solve_phi(power(1.0, 1.0), 3.0, 1.0, (0.0, 2.0), 1000)
    taus = np.linspace(0, 2, 9)
    np.testing.assert_allclose(sol.phi(taus), (taus / 2 + 1) ** 2, rtol=1e-8)
    assert sol.closed_form_tag == "Power"


def test_closed_form_tags():
    assert solve_phi(power(1.0, 1.0), 2.0, 1.0, (0, 1), 100).closed_form_tag == "Exp"
    assert solve_phi(power(3.0, 2.0), 3.0, 1.0, (-0.5, 0.5), 100).closed_form_tag == "Exp"


@pytest.mark.parametrize("nl,k,phi0,span", [
    (power(3.0, 2.0), 3.0, 1.0, (-0.5, 0.5)),
    (power(2.0, 1.0), 3.0, 1.0, (-1.0, 1.0)),
    (power(1.0, 0.5), 2.0, 2.0, (-1.0, 1.0)),
])
def test_numeric_matches_closed_form(nl, k, phi0, span):
    sol = solve_phi(nl, k, phi0, span, 2000)
    taus = np.linspace(*span, 21)
    np.testing.assert_allclose(sol.phi(taus), sol.closed_form(taus), rtol=1e-8)
    np.testing.assert_allclose(sol.phi_prime(taus), np.power(nl.f(sol.phi(taus)), 1 / (k - 1)), rtol=1e-12)


def test_ratio_matches_finite_difference():
    sol = solve_phi(power(2.0, 1.0), 3.0, 1.0, (-1.0, 1.0), 2000)
    t, h = 0.3, 1e-4
    d2 = (sol.phi_prime(t + h) - sol.phi_prime(t - h)) / (2 * h)
    assert float(sol.ratio(t)) == pytest.approx(d2 / float(sol.phi_prime(t)), rel=1e-5)


def test_bad_arguments():
    with pytest.raises(PhiError):
        solve_phi(unit(), 1.0, 1.0)
    with pytest.raises(PhiError):
        solve_phi(power(1.0, 1.0), 2.0, 1.0, (0.5, 1.0))
    with pytest.raises(PhiError):
        solve_phi(power(1.0, 1.0), 2.0, -1.0)
    with pytest.raises(PhiError):
        nonlinearity_from_key("power:1")
    with pytest.raises(PhiError):
        power(-1.0, 2.0)


def test_nonlinearity_keys_round_trip():
    for key in ("unit", "const:2.0", "power:3.0,2.0"):
        assert nonlinearity_from_key(key).key == key


def test_truncation_flag_when_leaving_domain():
    sol = solve_phi(power(1.0, 0.5), 2.0, 0.5, (-5.0, 0.5), 1000)
    assert sol.truncated
    assert sol.value_range[0] > 0


def test_blow_up_is_flagged_not_raised():
    sol = solve_phi(power(1.0, 2.0), 1.5, 2.0, (-0.3, 0.3), 600)
    assert sol.truncated
    assert np.all(np.isfinite(sol.phi_grid)) and np.all(np.isfinite(sol.dphi_grid))
    assert sol.tau_grid[-1] < 0.3


def test_concavity_gate():
    assert check_concavity(power(1.0, 1.0), 2.0, (0.5, 4.0)).passed          # u^(p-2), k = p-1, p = 3
    assert check_concavity(power(1.0, 2.0), 3.0, (0.5, 4.0)).passed          # u^(p-2), p = 4
    assert check_concavity(power(3.0, 2.0), 3.0, (0.5, 4.0)).passed
    rep = check_concavity(power(1.0, 2.0), 2.0, (0.5, 4.0))
    assert not rep.passed and rep.witnesses


def test_transform_exp_and_round_trip():
    phi = exp_phi()
    z = transform("ToV", Field(np.ones((3, 3))), phi)
    np.testing.assert_allclose(z.values, 0.0, atol=1e-10)
    assert z.meta["transforms"][-1]["direction"] == "ToV"
    rng = np.random.default_rng(0)
    u = Field(rng.uniform(0.5, 3.0, (5, 5)))
    back = transform("ToU", transform("ToV", u, phi), phi)
    np.testing.assert_allclose(back.values, u.values, atol=1e-8)


def test_transform_out_of_range():
    phi = solve_phi(power(1.0, 1.0), 3.0, 1.0, (0.0, 1.0), 100)
    with pytest.raises(RangeError) as exc:
        transform("ToV", Field(np.array([0.5, 1.2, 100.0])), phi)
    assert exc.value.indices
    with pytest.raises(PhiError):
        transform("sideways", Field(np.ones(2)), phi)


@given(st.floats(1.2, 4.0), st.floats(0.0, 1.0), st.floats(0.5, 3.0))
def test_phi_is_increasing_and_solves_ode(k, alpha, phi0):
    # alpha = expo / (k - 1) <= 1 keeps phi global in time
    nl = power(1.0, alpha * (k - 1))
    sol = solve_phi(nl, k, phi0, (-0.3, 0.3), 600)
    assert not sol.truncated
    g = sol.tau_grid
    assert np.all(np.diff(sol.phi_grid) > 0)
    mid = 0.5 * (g[1:] + g[:-1])
    h = g[1] - g[0]
    fd = (sol.phi(mid + h / 4) - sol.phi(mid - h / 4)) / (h / 2)
    np.testing.assert_allclose(fd, sol.phi_prime(mid), rtol=1e-4)


@given(st.floats(0.6, 2.5))
def test_inverse_round_trip_property(u):
    sol = solve_phi(power(2.0, 1.0), 3.0, 1.0, (-1.0, 1.0), 800)
    lo, hi = sol.value_range
    u = min(max(u, lo), hi)
    assert float(sol.phi(sol.phi_inverse(u))) == pytest.approx(u, abs=1e-8)


@given(st.floats(0.1, 5.0), st.floats(-1.0, 3.0), st.floats(0.2, 4.0))
def test_f_prime_matches_finite_difference(coef, expo, u):
    nl = power(coef, expo)
    h = 1e-6 * u
    fd = (nl.f(u + h) - nl.f(u - h)) / (2 * h)
    assert float(nl.f_prime(u)) == pytest.approx(float(fd), rel=1e-6, abs=1e-9)
