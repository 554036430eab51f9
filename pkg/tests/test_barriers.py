import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabarrier import barriers as B
from parabarrier.coercivity import m_mu
from parabarrier.operators import inf_laplacian, pucci_minus, pucci_plus
from parabarrier.phi import power, unit
from parabarrier.problem import Annulus, Inapplicable, Box, ProblemSpec, boundary_from_dict, chi_from_dict

BOX = Box(((-1.0, 1.0), (-1.0, 1.0)))
COS = boundary_from_dict({"type": "product-of-cosines", "base": 1.0, "amplitude": 1.0,
                          "frequencies": [0.5, 0.5]})
UNIT_BOX = Box(((0.0, 1.0), (0.0, 1.0)))
BUMP_H = boundary_from_dict({"type": "gaussian-bump", "base": 1.0, "amplitude": 1.0,
                             "center": [0.5, 0.5], "width": 0.3, "time_rate": 0.5})


@pytest.fixture(scope="module")
def cos_problem():
    return ProblemSpec(inf_laplacian(2), BOX, COS, 0.5, power(3.0, 2.0), chi=chi_from_dict(0.1))


@pytest.fixture(scope="module")
def side_problem():
    return ProblemSpec(inf_laplacian(2), UNIT_BOX, BUMP_H, 1.0, power(3.0, 2.0), chi=chi_from_dict(0.1))


@pytest.fixture(scope="module")
def pucci_problem():
    return ProblemSpec(pucci_minus(1, 3, 1), UNIT_BOX, BUMP_H, 1.0, power(1.0, 1.0), chi=chi_from_dict(0.1))


def test_init_bump_parameters(cos_problem):
    bar = B.build_init_bump(cos_problem, (0.0, 0.0), 0.25)
    assert bar.L == pytest.approx(np.log(3.0), rel=1e-12)
    c = bar.constants
    assert c["b"] * c["delta"] ** c["beta"] == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert bar.outside_value == pytest.approx(1.0 - 0.5)
    assert bar.anchor_value() == pytest.approx(2.0 - 0.5, rel=1e-12)


def test_init_indent_parameters(cos_problem):
    bar = B.build_init_indent(cos_problem, (1.0, 0.0), 0.125)
    assert bar.L == pytest.approx(np.log(1.8), rel=1e-12)
    assert bar.outside_value == pytest.approx(2.25)
    bar = B.build_init_indent(cos_problem, (1.0, 0.0), 0.25)
    assert bar.L == pytest.approx(np.log(2.5 / 1.5), rel=1e-12)


def test_constant_barriers_at_extremes(cos_problem):
    bump = B.build_init_bump(cos_problem, (1.0, 1.0), 0.25)          # h = theta there
    indent = B.build_init_indent(cos_problem, (0.0, 0.0), 0.25)      # h = M there
    for bar in (bump, indent):
        assert bar.is_constant
        assert B.verify_inequality(cos_problem, bar, 100).passed
        assert B.continuity_gap(bar) == 0.0
        x = np.random.default_rng(0).uniform(-1, 1, (20, 2))
        np.testing.assert_allclose(B.extend_constant(bar)(x, 0.1), bar.outside_value)
    assert bump.outside_value == pytest.approx(1.0 - 0.5)
    assert indent.outside_value == pytest.approx(2.0 + 0.5)


def test_constant_residual_is_zero(cos_problem):
    bar = B.build_init_bump(cos_problem, (1.0, 1.0), 0.25)
    assert bar.value(np.zeros(2), 0.3) == pytest.approx(bar.outside_value)
    rep = B.verify_inequality(cos_problem, bar, 50)
    assert rep.min_residual == 0.0 and rep.max_residual == 0.0


@pytest.mark.parametrize("family", ["InitBump", "InitIndent"])
def test_init_barriers_pass_everything(cos_problem, family):
    bar = B.build(cos_problem, family, (0.3, -0.2), eps=0.2)
    assert B.verify_inequality(cos_problem, bar, 10000, rng_seed=3).passed
    comp = B.boundary_compatibility(cos_problem, bar, 4000)
    assert comp.passed, comp.as_dict()
    assert B.continuity_gap(bar, 1000) <= 1e-6
    assert max(B.parameter_identities(bar).values()) <= 1e-12
    assert B.time_monotonicity_gap(bar) <= 1e-12


def test_pucci_plus_with_linear_f_passes():
    ps = ProblemSpec(pucci_plus(1, 2, 1), UNIT_BOX, BUMP_H, 0.5, power(1.0, 1.0))
    ps.validate()
    for fam in ("InitBump", "InitIndent"):
        bar = B.build(ps, fam, (0.4, 0.6))
        assert B.verify_inequality(ps, bar, 10000).passed


def test_case_one_mu_at_threshold():
    assert abs(m_mu(inf_laplacian(2), 1.5)[1]) == pytest.approx(0.5, abs=1e-9)


def test_case_two_beta_and_mu(pucci_problem):
    bar = B.build_side_case2(pucci_problem, "Bump", (0.0, 0.5), 0.5)
    assert bar.constants["beta"] == pytest.approx(pucci_problem.coer.lambda_bar - 2 + 0.5)
    assert abs(m_mu(pucci_problem.operator, 4.5)[1]) == pytest.approx(0.5, abs=1e-9)
    rho = bar.r_range[0]
    assert bar.r_range[1] == pytest.approx(2 * rho)


@pytest.mark.parametrize("family", ["SideBumpI", "SideIndentI"])
def test_side_case_one(side_problem, family):
    bar = B.build(side_problem, family, (0.0, 0.5), 0.5, lambda_bar=1.5)
    assert not bar.is_constant
    assert B.verify_inequality(side_problem, bar, 10000, rng_seed=5).passed
    assert B.boundary_compatibility(side_problem, bar, 4000).passed
    assert B.continuity_gap(bar) <= 1e-6
    assert max(B.parameter_identities(bar).values()) <= 1e-12


@pytest.mark.parametrize("family", ["SideBumpII", "SideIndentII"])
def test_side_case_two(pucci_problem, family):
    bar = B.build(pucci_problem, family, (1.0, 0.3), 0.25)
    assert B.verify_inequality(pucci_problem, bar, 10000, rng_seed=2).passed
    assert B.boundary_compatibility(pucci_problem, bar, 4000).passed
    assert max(B.parameter_identities(bar).values()) <= 1e-12


def test_side_case_two_on_annulus():
    h = boundary_from_dict({"type": "gaussian-bump", "base": 1.0, "amplitude": 1.0,
                            "center": [0.5, 0.5], "width": 0.5, "time_rate": 0.5})
    ps = ProblemSpec(pucci_minus(1, 3, 1), Annulus((0.0, 0.0), 0.5, 1.5), h, 1.0, power(1.0, 1.0),
                     chi=chi_from_dict(0.1))
    bar = B.build(ps, "SideBumpII", (0.5, 0.0), 0.5)
    assert B.boundary_compatibility(ps, bar, 10000).passed
    assert B.verify_inequality(ps, bar, 10000).passed


def test_part_two_side_case_one():
    ps = ProblemSpec(inf_laplacian(2), UNIT_BOX, BUMP_H, 1.0, unit(), 1.0, chi_from_dict(0.1))
    for fam in ("SideBumpI", "SideIndentI"):
        bar = B.build(ps, fam, (1.0, 0.3), 0.25, lambda_bar=1.5)
        assert B.verify_inequality(ps, bar, 10000).passed


def test_case_mismatch_is_rejected(side_problem, pucci_problem):
    with pytest.raises(Inapplicable):
        B.build(side_problem, "SideBumpII", (0.0, 0.5), 0.5)
    with pytest.raises(Inapplicable):
        B.build(pucci_problem, "SideBumpI", (0.0, 0.5), 0.5, lambda_bar=1.5)


def test_unknown_family(side_problem):
    with pytest.raises(ValueError):
        B.build(side_problem, "Wedge", (0.0, 0.5))


def test_corrupted_barrier_is_caught(side_problem):
    bar = B.build(side_problem, "SideBumpI", (0.0, 0.5), 0.5, lambda_bar=1.5, b_scale=0.01)
    rep = B.verify_inequality(side_problem, bar, 10000, rng_seed=1)
    assert rep.violations > 0 and rep.worst_point is not None


def test_indent_outside_value(side_problem):
    bar = B.build(side_problem, "SideIndentI", (0.0, 0.5), 0.5, lambda_bar=1.5)
    far = np.array([0.9, 0.9])
    assert not bar.in_region(far, 0.5)
    assert bar.value(far, 0.5) == pytest.approx(side_problem.M + 2 * bar.eps)


def test_as_dict_is_plain(side_problem):
    import json
    bar = B.build(side_problem, "SideBumpI", (0.0, 0.5), 0.5, lambda_bar=1.5)
    d = json.loads(json.dumps(bar.as_dict()))
    assert d["family"] == "SideBumpI" and d["kind"] == "bump"


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.sampled_from(["InitBump", "InitIndent"]))
def test_init_barriers_property(x, y, family):
    ps = ProblemSpec(inf_laplacian(2), UNIT_BOX, BUMP_H, 1.0, power(3.0, 2.0), chi=chi_from_dict(0.1))
    bar = B.build(ps, family, (x, y))
    assert B.verify_inequality(ps, bar, 2000).passed
    comp = B.boundary_compatibility(ps, bar, 2000)
    assert comp.passed
    # the anchor sits exactly 2 eps from the data unless the barrier degenerates to a constant
    if not bar.is_constant:
        assert comp.anchor_gap == pytest.approx(2 * bar.eps, rel=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.booleans())
def test_side_barriers_property(pos, s, bump):
    ps = ProblemSpec(pucci_minus(1, 3, 1), UNIT_BOX, BUMP_H, 1.0, power(1.0, 1.0), chi=chi_from_dict(0.1))
    bar = B.build(ps, "SideBumpII" if bump else "SideIndentII", (0.0, pos), s)
    assert B.verify_inequality(ps, bar, 2000).passed
    assert B.boundary_compatibility(ps, bar, 2000).passed
    assert B.continuity_gap(bar, 500) <= 1e-6
    assert B.time_monotonicity_gap(bar, 500) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.booleans(), st.integers(0, 1000))
def test_peak_and_bracket_property(x, y, bump, seed):
    ps = ProblemSpec(inf_laplacian(2), UNIT_BOX, BUMP_H, 1.0, power(3.0, 2.0), chi=chi_from_dict(0.1))
    bar = B.build(ps, "InitBump" if bump else "InitIndent", (x, y))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (500, 2))
    ts = rng.uniform(0, 1, 500)
    vals = bar.value(pts, ts)
    peak = float(ps.h(np.array([x, y]), 0.0)) + (-2 if bump else 2) * bar.eps
    if bump:
        assert np.all(vals <= peak + 1e-12)
    else:
        assert np.all(vals >= peak - 1e-12)
    assert bar.anchor_value() == pytest.approx(peak if not bar.is_constant else bar.outside_value)
    assert np.all((vals >= ps.theta / 2 - 1e-12) & (vals <= 2 * ps.M + 1e-12))
