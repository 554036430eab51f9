import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabarrier.operators import inf_laplacian
from parabarrier.phi import power
from parabarrier.problem import (Annulus, Box, Chi, Inapplicable, ProblemError, ProblemSpec,
                                 boundary_from_dict, chi_from_dict, problem_from_dict)

COS = {"type": "product-of-cosines", "base": 1.0, "amplitude": 1.0, "frequencies": [0.5, 0.5]}


def box_problem(**kw):
    d = {"operator": "inf_laplacian", "T": 0.1,
         "domain": {"type": "box", "bounds": [[-1, 1], [-1, 1]]}, "boundary": COS}
    d.update(kw)
    return problem_from_dict(d)


def test_data_bounds_of_cosine_product():
    ps = box_problem()
    assert ps.theta == pytest.approx(1.0, abs=1e-12)
    assert ps.M == pytest.approx(2.0, abs=1e-12)
    assert ps.part == "II"


def test_box_geometry():
    b = Box(((-1.0, 1.0), (-1.0, 1.0)))
    assert b.diameter == pytest.approx(2 * np.sqrt(2))
    y = np.array([1.0, 0.3])
    assert b.on_boundary(y)
    np.testing.assert_allclose(b.outward_normal(y), [1.0, 0.0])
    z = b.exterior_center(y, 0.25)
    assert np.linalg.norm(z - y) == pytest.approx(0.25)
    assert not b.contains(z)
    assert np.all(b.on_boundary(b.boundary_points(64)))


def test_annulus_geometry():
    a = Annulus((0.0, 0.0), 0.5, 1.5)
    pts = a.boundary_points(40)
    assert np.all(a.on_boundary(pts))
    y = np.array([0.5, 0.0])
    z = a.exterior_center(y, 0.1)
    assert np.linalg.norm(z - y) == pytest.approx(0.1)
    assert not a.contains(z)
    with pytest.raises(ProblemError):
        Annulus((0.0, 0.0), 1.0, 0.5)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_projection_lands_on_box_boundary(x, y):
    b = Box(((-1.0, 1.0), (0.0, 2.0)))
    q = b.project_boundary(np.array([x, y]))
    assert b.on_boundary(q)


def test_boundary_kinds():
    x = np.array([[0.0, 0.0], [0.5, 0.5]])
    c = boundary_from_dict({"type": "constant", "value": 2.0})
    np.testing.assert_allclose(c(x, 0.3), 2.0)
    r = boundary_from_dict({"type": "ramp", "base": 1.0, "slope": [1.0, 2.0], "time_slope": 1.0})
    np.testing.assert_allclose(r(x, 0.5), [1.5, 3.0])
    g = boundary_from_dict({"type": "gaussian-bump", "base": 1.0, "amplitude": 1.0,
                            "center": [0.0, 0.0], "width": 1.0})
    assert float(g(x[:1], 0.0)[0]) == pytest.approx(2.0)
    with pytest.raises(ProblemError):
        boundary_from_dict({"type": "spiral"})


def test_chi_forms():
    assert chi_from_dict(0.2)(0.7) == pytest.approx(0.2)
    s = chi_from_dict({"type": "sinusoid", "amplitude": 2.0, "period": 1.0})
    assert s.sup_abs(1.0) == pytest.approx(2.0)
    assert s.sup_abs(0.05) == pytest.approx(2 * np.sin(0.1 * np.pi))
    with pytest.raises(ProblemError):
        chi_from_dict({"type": "sinusoid", "amplitude": 1.0, "period": 0.0})


def test_validate_part_I_and_II():
    box_problem(nonlinearity="power:3,2").validate()
    with pytest.raises(Inapplicable):
        # u^2 with k = 2 is not admissible
        box_problem(operator="p_laplacian_variant(1,1)", nonlinearity="power:1,2").validate()
    box_problem(operator="p_laplacian_variant(1,1)", nonlinearity="power:1,1").validate()
    with pytest.raises(Inapplicable):
        box_problem(Gamma=4.0).validate()                   # Gamma >= gamma
    with pytest.raises(Inapplicable):
        box_problem(boundary={"type": "constant", "value": -1.0}).validate()


def test_problem_dict_errors():
    with pytest.raises(ProblemError):
        box_problem(colour="red")
    with pytest.raises(ProblemError):
        problem_from_dict({"operator": "inf_laplacian"})
    with pytest.raises(ProblemError):
        box_problem(operator="nonsense")
    with pytest.raises(ProblemError):
        box_problem(T=-1.0)


def test_f_range_and_eps():
    ps = ProblemSpec(inf_laplacian(2), Box(((-1, 1), (-1, 1))), boundary_from_dict(COS), 0.1,
                     power(3.0, 2.0))
    om, nu = ps.f_range()
    assert om == pytest.approx(3 * 0.25) and nu == pytest.approx(3 * 16)
    assert 0 < ps.default_eps() <= ps.theta / 4
    assert ps.B0 == 0.0
    assert isinstance(ps.chi, Chi)
