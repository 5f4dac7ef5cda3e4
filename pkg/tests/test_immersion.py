import numpy as np
import pytest

from pmcv.catalog import from_id
from pmcv.immersion import ImmersionSpec, OutOfDomainError
from pmcv.sampling import STENCIL_REACH, grid_points, halton_points
from pmcv.validation import check_chart_points, check_immersion, check_step

CURVE = "chart m=1 outputs N=4 domain [0, L]\nr*cos(u1)\nr*sin(u1)\n0\nu1\n"


class TestSpec:
    def test_domain_from_params(self):
        s = ImmersionSpec.from_dsl(CURVE, 1.0, {"r": 1.0, "L": 3.0})
        assert s.domain == ((0.0, 3.0),)
        assert s.m == 1 and s.n == 2

    def test_curvature_is_a_parameter(self):
        s = ImmersionSpec.from_dsl("chart m=1 outputs N=4 domain [0,1]\ncos(u1)/sqrt(c)\nsin(u1)/sqrt(c)\n0\nu1\n", 4.0)
        np.testing.assert_allclose(s.points(np.array([[0.0]])), [[0.5, 0.0, 0.0, 0.0]])

    def test_explicit_domain_checked(self):
        s = ImmersionSpec.from_dsl(CURVE, 1.0, {"r": 1.0, "L": 1.0})
        with pytest.raises(ValueError):
            ImmersionSpec(s.ast, 1.0, s.params, ((1.0, 0.0),))
        with pytest.raises(ValueError):
            ImmersionSpec(s.ast, 1.0, s.params, ((0.0, 1.0), (0.0, 1.0)))

    def test_ambient_validated(self):
        with pytest.raises(ValueError):
            ImmersionSpec.from_dsl(CURVE, -1.0, {"r": 1.0, "L": 1.0})

    def test_out_of_domain(self):
        s = ImmersionSpec.from_dsl(CURVE, 1.0, {"r": 1.0, "L": 1.0})
        with pytest.raises(OutOfDomainError, match="outside"):
            s.jet(np.array([[1.5]]))
        s.jet(np.array([[1.0 + 1e-14]]))  # boundary slack

    def test_jet_shapes(self, cylinder):
        j = cylinder.jet(np.full((3, 4, 2), 0.5))
        assert j.value.shape == (3, 4, 5)
        assert j.grad.shape == (3, 4, 5, 2)
        assert j.hess.shape == (3, 4, 5, 2, 2)

    def test_with_params(self, cylinder):
        moved = cylinder.with_params(t0=2.0)
        u = np.array([[0.3, 0.1]])
        assert moved.points(u)[0, -1] == pytest.approx(cylinder.points(u)[0, -1] + 2.0)
        assert cylinder.params["t0"] == 0.0


class TestSampling:
    def test_grid_margin(self, cylinder):
        u = grid_points(cylinder, (4, 5), h=1e-2)
        assert u.shape == (20, 2)
        assert np.all(u >= cylinder.lower + STENCIL_REACH * 1e-2)
        assert np.all(u <= cylinder.upper - STENCIL_REACH * 1e-2)

    def test_grid_errors(self, cylinder):
        with pytest.raises(ValueError):
            grid_points(cylinder, (2, 5))
        with pytest.raises(ValueError):
            grid_points(cylinder, (4,))
        with pytest.raises(ValueError):
            grid_points(cylinder, (4, 4), h=1.0)

    def test_halton_deterministic_and_inside(self, cylinder):
        a, b = halton_points(cylinder, 16), halton_points(cylinder, 16)
        np.testing.assert_array_equal(a, b)
        span = cylinder.upper - cylinder.lower
        assert np.all(a > cylinder.lower + 0.049 * span)
        assert np.all(a < cylinder.upper - 0.049 * span)
        assert len(np.unique(a, axis=0)) == 16


class TestValidation:
    def test_check_immersion(self, cylinder):
        assert check_immersion(cylinder) is cylinder
        assert check_immersion(from_id("slice:c=1")).name == "great_sphere"
        assert check_immersion("slice:c=1").m == 2
        with pytest.raises(TypeError):
            check_immersion(3)

    def test_check_points(self, cylinder):
        assert check_chart_points([0.5, 0.0], cylinder).shape == (1, 2)
        for bad in ([[0.5]], np.zeros((0, 2)), [[np.nan, 0.0]], np.zeros((1, 1, 2))):
            with pytest.raises(ValueError):
                check_chart_points(bad, cylinder)
        with pytest.raises(OutOfDomainError):
            check_chart_points([[0.5, 5.0]], cylinder)

    def test_check_step(self):
        assert check_step("1e-3") == 1e-3
        for bad in (0, -1, np.inf, np.nan):
            with pytest.raises(ValueError):
                check_step(bad)
