"""Frame charts, the bracket expansion, and the algebroid axiom suite."""

import random
from fractions import Fraction

import pytest

from gengeo.courant import (
    ChartError,
    CourantChart,
    Section,
    anchor_apply,
    anchor_vector,
    check_axioms,
    check_dorfman_properties,
    courant_bracket,
    d_operator,
    dorfman_bracket,
    double_of_lie_algebroid,
    pairing,
    random_scalar,
    random_section,
    standard_chart,
)
from gengeo.fields import ScalarField, parse_polynomial


def poly(chart, text):
    return parse_polynomial(text, chart.variables)


def section(chart, *texts):
    return Section(chart, [poly(chart, t) for t in texts])


class TestStandardChart:
    def test_shape_and_pairing(self):
        chart = standard_chart(2)
        assert chart.dim == 2 and chart.rank == 4
        # <dx_mu, del_nu> = (1/2) delta
        assert chart.pairing[0][2] == Fraction(1, 2)
        assert chart.pairing[1][3] == Fraction(1, 2)
        assert chart.pairing[0][1] == 0
        a = chart.frame(0)
        xi = chart.frame(2)
        assert str(pairing(a, xi)) == "1/2"
        assert pairing(a, chart.frame(1)).is_zero

    def test_anchor_kills_covectors(self):
        chart = standard_chart(2)
        f = poly(chart, "x1^2*x2")
        assert anchor_apply(chart.frame(2), f).is_zero
        assert str(anchor_apply(chart.frame(0), f)) == "2*x1*x2"

    def test_d_of_coordinate_is_its_differential(self):
        # On TM+T*M the pairing normalization makes D f the usual df.
        chart = standard_chart(1)
        df = d_operator(chart, poly(chart, "x1"))
        assert df == section(chart, "0", "1")

    def test_d_gradient_components(self):
        chart = standard_chart(2)
        df = d_operator(chart, poly(chart, "x1^2 + x1*x2"))
        assert df == section(chart, "0", "0", "2*x1 + x2", "x1")

    def test_vector_covector_bracket(self):
        # [del_x, x dx] = (1/2) dx: the Lie-derivative term dx minus half the
        # exact correction d(x) from the skew-symmetrization.
        chart = standard_chart(1)
        v = section(chart, "1", "0")
        xdx = section(chart, "0", "x1")
        assert courant_bracket(v, xdx) == section(chart, "0", "1/2")
        assert courant_bracket(xdx, v) == section(chart, "0", "-1/2")

    def test_dorfman_is_full_lie_derivative_on_covectors(self):
        chart = standard_chart(1)
        v = section(chart, "1", "0")
        xdx = section(chart, "0", "x1")
        assert dorfman_bracket(v, xdx) == section(chart, "0", "1")

    def test_vector_bracket_matches_commutator(self):
        chart = standard_chart(2)
        a = section(chart, "x1", "0", "0", "0")   # x1 del_1
        b = section(chart, "0", "x1", "0", "0")   # x1 del_2
        got = courant_bracket(a, b)
        assert got == section(chart, "0", "x1", "0", "0")

    def test_two_form_term_in_bracket(self):
        # Pure covector arguments commute: T*M is abelian and isotropic.
        chart = standard_chart(2)
        xi = section(chart, "0", "0", "x2", "0")
        eta = section(chart, "0", "0", "0", "x1")
        assert courant_bracket(xi, eta).is_zero


class TestDoubleOfLieAlgebroid:
    def _heisenberg_like(self):
        # Two-generator algebra over a zero-dimensional-ish base: use one
        # coordinate with zero anchor so functions are still available.
        one = ScalarField.one(("x1",))
        zero = ScalarField.zero(("x1",))
        anchor_a = [[zero, zero]]
        # [e_1, e_2] = e_1  (c^1_{12} = 1)
        structure = [[None, [one, zero]], [[-one, zero], None]]
        return double_of_lie_algebroid(anchor_a, structure)

    def test_frame_brackets(self):
        chart = self._heisenberg_like()
        e1, e2 = chart.frame(0), chart.frame(1)
        eps1, eps2 = chart.frame(2), chart.frame(3)
        assert courant_bracket(e1, e2) == e1
        # [e_i, eps^j] = -c^j_{ik} eps^k with c^1_{12} = 1:
        assert courant_bracket(e1, eps1) == -eps2
        assert courant_bracket(e2, eps1) == eps1
        assert courant_bracket(e1, eps2).is_zero
        assert courant_bracket(e2, eps2).is_zero
        assert courant_bracket(eps1, eps2).is_zero

    def test_axioms_pass(self):
        chart = self._heisenberg_like()
        rng = random.Random(7)
        sections = [random_section(chart, rng, degree=1, max_terms=2) for _ in range(12)]
        functions = [random_scalar(rng, chart.variables, 2, 2) for _ in range(6)]
        report = check_axioms(chart, sections, functions)
        assert report.passed, report.to_text()

    def test_non_jacobi_structure_fails_axiom_ii(self):
        # c^2_{12} = 1 and c^1_{23} = 1 with zero anchor breaks Jacobi:
        # the Jacobiator of (e_1, e_2, e_3) is e_1, while D = 0.
        one = ScalarField.one(("x1",))
        zero = ScalarField.zero(("x1",))
        anchor_a = [[zero, zero, zero]]
        structure = [
            [None, [zero, one, zero], None],
            [[zero, -one, zero], None, [one, zero, zero]],
            [None, [-one, zero, zero], None],
        ]
        chart = double_of_lie_algebroid(anchor_a, structure)
        e1, e2, e3 = chart.frame(0), chart.frame(1), chart.frame(2)
        jac = (
            courant_bracket(courant_bracket(e1, e2), e3)
            + courant_bracket(courant_bracket(e2, e3), e1)
            + courant_bracket(courant_bracket(e3, e1), e2)
        )
        assert jac == e1
        report = check_axioms(chart, [e1, e2, e3], [one, one * 2])
        by_name = {r.name: r for r in report.checks}
        assert not by_name["axiom_ii_jacobiator_is_exact"].passed
        assert not report.passed

    def test_antisymmetry_validation(self):
        one = ScalarField.one(("x1",))
        zero = ScalarField.zero(("x1",))
        anchor_a = [[zero, zero]]
        bad = [[None, [one, zero]], [[one, zero], None]]
        with pytest.raises(ChartError):
            double_of_lie_algebroid(anchor_a, bad)


class TestAxiomSuite:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_standard_chart_axioms(self, dim):
        chart = standard_chart(dim)
        rng = random.Random(100 + dim)
        sections = [random_section(chart, rng, degree=2, max_terms=2) for _ in range(12)]
        functions = [random_scalar(rng, chart.variables, 2, 2) for _ in range(6)]
        report = check_axioms(chart, sections, functions)
        assert report.passed, report.to_text()

    def test_dorfman_properties(self):
        chart = standard_chart(2)
        rng = random.Random(11)
        sections = [random_section(chart, rng, degree=2, max_terms=2) for _ in range(9)]
        functions = [random_scalar(rng, chart.variables, 2, 2) for _ in range(4)]
        report = check_dorfman_properties(chart, sections, functions)
        assert report.passed, report.to_text()

    def test_dorfman_kills_d_image(self):
        chart = standard_chart(2)
        f = poly(chart, "x1^2*x2 - 3*x2")
        a = section(chart, "x2", "x1", "x1*x2", "1")
        assert dorfman_bracket(d_operator(chart, f), a).is_zero

    def test_pairing_of_d_images_vanishes(self):
        chart = standard_chart(3)
        f = poly(chart, "x1*x2*x3")
        g = poly(chart, "x1^2 - x3")
        assert pairing(d_operator(chart, f), d_operator(chart, g)).is_zero


class TestSectionAlgebra:
    def test_module_scaling_and_linearity(self):
        chart = standard_chart(2)
        a = section(chart, "x1", "0", "1", "0")
        f = poly(chart, "x2")
        assert a.scaled(f) == section(chart, "x1*x2", "0", "x2", "0")
        assert (a + a) == a.scaled(2)
        assert (a - a).is_zero

    def test_anchor_vector_components(self):
        chart = standard_chart(2)
        a = section(chart, "x2", "3", "x1", "0")
        v = anchor_vector(a)
        assert str(v[0]) == "x2"
        assert str(v[1]) == "3"

    def test_evaluate(self):
        chart = standard_chart(2)
        a = section(chart, "x1 + i*x2", "0", "2", "0")
        vals = a.evaluate([1, 2])
        assert vals[0] == 1 + 2j
        assert vals[2] == 2

    def test_chart_mismatch_rejected(self):
        c1, c2 = standard_chart(1), standard_chart(1)
        with pytest.raises(ChartError):
            courant_bracket(c1.frame(0), c2.frame(0))

    def test_degenerate_pairing_rejected(self):
        with pytest.raises(ChartError):
            CourantChart(1, [[0, 0], [0, 1]], [[0, 0]] * 1)
