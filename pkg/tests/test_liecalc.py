"""Derivative calculus: endomorphism/two-form derivatives and identity suites."""

import math
import random

import numpy as np
import pytest

from gengeo.courant import (
    Section,
    TwoForm,
    courant_bracket,
    double_of_lie_algebroid,
    random_scalar,
    random_section,
    standard_chart,
)
from gengeo.fields import ScalarField, parse_polynomial
from gengeo.liecalc import (
    EndomorphismField,
    LieCalcError,
    check_lie_properties,
    infinitesimal_automorphism_check,
    lie_endomorphism,
    lie_scalar,
    lie_section,
    lie_two_form,
)


def poly(chart, text):
    return parse_polynomial(text, chart.variables)


def section(chart, *texts):
    return Section(chart, [poly(chart, t) for t in texts])


def symplectic_plane_J(chart):
    """Block endomorphism on R^2 induced by the area form dx1 ^ dx2."""
    rows = [
        "0, 0, 0, -1",
        "0, 0, 1, 0",
        "0, -1, 0, 0",
        "1, 0, 0, 0",
    ]
    return EndomorphismField(
        chart, [[poly(chart, v) for v in row.split(",")] for row in rows]
    )


class TestEndomorphismField:
    def test_apply_and_compose(self):
        chart = standard_chart(2)
        J = symplectic_plane_J(chart)
        # column 0 sends del_1 to dx2
        assert J.apply(chart.frame(0)) == chart.frame(3)
        sq = J.compose(J)
        assert (sq + EndomorphismField.identity(chart)).is_zero

    def test_scaled_and_transpose(self):
        chart = standard_chart(1)
        f = poly(chart, "x1")
        J = EndomorphismField.identity(chart).scaled(f)
        assert J.apply(chart.frame(1)) == chart.frame(1).scaled(f)
        assert J.transpose() == J

    def test_evaluate(self):
        chart = standard_chart(1)
        J = EndomorphismField(chart, [[poly(chart, "x1"), 0], [0, poly(chart, "i")]])
        m = J.evaluate([2])
        assert m[0, 0] == 2 and m[1, 1] == 1j


class TestLieDerivatives:
    def test_scalar_derivative_is_anchor_action(self):
        chart = standard_chart(2)
        z = section(chart, "x1", "0", "0", "0")
        assert str(lie_scalar(z, poly(chart, "x1*x2"))) == "x1*x2"

    def test_section_derivative_of_covector(self):
        chart = standard_chart(1)
        v = section(chart, "1", "0")
        assert lie_section(v, section(chart, "0", "x1")) == section(chart, "0", "1")

    def test_endomorphism_derivative_frozen_value(self):
        # z = x1 del_1 generates (x, y) -> (e^t x, y); conjugating the area
        # endomorphism by the induced frame transport and differentiating at
        # t = 0 gives the off-diagonal matrix below (computed by hand from
        # diag(a, 1, 1/a, 1) with a = e^t).
        chart = standard_chart(2)
        z = section(chart, "x1", "0", "0", "0")
        J = symplectic_plane_J(chart)
        got = lie_endomorphism(z, J)
        expected = EndomorphismField(
            chart,
            [
                [poly(chart, t) for t in row]
                for row in [
                    ["0", "0", "0", "1"],
                    ["0", "0", "-1", "0"],
                    ["0", "-1", "0", "0"],
                    ["1", "0", "0", "0"],
                ]
            ],
        )
        assert got == expected

    def test_endomorphism_derivative_matches_flow_pullback(self):
        # Finite-difference oracle: transport J along the flow of z = x1 del_1
        # and differentiate numerically at t = 0.
        chart = standard_chart(2)
        z = section(chart, "x1", "0", "0", "0")
        J = symplectic_plane_J(chart)
        got = lie_endomorphism(z, J)
        point = [0.7, -0.3]

        def transported(t):
            a = math.exp(t)
            phi = np.diag([a, 1.0, 1.0 / a, 1.0]).astype(complex)
            phi_inv = np.diag([1.0 / a, 1.0, a, 1.0]).astype(complex)
            val = J.evaluate([a * point[0], point[1]])
            return phi_inv @ val @ phi

        h = 1e-5
        fd = (transported(h) - transported(-h)) / (2 * h)
        sym = got.evaluate(point)
        assert np.max(np.abs(fd - sym)) < 1e-9

    def test_two_form_derivative(self):
        # L_z (dx1 /\ dx2 pairing on tangent slots) along z = x1 del_1 scales
        # the form by the divergence contribution d(x1)/dx1 = 1.
        chart = standard_chart(2)
        z = section(chart, "x1", "0", "0", "0")
        zero = chart.zero_scalar()
        one = ScalarField.one(chart.variables)
        mat = [[zero] * 4 for _ in range(4)]
        mat[0][1] = one
        mat[1][0] = -one
        omega = TwoForm(chart, mat)
        got = lie_two_form(z, omega)
        assert (got - omega).term_count() == 0

    def test_two_form_derivative_nonconstant(self):
        chart = standard_chart(1)
        z = section(chart, "1", "0")
        zero = chart.zero_scalar()
        mat = [[zero] * 2 for _ in range(2)]
        mat[0][1] = poly(chart, "x1")
        mat[1][0] = poly(chart, "-x1")
        omega = TwoForm(chart, mat)
        got = lie_two_form(z, omega)
        assert str(got.matrix[0][1]) == "1"

    def test_tensoriality_guard_trips_on_wrong_bracket(self):
        # The skew bracket is not left-Leibniz: using it leaves an exact
        # correction term and the linearity trial must detect that.
        chart = standard_chart(2)
        z = section(chart, "0", "0", "1", "0")  # the covector dx1
        J = symplectic_plane_J(chart)
        with pytest.raises(LieCalcError):
            lie_endomorphism(z, J, bracket=courant_bracket)


class TestIdentitySuites:
    def test_property_suite_passes(self):
        chart = standard_chart(2)
        rng = random.Random(23)
        sections = [random_section(chart, rng, degree=2, max_terms=2) for _ in range(9)]
        functions = [random_scalar(rng, chart.variables, 2, 2) for _ in range(5)]
        report = check_lie_properties(chart, sections, functions)
        assert report.passed, report.to_text()
        assert len(report.checks) == 8

    def test_automorphism_check_passes_on_consistent_chart(self):
        chart = standard_chart(2)
        rng = random.Random(29)
        z = random_section(chart, rng, degree=2, max_terms=2)
        sections = [random_section(chart, rng, degree=2, max_terms=2) for _ in range(6)]
        functions = [random_scalar(rng, chart.variables, 2, 2) for _ in range(3)]
        report = infinitesimal_automorphism_check(z, sections, functions)
        assert report.passed, report.to_text()

    def test_automorphism_check_fails_on_non_jacobi_chart(self):
        one = ScalarField.one(("x1",))
        zero = ScalarField.zero(("x1",))
        anchor_a = [[zero, zero, zero]]
        structure = [
            [None, [zero, one, zero], None],
            [[zero, -one, zero], None, [one, zero, zero]],
            [None, [-one, zero, zero], None],
        ]
        chart = double_of_lie_algebroid(anchor_a, structure)
        z = chart.frame(0)
        sections = [chart.frame(1), chart.frame(2)]
        report = infinitesimal_automorphism_check(z, sections, [one])
        by_name = {r.name: r for r in report.checks}
        assert not by_name["flow_preserves_bracket"].passed
