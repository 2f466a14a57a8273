"""Generalized complex structures: constructors, integrability, deformations."""

import random

import numpy as np
import pytest

from gengeo.courant import Section, pairing, random_section, standard_chart
from gengeo.fields import I_UNIT, RationalScalar, ScalarField, parse_polynomial
from gengeo.gcs import (
    GcsError,
    block_endomorphism,
    check_gcs,
    closedness_record,
    d_l_one_form,
    default_rational_points,
    deformation_block,
    eigenprojector,
    evaluate_matrix,
    gcs_from_complex,
    gcs_from_holomorphic_poisson,
    gcs_from_symplectic,
    graph_decomposition_record,
    hamiltonian_invertibility,
    holomorphic_wedge_bivector,
    lift_matrix,
    mat_scale,
    mat_transpose,
    maurer_cartan_check,
    omega_form,
    one_form_apply,
    pairing_dual_one_form,
    scalar_matrix_inverse,
    standard_complex_structure,
)


def poly(chart, text):
    return parse_polynomial(text, chart.variables)


def area_form(chart, coefficient="1"):
    zero = chart.zero_scalar()
    f = poly(chart, coefficient)
    return [[zero, f], [-f, zero]]


class TestScalarMatrixInverse:
    def test_constant_determinant_gives_polynomials(self):
        chart = standard_chart(2)
        m = lift_matrix(chart.variables, [[1, poly(chart, "x1")], [0, 1]])
        inv = scalar_matrix_inverse(m)
        assert all(isinstance(c, ScalarField) for row in inv for c in row)
        assert str(inv[0][1]) == "-x1"

    def test_nonconstant_determinant_gives_rational_entries(self):
        chart = standard_chart(2)
        f = poly(chart, "1 + x1^2")
        m = [[f, chart.zero_scalar()], [chart.zero_scalar(), ScalarField.one(chart.variables)]]
        inv = scalar_matrix_inverse(m)
        assert isinstance(inv[0][0], RationalScalar)
        assert complex(inv[0][0].evaluate([1, 0])) == pytest.approx(0.5)
        with pytest.raises(GcsError):
            scalar_matrix_inverse(m, require_polynomial=True)

    def test_singular_matrix_rejected(self):
        chart = standard_chart(1)
        z = chart.zero_scalar()
        with pytest.raises(GcsError):
            scalar_matrix_inverse([[z]])


class TestSymplecticConstruction:
    def test_area_form_dictionary(self):
        # The area form sends del_1 to dx2 and dx1 to del_2.
        chart = standard_chart(2)
        J = gcs_from_symplectic(chart, area_form(chart))
        assert J.apply(chart.frame(0)) == chart.frame(3)
        assert J.apply(chart.frame(2)) == chart.frame(1)
        report = check_gcs(J)
        assert report.passed, report.to_text()

    def test_scaled_area_form_is_gcs(self):
        chart = standard_chart(2)
        J = gcs_from_symplectic(chart, area_form(chart, "1 + x1^2"))
        report = check_gcs(J)
        assert report.passed, report.to_text()

    def test_polynomial_requirement(self):
        chart = standard_chart(2)
        with pytest.raises(GcsError):
            gcs_from_symplectic(chart, area_form(chart, "1 + x1^2"), require_polynomial=True)

    def test_nonantisymmetric_rejected(self):
        chart = standard_chart(2)
        one = ScalarField.one(chart.variables)
        with pytest.raises(GcsError):
            gcs_from_symplectic(chart, [[one, one], [-one, one * 0]])

    def test_omega_form_tangent_block(self):
        # <., J .> restricted to tangent slots recovers minus half the form.
        chart = standard_chart(2)
        J = gcs_from_symplectic(chart, area_form(chart))
        w = omega_form(J)
        assert w.is_antisymmetric()
        assert str(w.matrix[0][1]) == "-1/2"
        assert str(w.matrix[1][0]) == "1/2"

    def test_closedness_record(self):
        chart = standard_chart(3)
        zero = chart.zero_scalar()
        f = poly(chart, "x3")
        closed = [[zero, f, zero], [-f, zero, zero], [zero, zero, zero]]
        rec = closedness_record(chart, closed)
        assert not rec.passed  # d(x3 dx1^dx2) = dx3^dx1^dx2 is nonzero
        g = poly(chart, "x1")
        also_closed = [[zero, g, zero], [-g, zero, zero], [zero, zero, zero]]
        assert closedness_record(chart, also_closed).passed


class TestComplexConstruction:
    def test_rotation_dictionary(self):
        # j del_1 = del_2 forces J dx1 = -dx2 on the covector side.
        chart = standard_chart(2)
        j = standard_complex_structure(chart)
        J = gcs_from_complex(chart, j)
        assert J.apply(chart.frame(0)) == -chart.frame(1)
        assert J.apply(chart.frame(2)) == -chart.frame(3)
        report = check_gcs(J)
        assert report.passed, report.to_text()

    def test_four_dimensional_structure(self):
        chart = standard_chart(4)
        J = gcs_from_complex(chart, standard_complex_structure(chart))
        report = check_gcs(J)
        assert report.passed, report.to_text()

    def test_non_square_minus_one_rejected(self):
        chart = standard_chart(2)
        one = ScalarField.one(chart.variables)
        zero = chart.zero_scalar()
        with pytest.raises(GcsError):
            gcs_from_complex(chart, [[one, zero], [zero, one]])

    def test_eigenprojector_isotropy(self):
        chart = standard_chart(2)
        J = gcs_from_complex(chart, standard_complex_structure(chart))
        P = eigenprojector(J)
        # P projects: P^2 = P, J P = i P
        assert (P.compose(P) - P).is_zero
        assert (J.compose(P) - P.scaled(I_UNIT)).is_zero
        # the eigenbundle is isotropic: <P x, P y> = 0
        rng = random.Random(3)
        for _ in range(4):
            x = random_section(chart, rng, degree=1, max_terms=2)
            y = random_section(chart, rng, degree=1, max_terms=2)
            assert pairing(P.apply(x), P.apply(y)).is_zero


class TestHolomorphicPoissonConstruction:
    def _chart4(self):
        return standard_chart(4)

    def test_zero_bivector_reduces_to_complex(self):
        chart = self._chart4()
        j = standard_complex_structure(chart)
        zero_biv = [[chart.zero_scalar()] * 4 for _ in range(4)]
        J = gcs_from_holomorphic_poisson(chart, j, zero_biv)
        assert J == gcs_from_complex(chart, j)

    def test_wedge_bivector_matrix(self):
        chart = self._chart4()
        one = ScalarField.one(chart.variables)
        piv = holomorphic_wedge_bivector(chart, one, pair=(1, 2))
        m = evaluate_matrix(piv, [0, 0, 0, 0])
        quarter = 0.25
        expected = np.array(
            [
                [0, 0, quarter, -1j * quarter],
                [0, 0, -1j * quarter, -quarter],
                [-quarter, 1j * quarter, 0, 0],
                [1j * quarter, quarter, 0, 0],
            ]
        )
        assert np.max(np.abs(m - expected)) == 0

    def test_constant_bivector_structure(self):
        chart = self._chart4()
        j = standard_complex_structure(chart)
        piv = holomorphic_wedge_bivector(chart, ScalarField.one(chart.variables))
        J = gcs_from_holomorphic_poisson(chart, j, piv)
        report = check_gcs(J)
        assert report.passed, report.to_text()

    def test_linear_bivector_structure_and_graph_oracle(self):
        # coefficient z1 = x1 + i x2: the graph rebuild must agree pointwise.
        chart = self._chart4()
        j = standard_complex_structure(chart)
        z1 = poly(chart, "x1 + i*x2")
        piv = holomorphic_wedge_bivector(chart, z1)
        J = gcs_from_holomorphic_poisson(chart, j, piv)
        report = check_gcs(J)
        assert report.passed, report.to_text()
        rec = graph_decomposition_record(chart, J, j, piv)
        assert rec.passed and rec.residual < 1e-10

    def test_graph_oracle_detects_wrong_block(self):
        chart = self._chart4()
        j = standard_complex_structure(chart)
        piv = holomorphic_wedge_bivector(chart, ScalarField.one(chart.variables))
        q = deformation_block(chart, lift_matrix(chart.variables, j), piv)
        wrong = block_endomorphism(
            chart,
            mat_scale(lift_matrix(chart.variables, j), -1),
            mat_scale(q, 2),  # doubled deformation block
            None,
            mat_transpose(lift_matrix(chart.variables, j)),
        )
        rec = graph_decomposition_record(chart, wrong, j, piv)
        assert not rec.passed

    def test_deformation_enters_only_top_right(self):
        chart = self._chart4()
        j = standard_complex_structure(chart)
        piv = holomorphic_wedge_bivector(chart, poly(chart, "x3 + i*x4"))
        J = gcs_from_holomorphic_poisson(chart, j, piv)
        base = gcs_from_complex(chart, j)
        diff = J - base
        for i in range(8):
            for k in range(8):
                if i < 4 and k >= 4:
                    continue
                assert diff.matrix[i][k].is_zero


class TestMaurerCartan:
    def test_holomorphic_coefficient_passes(self):
        chart = standard_chart(4)
        j = standard_complex_structure(chart)
        piv = holomorphic_wedge_bivector(chart, poly(chart, "x1 + i*x2"))
        report = maurer_cartan_check(chart, j, piv)
        assert report.passed, report.to_text()

    def test_antiholomorphic_coefficient_fails(self):
        chart = standard_chart(4)
        j = standard_complex_structure(chart)
        piv = holomorphic_wedge_bivector(chart, poly(chart, "x1 - i*x2"))
        report = maurer_cartan_check(chart, j, piv)
        by_name = {r.name: r for r in report.checks}
        assert by_name["bivector_has_pure_type"].passed
        assert not by_name["antiholomorphic_derivative_vanishes"].passed

    def test_wrong_type_fails(self):
        chart = standard_chart(4)
        j = standard_complex_structure(chart)
        zero = chart.zero_scalar()
        one = ScalarField.one(chart.variables)
        # del_1 ^ del_3 mixes types for the block-rotation structure
        piv = [[zero] * 4 for _ in range(4)]
        piv[0][2] = one
        piv[2][0] = -one
        report = maurer_cartan_check(chart, j, piv)
        by_name = {r.name: r for r in report.checks}
        assert not by_name["bivector_has_pure_type"].passed


class TestHamiltonianInvertibility:
    def test_honest_bivector_has_unit_margin(self):
        chart = standard_chart(4)
        j = standard_complex_structure(chart)
        piv = holomorphic_wedge_bivector(chart, poly(chart, "x1 + i*x2"))
        report = hamiltonian_invertibility(chart, j, pi_mat=piv)
        assert report.passed
        assert report.checks[0].residual == pytest.approx(1.0)

    def test_raw_form_critical_size_is_singular(self):
        # A single cross term of size two between the conjugate tangent
        # direction and the holomorphic covector direction makes the defect
        # operator singular; size one keeps it invertible.
        chart = standard_chart(2)
        j = standard_complex_structure(chart)
        g = np.array([[float(x) for x in row] for row in chart.pairing])
        ubar = np.array([1, 1j, 0, 0], dtype=complex)     # conj tangent direction
        zeta = np.array([0, 0, 1, 1j], dtype=complex)     # holomorphic covector
        alpha = g @ zeta.conj()
        beta = g @ ubar.conj()
        for size, expect_pass in ((2.0, False), (1.0, True)):
            h = size * np.outer(alpha, beta)
            report = hamiltonian_invertibility(
                chart, j, h_coefficient_matrix=h, floor=1e-6
            )
            assert report.passed is expect_pass, report.to_text()

    def test_requires_exactly_one_input(self):
        chart = standard_chart(2)
        j = standard_complex_structure(chart)
        with pytest.raises(GcsError):
            hamiltonian_invertibility(chart, j)


class TestCoboundary:
    def test_one_form_coboundary_is_tensorial_on_isotropic_sections(self):
        # On sections of an isotropic involutive subbundle the coboundary is
        # function-linear in its arguments and antisymmetric.
        chart = standard_chart(2)
        J = gcs_from_symplectic(chart, area_form(chart))
        P = eigenprojector(J)
        rng = random.Random(17)
        zbar = P.conjugate().apply(random_section(chart, rng, degree=1, max_terms=2))
        beta = pairing_dual_one_form(zbar)
        f = poly(chart, "x1*x2")
        for _ in range(3):
            v = P.apply(random_section(chart, rng, degree=1, max_terms=2))
            w = P.apply(random_section(chart, rng, degree=1, max_terms=2))
            lhs = d_l_one_form(chart, beta, v.scaled(f), w)
            rhs = f * d_l_one_form(chart, beta, v, w)
            assert (lhs - rhs).is_zero
            anti = d_l_one_form(chart, beta, v, w) + d_l_one_form(chart, beta, w, v)
            assert anti.is_zero

    def test_function_coboundary_squares_to_zero(self):
        # beta(v) = rho(v) f is exact; its coboundary vanishes identically
        # because the anchor preserves the bracket.
        chart = standard_chart(2)
        f = poly(chart, "x1^2*x2")
        beta = [chart.rho_frame_apply(i, f) for i in range(chart.rank)]
        rng = random.Random(5)
        v = random_section(chart, rng)
        w = random_section(chart, rng)
        assert d_l_one_form(chart, beta, v, w).is_zero

    def test_beta_components_contract_sections(self):
        chart = standard_chart(1)
        z = Section(chart, [poly(chart, "x1"), poly(chart, "1")])
        beta = pairing_dual_one_form(z)
        v = Section(chart, [poly(chart, "1"), poly(chart, "0")])
        assert str(one_form_apply(beta, v)) == "1/2"

    def test_default_points_are_deterministic(self):
        chart = standard_chart(3)
        assert default_rational_points(chart) == default_rational_points(chart)
