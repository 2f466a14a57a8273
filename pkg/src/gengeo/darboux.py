"""Local normal form via coordinate scaling and a radial homotopy.

The structure is joined to its frozen value at the origin by scaling the
coordinates: J_t(x) = J(t x).  For a structure of symplectic type the
derivative of the scaled form family has an explicit polynomial primitive
(the cone operator of the radial contraction), which vanishes to second
order at the origin.  The resulting flow fixes the origin and identifies
the structure near the origin with its constant-coefficient normal form.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np

from .courant import CourantChart, scalar_term_count
from .fields import RationalScalar, Scalar, ScalarField, partial_or_zero
from .gcs import d_l_one_form, eigenprojector, evaluate_matrix, omega_form
from .moser import (
    GcsFamily,
    SectionFamily,
    TIME_VARIABLE,
    default_grid,
    dense_symplectic_family,
    embed_scalar,
    extended_variables,
    integrate_flow,
    moser_pipeline,
    symplectic_z_family,
)
from .report import Report, exact_record, numeric_record

TENTH_TIMES = [Fraction(k, 10) for k in range(11)]


class DarbouxError(ValueError):
    """Input unusable for the scaling normal-form construction."""


def _lift_chart_matrix(chart: CourantChart, mat):
    zero = chart.zero_scalar()
    return [
        [c if isinstance(c, (ScalarField, RationalScalar)) else zero + c for c in row]
        for row in mat
    ]


def scaled_matrix(chart: CourantChart, mat, time_variable: str = TIME_VARIABLE):
    """Entrywise coordinate scaling x -> t x (introduces the time variable)."""
    ext = extended_variables(chart, time_variable)
    out = []
    for row in _lift_chart_matrix(chart, mat):
        out_row = []
        for c in row:
            scaled = c.substitute_scale(time_variable)
            out_row.append(embed_scalar(scaled, ext))
        out.append(out_row)
    return out


def scaling_family(
    chart: CourantChart,
    structure_matrix,
    times=None,
    time_variable: str = TIME_VARIABLE,
) -> GcsFamily:
    """Family J_t(x) = J(t x) joining the frozen origin value to J."""
    times = TENTH_TIMES if times is None else times
    return GcsFamily.from_dense(
        chart,
        scaled_matrix(chart, structure_matrix, time_variable),
        times,
        time_variable,
    )


def verify_scaling_lemma(chart: CourantChart, mat, time_variable: str = TIME_VARIABLE):
    """t d/dt of the scaled entries equals the scaled radial derivative.

    Entrywise identity t (d/dt) a(t x) = (E a)(t x) with E the Euler
    operator sum x_mu d_mu; exact for every smooth entry, so a failure
    flags broken machinery rather than bad input.
    """
    ext = extended_variables(chart, time_variable)
    t = ScalarField.coordinate(time_variable, ext)
    worst = 0
    for row in _lift_chart_matrix(chart, mat):
        for c in row:
            scaled = embed_scalar(c.substitute_scale(time_variable), ext)
            lhs = t * partial_or_zero(scaled, time_variable)
            euler = None
            for name in chart.variables:
                x_mu = ScalarField.coordinate(name, chart.variables)
                term = x_mu * partial_or_zero(c, name)
                euler = term if euler is None else euler + term
            rhs = embed_scalar(euler.substitute_scale(time_variable), ext)
            worst = max(worst, scalar_term_count(lhs - rhs))
    return exact_record(
        "scaling_rate_identity", worst, detail="t d/dt a(tx) = (Euler a)(tx)"
    )


def homotopy_primitive(chart: CourantChart, rate_matrix, time_variable: str = TIME_VARIABLE):
    """Covector primitive of a closed two-form via the radial cone operator.

    For polynomial entries the operator acts termwise: the monomial
    c x^alpha in slot (mu, nu) contributes c x_mu x^alpha / (|alpha| + 2)
    to component nu.  The differential of the result is the given form
    (checked by the caller); the components vanish to second order at the
    origin by construction.
    """
    ext = extended_variables(chart, time_variable)
    d = chart.dim
    x_positions = [ext.index(v) for v in chart.variables]
    terms_out = [dict() for _ in range(d)]
    for mu in range(d):
        for nu in range(d):
            entry = rate_matrix[mu][nu]
            if isinstance(entry, RationalScalar):
                if not entry.is_polynomial():
                    raise DarbouxError(
                        "radial primitive needs polynomial rate entries; "
                        f"slot ({mu}, {nu}) is a proper quotient"
                    )
                entry = entry.as_polynomial()
            entry = embed_scalar(entry, ext)
            for exps, coef in entry.terms.items():
                degree = sum(exps[p] for p in x_positions)
                new = list(exps)
                new[x_positions[mu]] += 1
                key = tuple(new)
                add = coef * Fraction(1, degree + 2)
                bucket = terms_out[nu]
                bucket[key] = bucket[key] + add if key in bucket else add
    return [ScalarField(ext, terms) for terms in terms_out]


def two_form_differential_record(chart, covector, rate_matrix, name="primitive_differential"):
    """Exact records that d of the covector equals the two-form, pairwise."""
    d = chart.dim
    worst = 0
    for mu in range(d):
        for nu in range(mu + 1, d):
            curl = partial_or_zero(covector[nu], chart.variables[mu]) - partial_or_zero(
                covector[mu], chart.variables[nu]
            )
            worst = max(worst, scalar_term_count(curl - rate_matrix[mu][nu]))
    return exact_record(name, worst, detail="d xi = rate on all coordinate pairs")


def cochain_from_generator(chart: CourantChart, z_family: SectionFamily) -> SectionFamily:
    """Primitive cochain beta = <conj z, .> in frame coefficients.

    With the derivative form read as <., Jdot .>, the coboundary of this
    cochain on eigenbundle sections reproduces the form: d_L beta (v, w)
    = -<(conj z) o v, w> = <v, Jdot w> whenever the generator compensates
    the derivative.
    """
    if z_family.kind != "dense":
        raise DarbouxError("cochain extraction needs a dense section family")
    zbar = [c.conjugate() for c in z_family._coeffs]
    n = chart.rank
    coeffs = []
    for i in range(n):
        total = None
        for j in range(n):
            gij = chart.pairing[i][j]
            if not gij or zbar[j].is_zero:
                continue
            term = zbar[j] * gij
            total = term if total is None else total + term
        coeffs.append(total if total is not None else zbar[0] * 0)
    return SectionFamily.from_dense(
        chart, coeffs, z_family.times, z_family.time_variable
    )


def generator_from_cochain(
    chart: CourantChart, family: GcsFamily, beta_family: SectionFamily
) -> SectionFamily:
    """Eigenbundle sections from a primitive cochain.

    Inverts beta = <conj z, .>: raise the coefficients with the inverse
    pairing and project onto the moving -i eigenbundle, then conjugate.
    Dense families only.
    """
    if family.kind != "dense" or beta_family.kind != "dense":
        raise DarbouxError("generator extraction needs dense families")
    n = chart.rank
    beta = beta_family._coeffs
    u = []
    for i in range(n):
        total = None
        for j in range(n):
            inv = chart.pairing_inv[i][j]
            if not inv or beta[j].is_zero:
                continue
            term = beta[j] * inv
            total = term if total is None else total + term
        u.append(total if total is not None else beta[0] * 0)
    J = family._matrix
    from .fields import I_UNIT

    half = Fraction(1, 2)
    zbar = []
    for i in range(n):
        ju = None
        for j in range(n):
            if J[i][j].is_zero or u[j].is_zero:
                continue
            term = J[i][j] * u[j]
            ju = term if ju is None else ju + term
        if ju is None:
            ju = u[i] * 0
        zbar.append((u[i] + ju * I_UNIT) * half)
    z = [c.conjugate() for c in zbar]
    return SectionFamily.from_dense(chart, z, family.times, family.time_variable)


def primitive_jet_records(chart: CourantChart, beta_family: SectionFamily):
    """The cochain vanishes to second order at the origin, uniformly in time."""
    if beta_family.kind != "dense":
        raise DarbouxError("jet records need a dense cochain family")
    coeffs = beta_family._coeffs

    def at_origin(s: Scalar) -> Scalar:
        for name in chart.variables:
            if name in s.variables:
                s = s.substitute_value(name, 0)
        return s

    worst_value = max(scalar_term_count(at_origin(c)) for c in coeffs)
    worst_jet = 0
    for c in coeffs:
        for name in chart.variables:
            worst_jet = max(
                worst_jet, scalar_term_count(at_origin(partial_or_zero(c, name)))
            )
    return [
        exact_record(
            "primitive_vanishes_at_origin", worst_value, detail="all components, all t"
        ),
        exact_record(
            "primitive_first_jet_vanishes", worst_jet, detail="all components, all t"
        ),
    ]


def dw_criterion_check(
    family: GcsFamily, beta_family: SectionFamily, times=None
) -> Report:
    """Per-sample check that the cochain is a primitive of the rate form.

    On spanning pairs of the moving eigenbundle the subbundle coboundary of
    the cochain must equal the pairing against the structure derivative.
    """
    chart = family.chart
    n = chart.rank
    report = Report(task="dw-criterion")
    times = [Fraction(t) for t in (times if times is not None else family.times)]
    for t in times:
        J = family.structure_at(t)
        dot, exact = family.derivative_at(t)
        if not exact:
            raise DarbouxError("criterion check needs exact derivatives")
        alpha = omega_form(dot)
        beta = beta_family.at(t).coeffs
        P = eigenprojector(J)
        spanning = [P.column(i) for i in range(n)]
        worst = 0
        for i in range(n):
            for j in range(i + 1, n):
                residual = d_l_one_form(
                    chart, beta, spanning[i], spanning[j]
                ) - alpha.apply(spanning[i], spanning[j])
                worst = max(worst, scalar_term_count(residual))
        report.add(
            exact_record(
                f"primitive_solves_rate[t={t}]",
                worst,
                detail=f"all {n * (n - 1) // 2} spanning pairs",
            )
        )
    return report


def dw_pipeline(
    chart: CourantChart,
    omega_mat,
    times=None,
    steps: int = 100,
    identification_tol: float = 1e-4,
    pullback_tol: float = 1e-4,
    grid: Optional[np.ndarray] = None,
    escape_radius: float = 10.0,
) -> Report:
    """Normal form for a structure of symplectic type near the origin.

    Scales the form into a family joining the frozen origin value to the
    given structure, builds the radial primitive of the rate, derives the
    eigenbundle sections and the primitive cochain, verifies the criterion
    (primitive solves the rate; vanishes to second order), runs the full
    deformation pipeline, and cross-checks the classical pullback of the
    form under the integrated point map.
    """
    times = TENTH_TIMES if times is None else [Fraction(t) for t in times]
    omega = _lift_chart_matrix(chart, omega_mat)
    d = chart.dim
    for i in range(d):
        for j in range(d):
            if scalar_term_count(omega[i][j] + omega[j][i]):
                raise DarbouxError("form matrix must be antisymmetric")

    report = Report(task="darboux")
    report.add(verify_scaling_lemma(chart, omega))
    omega_scaled = scaled_matrix(chart, omega)
    family = dense_symplectic_family(chart, omega_scaled, times)
    rate = [[partial_or_zero(c, TIME_VARIABLE) for c in row] for row in omega_scaled]

    xi_hom = homotopy_primitive(chart, rate)
    report.add(two_form_differential_record(chart, xi_hom, rate))
    xi_moser = [-c for c in xi_hom]
    z_family = symplectic_z_family(chart, omega_scaled, xi_moser, times)

    beta = cochain_from_generator(chart, z_family)
    report.extend(primitive_jet_records(chart, beta))
    report.extend(dw_criterion_check(family, beta).checks)
    if not report.passed:
        report.meta["flow"] = "skipped: criterion stage failed"
        return report

    if grid is None:
        grid = default_grid(chart)
    inner = moser_pipeline(
        family,
        z_family,
        steps=steps,
        identification_tol=identification_tol,
        grid=grid,
        escape_radius=escape_radius,
    )
    report.extend(inner.checks)
    report.meta.update(inner.meta)
    if not inner.passed:
        return report

    # origin is a fixed point of the flow
    origin = np.zeros((1, d))
    flow0 = integrate_flow(
        chart, z_family.real_generator_dense(), times[0], times[-1],
        origin, steps=steps, escape_radius=escape_radius,
    )
    report.add(
        numeric_record(
            "flow_fixes_origin", float(np.max(np.abs(flow0.mapped))), 1e-10
        )
    )

    # classical pullback: Dphi^T omega(phi(p)) Dphi = omega(0)
    flow = integrate_flow(
        chart, z_family.real_generator_dense(), times[0], times[-1],
        grid, steps=steps, escape_radius=escape_radius,
    )
    fns = [[c.compile_numeric() for c in row] for row in omega]
    mapped_cols = [flow.mapped[:, k] for k in range(d)]
    npts = grid.shape[0]
    omega_end = np.empty((npts, d, d))
    for i in range(d):
        for j in range(d):
            vals = np.asarray(fns[i][j](mapped_cols))
            omega_end[:, i, j] = np.broadcast_to(vals, (npts,)).real
    origin_point = [Fraction(0)] * d
    omega0 = np.array(
        [[complex(v).real for v in row] for row in evaluate_matrix(omega, origin_point)]
    )
    f_mat = flow.tangent_transport
    pulled = np.einsum("pki,pkl,plj->pij", f_mat, omega_end, f_mat)
    residual = float(np.max(np.abs(pulled - omega0)))
    report.add(
        numeric_record(
            "form_pullback_is_normal_form",
            residual,
            pullback_tol,
            detail=f"{npts} grid points",
        )
    )
    return report
