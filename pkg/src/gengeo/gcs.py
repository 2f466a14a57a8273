"""Generalized complex structures on frame charts.

A structure is an endomorphism field squaring to minus the identity,
orthogonal for the pairing, with vanishing Nijenhuis obstruction.  The
module provides the three standard constructions on the tangent double
(symplectic, complex, holomorphic-Poisson deformation of complex), the
integrability checks, and the coboundary operators of the eigenbundle
complex used by the deformation machinery.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Optional

import numpy as np

from .courant import (
    CourantChart,
    Section,
    TwoForm,
    anchor_apply,
    courant_bracket,
    scalar_term_count,
)
from .fields import (
    CRational,
    I_UNIT,
    RationalScalar,
    Scalar,
    ScalarField,
    imag_part,
    partial_or_zero,
    real_part,
)
from .liecalc import EndomorphismField
from .report import CheckRecord, Report, exact_record, numeric_record


class GcsError(ValueError):
    """Input data does not define the requested structure."""


# ---------------------------------------------------------------------------
# small matrices of scalars (tangent-space blocks)
# ---------------------------------------------------------------------------


def lift_matrix(variables, mat):
    zero = ScalarField.zero(variables)
    return [
        [c if isinstance(c, (ScalarField, RationalScalar)) else zero + c for c in row]
        for row in mat
    ]


def mat_mul(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            total = None
            for l in range(k):
                if a[i][l].is_zero or b[l][j].is_zero:
                    continue
                term = a[i][l] * b[l][j]
                total = term if total is None else total + term
            row.append(total if total is not None else a[i][0] * 0)
        out.append(row)
    return out


def mat_sub(a, b):
    return [[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(a, b)]


def mat_add(a, b):
    return [[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(a, b)]


def mat_scale(a, c):
    return [[c * x for x in row] for row in a]


def mat_transpose(a):
    return [[a[j][i] for j in range(len(a))] for i in range(len(a[0]))]


def mat_term_count(a) -> int:
    return sum(scalar_term_count(x) for row in a for x in row)


def scalar_matrix_det(mat) -> Scalar:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    total = None
    for j in range(n):
        entry = mat[0][j]
        if entry.is_zero:
            continue
        minor = [row[:j] + row[j + 1 :] for row in mat[1:]]
        term = entry * scalar_matrix_det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else mat[0][0] * 0


def scalar_matrix_inverse(mat, require_polynomial: bool = False):
    """Adjugate-over-determinant inverse of a matrix of scalars.

    Entries come back polynomial when the determinant divides exactly
    (in particular whenever it is a nonzero constant); otherwise they are
    exact rational functions unless ``require_polynomial`` forbids that.
    """
    n = len(mat)
    det = scalar_matrix_det(mat)
    if det.is_zero:
        raise GcsError("matrix of scalars is not invertible")
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [
                [mat[r][c] for c in range(n) if c != j]
                for r in range(n)
                if r != i
            ]
            cof = scalar_matrix_det(minor) if n > 1 else mat[0][0] * 0 + 1
            if (i + j) % 2:
                cof = -cof
            adj[j][i] = cof
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            q = RationalScalar(adj[i][j], det)
            if q.is_polynomial():
                row.append(q.as_polynomial())
            elif require_polynomial:
                raise GcsError(
                    "matrix inverse has non-polynomial entries "
                    "(determinant is not constant)"
                )
            else:
                row.append(q)
        out.append(row)
    return out


def evaluate_matrix(mat, point) -> np.ndarray:
    return np.array(
        [[complex(c.evaluate(point)) for c in row] for row in mat], dtype=complex
    )


def block_endomorphism(chart: CourantChart, a, b, c, d) -> EndomorphismField:
    """Assemble a rank endomorphism from four tangent-size blocks."""
    m = chart.rank // 2
    zero = chart.zero_scalar()

    def norm(block):
        if block is None:
            return [[zero] * m for _ in range(m)]
        return lift_matrix(chart.variables, block)

    a, b, c, d = norm(a), norm(b), norm(c), norm(d)
    rows = []
    for i in range(m):
        rows.append(list(a[i]) + list(b[i]))
    for i in range(m):
        rows.append(list(c[i]) + list(d[i]))
    return EndomorphismField(chart, rows)


# ---------------------------------------------------------------------------
# integrability
# ---------------------------------------------------------------------------


def nijenhuis_tensor(J: EndomorphismField, x: Section, y: Section) -> Section:
    """N(x, y) = [Jx, Jy] - [x, y] - J([Jx, y] + [x, Jy]) with the skew bracket."""
    jx, jy = J.apply(x), J.apply(y)
    return (
        courant_bracket(jx, jy)
        - courant_bracket(x, y)
        - J.apply(courant_bracket(jx, y) + courant_bracket(x, jy))
    )


def check_gcs(J: EndomorphismField) -> Report:
    """Exact verification: square, orthogonality, and frame Nijenhuis tensor."""
    chart = J.chart
    n = chart.rank
    report = Report(task="check-gcs")

    sq = J.compose(J) + EndomorphismField.identity(chart)
    report.add(exact_record("squares_to_minus_identity", sq.term_count()))

    worst = 0
    g = chart.pairing
    for i in range(n):
        for j in range(i, n):
            total = None
            for k in range(n):
                if J.matrix[k][i].is_zero:
                    continue
                for l in range(n):
                    if not g[k][l] or J.matrix[l][j].is_zero:
                        continue
                    term = J.matrix[k][i] * J.matrix[l][j] * g[k][l]
                    total = term if total is None else total + term
            if total is None:
                total = chart.zero_scalar()
            worst = max(worst, scalar_term_count(total - g[i][j]))
    report.add(exact_record("preserves_pairing", worst))

    worst = 0
    frames = [chart.frame(i) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            worst = max(worst, nijenhuis_tensor(J, frames[i], frames[j]).term_count())
    f = ScalarField.coordinate(chart.variables[0], chart.variables)
    lhs = nijenhuis_tensor(J, frames[0].scaled(f), frames[1])
    rhs = nijenhuis_tensor(J, frames[0], frames[1]).scaled(f)
    worst = max(worst, (lhs - rhs).term_count())
    report.add(
        exact_record(
            "nijenhuis_tensor_vanishes",
            worst,
            detail=f"all frame pairs plus one function-linearity trial, rank {n}",
        )
    )
    return report


def omega_form(J: EndomorphismField) -> TwoForm:
    """The pairing composed with J; antisymmetric exactly when J is orthogonal."""
    chart = J.chart
    n = chart.rank
    g = chart.pairing
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            total = None
            for k in range(n):
                if not g[i][k] or J.matrix[k][j].is_zero:
                    continue
                term = J.matrix[k][j] * g[i][k]
                total = term if total is None else total + term
            row.append(total if total is not None else chart.zero_scalar())
        out.append(row)
    return TwoForm(chart, out)


def eigenprojector(J: EndomorphismField, sign: int = 1) -> EndomorphismField:
    """P = (1 - i J) / 2 projects onto the +i eigenbundle (sign=-1: conjugate)."""
    chart = J.chart
    s = I_UNIT if sign > 0 else -I_UNIT
    return (EndomorphismField.identity(chart) - J.scaled(s)).scaled(Fraction(1, 2))


# ---------------------------------------------------------------------------
# constructors on the tangent double
# ---------------------------------------------------------------------------


def _require_tangent_double(chart: CourantChart):
    if chart.rank != 2 * chart.dim:
        raise GcsError(
            "this construction lives on the tangent double "
            f"(rank {2 * chart.dim} expected, chart has rank {chart.rank})"
        )


def gcs_from_symplectic(
    chart: CourantChart, omega_mat, require_polynomial: bool = False
) -> EndomorphismField:
    """Structure with lower-left block the form and upper-right its inverse.

    ``omega_mat`` holds the pairings of the form with tangent frame pairs
    (antisymmetric, invertible).  Applied to a tangent vector the result is
    the contracted covector; applied to a covector, minus the inverted
    vector.
    """
    _require_tangent_double(chart)
    d = chart.dim
    omega_mat = lift_matrix(chart.variables, omega_mat)
    if len(omega_mat) != d or any(len(r) != d for r in omega_mat):
        raise GcsError(f"form matrix must be {d}x{d}")
    for i in range(d):
        for j in range(i, d):
            if not (omega_mat[i][j] + omega_mat[j][i]).is_zero:
                raise GcsError("form matrix is not antisymmetric")
    flat = mat_transpose(omega_mat)
    sharp = scalar_matrix_inverse(flat, require_polynomial=require_polynomial)
    return block_endomorphism(chart, None, mat_scale(sharp, -1), flat, None)


def closedness_record(chart: CourantChart, omega_mat) -> CheckRecord:
    """Exact exterior-derivative check of a tangent two-form on the chart."""
    d = chart.dim
    omega_mat = lift_matrix(chart.variables, omega_mat)
    worst = 0
    for mu in range(d):
        for nu in range(mu + 1, d):
            for lam in range(nu + 1, d):
                total = (
                    partial_or_zero(omega_mat[nu][lam], chart.variables[mu])
                    - partial_or_zero(omega_mat[mu][lam], chart.variables[nu])
                    + partial_or_zero(omega_mat[mu][nu], chart.variables[lam])
                )
                worst = max(worst, scalar_term_count(total))
    return exact_record(
        "two_form_is_closed", worst, detail=f"{d * (d - 1) * (d - 2) // 6} triples"
    )


def gcs_from_complex(chart: CourantChart, j_mat) -> EndomorphismField:
    """Diagonal structure from an almost-complex tangent endomorphism."""
    _require_tangent_double(chart)
    d = chart.dim
    j_mat = lift_matrix(chart.variables, j_mat)
    sq = mat_mul(j_mat, j_mat)
    for i in range(d):
        for k in range(d):
            expected = -1 if i == k else 0
            if not (sq[i][k] - expected).is_zero:
                raise GcsError("tangent endomorphism does not square to -1")
    return block_endomorphism(
        chart, mat_scale(j_mat, -1), None, None, mat_transpose(j_mat)
    )


def standard_complex_structure(chart: CourantChart):
    """Block rotation pairing coordinates (x_{2a-1}, x_{2a}) as real/imaginary."""
    d = chart.dim
    if d % 2:
        raise GcsError("chart dimension must be even")
    zero = chart.zero_scalar()
    one = ScalarField.one(chart.variables)
    j = [[zero] * d for _ in range(d)]
    for a in range(d // 2):
        j[2 * a + 1][2 * a] = one
        j[2 * a][2 * a + 1] = -one
    return j


def poisson_sharp(pi_mat):
    """Matrix sending a covector to its contraction into the first slot."""
    return mat_transpose(pi_mat)


def holomorphic_wedge_bivector(chart: CourantChart, coefficient, pair=(1, 2)):
    """f times the wedge of complex-coordinate derivations z_a, z_b.

    Coordinates pair up as z_a = x_{2a-1} + i x_{2a}; the derivation along
    z_a is (del_{2a-1} - i del_{2a}) / 2.
    """
    d = chart.dim
    if d % 2:
        raise GcsError("chart dimension must be even")
    a, b = pair
    if not (1 <= a <= d // 2 and 1 <= b <= d // 2 and a != b):
        raise GcsError(f"invalid complex-coordinate pair {pair}")
    zero = chart.zero_scalar()
    f = coefficient if isinstance(coefficient, (ScalarField, RationalScalar)) else zero + coefficient
    half = CRational(Fraction(1, 2))
    vec_a = [zero] * d
    vec_a[2 * (a - 1)] = zero + half
    vec_a[2 * (a - 1) + 1] = zero + (-I_UNIT * half)
    vec_b = [zero] * d
    vec_b[2 * (b - 1)] = zero + half
    vec_b[2 * (b - 1) + 1] = zero + (-I_UNIT * half)
    out = [[zero] * d for _ in range(d)]
    for mu in range(d):
        for nu in range(d):
            term = vec_a[mu] * vec_b[nu] - vec_b[mu] * vec_a[nu]
            if not term.is_zero:
                out[mu][nu] = f * term
    return out


def deformation_block(chart: CourantChart, j_mat, pi_mat):
    """Real upper-right block generated by a complex bivector of type (2, 0).

    On a real covector the block contracts the holomorphic part into the
    bivector and doubles the imaginary interference:
    Q = -2 Im(sharp) + 2 Re(sharp) j^T.
    """
    j_mat = lift_matrix(chart.variables, j_mat)
    pi_mat = lift_matrix(chart.variables, pi_mat)
    sharp = poisson_sharp(pi_mat)
    re = [[real_part(c) for c in row] for row in sharp]
    im = [[imag_part(c) for c in row] for row in sharp]
    return mat_add(mat_scale(im, -2), mat_scale(mat_mul(re, mat_transpose(j_mat)), 2))


def default_rational_points(chart: CourantChart, count: int = 5, seed: int = 97):
    """Deterministic generic rational points for pointwise verifications."""
    rng = random.Random(seed)
    points = []
    while len(points) < count:
        p = [Fraction(rng.randint(-4, 4), 5) for _ in range(chart.dim)]
        if any(p):
            points.append(p)
    return points


def graph_decomposition_record(
    chart: CourantChart,
    J: EndomorphismField,
    j_mat,
    pi_mat,
    points=None,
    tol: float = 1e-10,
) -> CheckRecord:
    """Rebuild J pointwise from the graph of the bivector over the eigenbundle.

    At each point: take a numeric basis of the undeformed +i eigenbundle,
    shift each vector by the contraction of its covector part into the
    bivector, and solve for the unique endomorphism with that graph as +i
    eigenspace.  The result must match the closed-form construction.
    """
    d = chart.dim
    if points is None:
        points = default_rational_points(chart)
    j_mat = lift_matrix(chart.variables, j_mat)
    pi_mat = lift_matrix(chart.variables, pi_mat)
    base = gcs_from_complex(chart, j_mat)
    worst = 0.0
    for p in points:
        proj = 0.5 * (np.eye(2 * d, dtype=complex) - 1j * base.evaluate(p))
        u_full, s, _ = np.linalg.svd(proj)
        rank = int(np.sum(s > 1e-8))
        if rank != d:
            raise GcsError(f"eigenbundle has unexpected rank {rank} at {p}")
        basis = u_full[:, :d]
        sharp_num = evaluate_matrix(poisson_sharp(pi_mat), p)
        shifted = basis.copy()
        shifted[:d, :] += sharp_num @ basis[d:, :]
        big = np.hstack([shifted, shifted.conj()])
        target = np.hstack([1j * shifted, -1j * shifted.conj()])
        rebuilt = target @ np.linalg.inv(big)
        worst = max(worst, float(np.max(np.abs(rebuilt - J.evaluate(p)))))
    return numeric_record(
        "matches_graph_decomposition",
        worst,
        tol,
        detail=f"{len(points)} rational points",
    )


def gcs_from_holomorphic_poisson(
    chart: CourantChart, j_mat, pi_mat, verify: bool = True, points=None
) -> EndomorphismField:
    """Deform the diagonal complex structure by a type-(2,0) bivector.

    The deformation enters only through the real upper-right block; the
    construction is cross-checked pointwise against the graph description
    of the deformed eigenbundle unless ``verify`` is disabled.
    """
    _require_tangent_double(chart)
    j_lift = lift_matrix(chart.variables, j_mat)
    q = deformation_block(chart, j_lift, pi_mat)
    J = block_endomorphism(
        chart, mat_scale(j_lift, -1), q, None, mat_transpose(j_lift)
    )
    if verify:
        record = graph_decomposition_record(chart, J, j_lift, pi_mat, points=points)
        if not record.passed:
            raise GcsError(
                "closed-form deformation disagrees with the graph of the "
                f"bivector (residual {record.residual:.3e})"
            )
    return J


# ---------------------------------------------------------------------------
# deformation conditions for the bivector
# ---------------------------------------------------------------------------


def schouten_vector_bivector(chart: CourantChart, vec, biv):
    """[V, pi] componentwise on tangent data."""
    d = chart.dim
    out = [[chart.zero_scalar()] * d for _ in range(d)]
    for mu in range(d):
        for nu in range(d):
            total = chart.zero_scalar()
            for lam in range(d):
                name = chart.variables[lam]
                if not vec[lam].is_zero:
                    total = total + vec[lam] * partial_or_zero(biv[mu][nu], name)
                if not biv[lam][nu].is_zero:
                    total = total - biv[lam][nu] * partial_or_zero(vec[mu], name)
                if not biv[mu][lam].is_zero:
                    total = total - biv[mu][lam] * partial_or_zero(vec[nu], name)
            out[mu][nu] = total
    return out


def schouten_self_bracket(chart: CourantChart, biv):
    """[pi, pi] as a cyclic contraction of the bivector with its gradient."""
    d = chart.dim
    out = {}
    for mu in range(d):
        for nu in range(d):
            for lam in range(d):
                total = chart.zero_scalar()
                for rho in range(d):
                    name = chart.variables[rho]
                    for (a, b, c) in ((mu, nu, lam), (nu, lam, mu), (lam, mu, nu)):
                        if not biv[rho][a].is_zero:
                            total = total + biv[rho][a] * partial_or_zero(
                                biv[b][c], name
                            )
                out[(mu, nu, lam)] = total
    return out


def maurer_cartan_check(chart: CourantChart, j_mat, pi_mat) -> Report:
    """Exact deformation conditions for a bivector against a complex structure.

    Three checks: the bivector is of pure type (2, 0); its derivative along
    every antiholomorphic frame direction has no (2, 0) component; and its
    self-bracket vanishes.  All residuals are exact term counts.
    """
    _require_tangent_double(chart)
    d = chart.dim
    j_mat = lift_matrix(chart.variables, j_mat)
    pi_mat = lift_matrix(chart.variables, pi_mat)
    report = Report(task="maurer-cartan")

    half = Fraction(1, 2)
    eye = [
        [ScalarField.constant(int(i == k), chart.variables) for k in range(d)]
        for i in range(d)
    ]
    p10 = mat_scale(mat_sub(eye, mat_scale(j_mat, I_UNIT)), half)
    p01 = mat_scale(mat_add(eye, mat_scale(j_mat, I_UNIT)), half)

    projected = mat_mul(mat_mul(p10, pi_mat), mat_transpose(p10))
    report.add(
        exact_record(
            "bivector_has_pure_type",
            mat_term_count(mat_sub(projected, pi_mat)),
            detail="projection onto holomorphic slots reproduces the bivector",
        )
    )

    worst = 0
    for k in range(d):
        vbar = [p01[mu][k] for mu in range(d)]
        bracket = schouten_vector_bivector(chart, vbar, pi_mat)
        pr = mat_mul(mat_mul(p10, bracket), mat_transpose(p10))
        worst = max(worst, mat_term_count(pr))
    report.add(
        exact_record(
            "antiholomorphic_derivative_vanishes",
            worst,
            detail=f"{d} antiholomorphic frame directions",
        )
    )

    self_bracket = schouten_self_bracket(chart, pi_mat)
    worst = max(scalar_term_count(v) for v in self_bracket.values())
    report.add(
        exact_record(
            "self_bracket_vanishes", worst, detail="all trivector components"
        )
    )
    return report


def hamiltonian_invertibility(
    chart: CourantChart,
    j_mat,
    pi_mat=None,
    h_coefficient_matrix: Optional[np.ndarray] = None,
    points=None,
    floor: float = 1e-8,
) -> Report:
    """Pointwise invertibility margin of the deformation's defect operator.

    Represents the bilinear deformation form on a numeric basis of the +i
    eigenbundle, solves the pairing Gram system for the induced map into the
    conjugate bundle, and measures the smallest singular value of
    (conjugate-map o map - 1).  The check passes when the margin stays
    above ``floor`` at every sample point.
    """
    _require_tangent_double(chart)
    d = chart.dim
    if (pi_mat is None) == (h_coefficient_matrix is None):
        raise GcsError("provide exactly one of pi_mat or h_coefficient_matrix")
    if points is None:
        points = default_rational_points(chart)
    j_mat = lift_matrix(chart.variables, j_mat)
    base = gcs_from_complex(chart, j_mat)
    g_num = np.array([[float(x) for x in row] for row in chart.pairing])
    sharp = poisson_sharp(lift_matrix(chart.variables, pi_mat)) if pi_mat is not None else None

    margin = None
    for p in points:
        proj = 0.5 * (np.eye(2 * d, dtype=complex) - 1j * base.evaluate(p))
        u_full, s, _ = np.linalg.svd(proj)
        if int(np.sum(s > 1e-8)) != d:
            raise GcsError(f"eigenbundle has unexpected rank at {p}")
        basis = u_full[:, :d]
        gram = 2.0 * basis.conj().T @ g_num @ basis
        if pi_mat is not None:
            sharp_num = evaluate_matrix(sharp, p)
            h_vals = basis[d:, :].T @ sharp_num.T @ basis[d:, :]
            # H(u_b, u_c) = pi(xi_b, xi_c) = xi_b^T pi xi_c = xi_b^T sharp^T xi_c
            h_rep = h_vals.T
        else:
            h_num = np.asarray(h_coefficient_matrix, dtype=complex)
            h_rep = np.array(
                [
                    [basis[:, b] @ h_num @ basis[:, c] for b in range(d)]
                    for c in range(d)
                ]
            )
        a_map = np.linalg.solve(gram.T, h_rep)
        defect = a_map.conj() @ a_map - np.eye(d)
        sv = np.linalg.svd(defect, compute_uv=False)
        low = float(sv[-1])
        margin = low if margin is None else min(margin, low)

    report = Report(task="hamiltonian-invertibility")
    report.add(
        CheckRecord(
            name="defect_operator_invertible",
            kind="numeric",
            passed=bool(margin >= floor),
            residual=margin,
            tolerance=floor,
            detail=(
                f"smallest singular value across {len(points)} points; "
                "passes when it stays at or above the tolerance"
            ),
        )
    )
    return report


# ---------------------------------------------------------------------------
# eigenbundle coboundary operators
# ---------------------------------------------------------------------------


def pairing_dual_one_form(zbar: Section):
    """Components of the functional <zbar, .> over the chart frame."""
    chart = zbar.chart
    n = chart.rank
    out = []
    for i in range(n):
        total = chart.zero_scalar()
        for j in range(n):
            gji = chart.pairing[j][i]
            if gji and not zbar.coeffs[j].is_zero:
                total = total + zbar.coeffs[j] * gji
        out.append(total)
    return out


def one_form_apply(beta, v: Section) -> Scalar:
    total = v.chart.zero_scalar()
    for b, c in zip(beta, v.coeffs):
        if not (b.is_zero or c.is_zero):
            total = total + b * c
    return total


def d_l_one_form(chart: CourantChart, beta, v: Section, w: Section) -> Scalar:
    """Coboundary of a one-cochain on an isotropic involutive subbundle."""
    return (
        anchor_apply(v, one_form_apply(beta, w))
        - anchor_apply(w, one_form_apply(beta, v))
        - one_form_apply(beta, courant_bracket(v, w))
    )


def d_l_two_form(
    chart: CourantChart, alpha: TwoForm, x0: Section, x1: Section, x2: Section
) -> Scalar:
    """Coboundary of a two-cochain on an isotropic involutive subbundle."""
    return (
        anchor_apply(x0, alpha.apply(x1, x2))
        - anchor_apply(x1, alpha.apply(x0, x2))
        + anchor_apply(x2, alpha.apply(x0, x1))
        - alpha.apply(courant_bracket(x0, x1), x2)
        + alpha.apply(courant_bracket(x0, x2), x1)
        - alpha.apply(courant_bracket(x1, x2), x0)
    )
