"""Deformation families and the flow-identification pipeline.

Given a one-parameter family of generalized complex structures and a family
of eigenbundle sections, the pipeline verifies the algebraic conditions
(sections live in the moving eigenbundle; the derivative form is a cocycle;
the real generator compensates the time derivative exactly), integrates the
generator's flow together with its frame transport, and confirms that the
transport identifies the structure at each checkpoint with the initial one.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .courant import (
    CourantChart,
    Section,
    anchor_apply,
    courant_bracket,
    scalar_term_count,
)
from .fields import (
    I_UNIT,
    RationalScalar,
    Scalar,
    ScalarField,
    canonical_variables,
    imag_part,
    partial_or_zero,
)
from .gcs import (
    block_endomorphism,
    deformation_block,
    eigenprojector,
    gcs_from_holomorphic_poisson,
    gcs_from_symplectic,
    lift_matrix,
    mat_mul,
    mat_transpose,
    omega_form,
    scalar_matrix_inverse,
)
from .liecalc import EndomorphismField, lie_endomorphism
from .report import CheckRecord, Report, exact_record, numeric_record

TIME_VARIABLE = "t"


class MoserError(ValueError):
    """Family data is unusable for the deformation pipeline."""


class FlowEscapeError(RuntimeError):
    """A trajectory left the trusted integration domain."""


def extended_variables(chart: CourantChart, time_variable: str = TIME_VARIABLE):
    """Chart coordinates with the time variable appended (and kept last)."""
    if time_variable in chart.variables:
        raise MoserError(f"time variable {time_variable!r} shadows a coordinate")
    ext = canonical_variables(chart.variables + (time_variable,))
    if ext != chart.variables + (time_variable,):
        raise MoserError(
            f"time variable {time_variable!r} must sort after the coordinates"
        )
    return ext


def embed_scalar(s: Scalar, variables) -> Scalar:
    variables = tuple(variables)
    if isinstance(s, ScalarField):
        return s.embed(variables)
    return RationalScalar(s.num.embed(variables), s.den.embed(variables))


def _lift_to(variables, value) -> Scalar:
    if isinstance(value, (ScalarField, RationalScalar)):
        return embed_scalar(value, variables)
    return ScalarField.constant(value, variables) if value else ScalarField.zero(variables)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


class GcsFamily:
    """Time family of structures: dense in the time variable, or sampled.

    Dense families carry one matrix whose entries depend on the coordinates
    and the time variable; sampled families carry exact-time snapshots with
    optional exact derivatives (finite differences on a uniform grid act as
    an approximate fallback).
    """

    def __init__(self, chart, kind, times, time_variable, matrix=None, samples=None):
        self.chart = chart
        self.kind = kind
        self.time_variable = time_variable
        self.times = [Fraction(t) for t in times]
        if sorted(set(self.times)) != self.times:
            raise MoserError("sample times must be strictly increasing")
        if len(self.times) < 2:
            raise MoserError("a family needs at least two sample times")
        self._matrix = matrix
        self._dot_matrix = None
        self._samples = samples or {}

    @classmethod
    def from_dense(
        cls,
        chart: CourantChart,
        matrix,
        times,
        time_variable: str = TIME_VARIABLE,
        validate: bool = True,
    ) -> "GcsFamily":
        ext = extended_variables(chart, time_variable)
        lifted = [[_lift_to(ext, c) for c in row] for row in matrix]
        n = chart.rank
        if len(lifted) != n or any(len(r) != n for r in lifted):
            raise MoserError(f"family matrix must be {n}x{n}")
        fam = cls(chart, "dense", times, time_variable, matrix=lifted)
        if validate:
            worst = fam._square_defect_dense()
            if worst:
                raise MoserError(
                    "family does not square to minus the identity "
                    f"({worst} residual terms)"
                )
        return fam

    @classmethod
    def from_samples(
        cls,
        chart: CourantChart,
        samples,
        time_variable: str = TIME_VARIABLE,
        validate: bool = True,
    ) -> "GcsFamily":
        table = {}
        times = []
        for entry in samples:
            t, J = entry[0], entry[1]
            dot = entry[2] if len(entry) > 2 else None
            t = Fraction(t)
            times.append(t)
            table[t] = (J, dot)
        fam = cls(chart, "sampled", times, time_variable, samples=table)
        if validate:
            for t in fam.times:
                J = table[t][0]
                defect = J.compose(J) + EndomorphismField.identity(chart)
                if defect.term_count():
                    raise MoserError(
                        f"sample at t={t} does not square to minus the identity"
                    )
        return fam

    def _square_defect_dense(self) -> int:
        n = self.chart.rank
        worst = 0
        sq = mat_mul(self._matrix, self._matrix)
        for i in range(n):
            for j in range(n):
                expected = -1 if i == j else 0
                worst = max(worst, scalar_term_count(sq[i][j] - expected))
        return worst

    def structure_at(self, t) -> EndomorphismField:
        t = Fraction(t)
        if self.kind == "dense":
            return EndomorphismField(
                self.chart,
                [
                    [c.substitute_value(self.time_variable, t) for c in row]
                    for row in self._matrix
                ],
            )
        if t not in self._samples:
            raise MoserError(f"no sample at t={t}")
        return self._samples[t][0]

    def derivative_at(self, t):
        """Time derivative at a sample time; returns (value, is_exact)."""
        t = Fraction(t)
        if self.kind == "dense":
            if self._dot_matrix is None:
                self._dot_matrix = [
                    [partial_or_zero(c, self.time_variable) for c in row]
                    for row in self._matrix
                ]
            return (
                EndomorphismField(
                    self.chart,
                    [
                        [c.substitute_value(self.time_variable, t) for c in row]
                        for row in self._dot_matrix
                    ],
                ),
                True,
            )
        if t not in self._samples:
            raise MoserError(f"no sample at t={t}")
        stored = self._samples[t][1]
        if stored is not None:
            return stored, True
        return self._finite_difference(t), False

    def _finite_difference(self, t: Fraction) -> EndomorphismField:
        times = self.times
        if len(times) < 3:
            raise MoserError("finite-difference fallback needs at least 3 samples")
        h = times[1] - times[0]
        if any(times[k + 1] - times[k] != h for k in range(len(times) - 1)):
            raise MoserError("finite-difference fallback needs a uniform time grid")
        idx = times.index(t)
        J = lambda k: self._samples[times[k]][0]
        scale = Fraction(1, 2) / h
        if 0 < idx < len(times) - 1:
            diff = J(idx + 1) - J(idx - 1)
        elif idx == 0:
            diff = J(0).scaled(-3) + J(1).scaled(4) - J(2)
        else:
            diff = J(idx).scaled(3) - J(idx - 1).scaled(4) + J(idx - 2)
        return diff.scaled(scale)


def sampled_symplectic_family(
    chart: CourantChart, samples, require_polynomial: bool = False
) -> GcsFamily:
    """Family built from form snapshots (t, form matrix, optional derivative).

    The structure derivative is assembled exactly from the form derivative:
    the tangent block is the transposed derivative, the covector block is
    its conjugation by the inverted form.
    """
    built = []
    for entry in samples:
        t, omega = entry[0], entry[1]
        omega_dot = entry[2] if len(entry) > 2 else None
        J = gcs_from_symplectic(chart, omega, require_polynomial=require_polynomial)
        dot = None
        if omega_dot is not None:
            flat = mat_transpose(lift_matrix(chart.variables, omega))
            sharp = scalar_matrix_inverse(flat, require_polynomial=require_polynomial)
            flat_dot = mat_transpose(lift_matrix(chart.variables, omega_dot))
            top_right = mat_mul(mat_mul(sharp, flat_dot), sharp)
            dot = block_endomorphism(chart, None, top_right, flat_dot, None)
        built.append((Fraction(t), J, dot))
    return GcsFamily.from_samples(chart, built)


def sampled_hamiltonian_family(
    chart: CourantChart, j_mat, samples, verify: bool = True
) -> GcsFamily:
    """Family of bivector deformations of a fixed complex structure.

    Samples are (t, bivector matrix, optional bivector derivative); the
    structure derivative sits entirely in the upper-right block because the
    deformation block is linear in the bivector.
    """
    j_lift = lift_matrix(chart.variables, j_mat)
    built = []
    for idx, entry in enumerate(samples):
        t, pi_mat = entry[0], entry[1]
        pi_dot = entry[2] if len(entry) > 2 else None
        J = gcs_from_holomorphic_poisson(chart, j_mat, pi_mat, verify=verify)
        dot = None
        if pi_dot is not None:
            q_dot = deformation_block(chart, j_lift, lift_matrix(chart.variables, pi_dot))
            dot = block_endomorphism(chart, None, q_dot, None, None)
        built.append((Fraction(t), J, dot))
    return GcsFamily.from_samples(chart, built)


def dense_symplectic_family(
    chart: CourantChart,
    omega_mat,
    times,
    time_variable: str = TIME_VARIABLE,
    require_polynomial: bool = False,
) -> GcsFamily:
    """Dense family from a form matrix whose entries depend on time."""
    ext = extended_variables(chart, time_variable)
    omega = [[_lift_to(ext, c) for c in row] for row in omega_mat]
    flat = mat_transpose(omega)
    sharp = scalar_matrix_inverse(flat, require_polynomial=require_polynomial)
    d = chart.dim
    zero = ScalarField.zero(ext)
    n = chart.rank
    matrix = [[zero] * n for _ in range(n)]
    for i in range(d):
        for j in range(d):
            matrix[i][d + j] = -sharp[i][j]
            matrix[d + i][j] = flat[i][j]
    return GcsFamily.from_dense(chart, matrix, times, time_variable)


class SectionFamily:
    """Time family of eigenbundle sections (dense or sampled)."""

    def __init__(self, chart, kind, times, time_variable, coeffs=None, samples=None):
        self.chart = chart
        self.kind = kind
        self.time_variable = time_variable
        self.times = [Fraction(t) for t in times]
        self._coeffs = coeffs
        self._samples = samples or {}

    @classmethod
    def from_dense(
        cls,
        chart: CourantChart,
        coeffs,
        times,
        time_variable: str = TIME_VARIABLE,
    ) -> "SectionFamily":
        ext = extended_variables(chart, time_variable)
        lifted = [_lift_to(ext, c) for c in coeffs]
        if len(lifted) != chart.rank:
            raise MoserError(f"section family needs {chart.rank} components")
        return cls(chart, "dense", times, time_variable, coeffs=lifted)

    @classmethod
    def from_samples(
        cls, chart: CourantChart, samples, time_variable: str = TIME_VARIABLE
    ) -> "SectionFamily":
        table = {}
        times = []
        for t, section in samples:
            t = Fraction(t)
            times.append(t)
            table[t] = section
        return cls(chart, "sampled", times, time_variable, samples=table)

    def at(self, t) -> Section:
        t = Fraction(t)
        if self.kind == "dense":
            return Section(
                self.chart,
                [c.substitute_value(self.time_variable, t) for c in self._coeffs],
            )
        if t not in self._samples:
            raise MoserError(f"no section sample at t={t}")
        return self._samples[t]

    def real_generator_at(self, t) -> Section:
        """Imaginary part, the real section driving the flow."""
        z = self.at(t)
        return Section(self.chart, [imag_part(c) for c in z.coeffs])

    def real_generator_dense(self):
        """Imaginary-part components over coordinates and time (dense only)."""
        if self.kind != "dense":
            raise MoserError(
                "flow integration needs a dense-in-time section family"
            )
        return [imag_part(c) for c in self._coeffs]


def symplectic_z_family(
    chart: CourantChart,
    omega_mat,
    xi_components,
    times,
    time_variable: str = TIME_VARIABLE,
) -> SectionFamily:
    """Eigenbundle sections from a covector primitive of minus the form rate.

    The tangent part inverts the form on the primitive; the section is
    (i X, xi), whose imaginary part is the classical flow generator X.
    """
    ext = extended_variables(chart, time_variable)
    omega = [[_lift_to(ext, c) for c in row] for row in omega_mat]
    xi = [_lift_to(ext, c) for c in xi_components]
    if len(xi) != chart.dim:
        raise MoserError(f"primitive needs {chart.dim} covector components")
    flat = mat_transpose(omega)
    sharp = scalar_matrix_inverse(flat)
    d = chart.dim
    x_parts = []
    for mu in range(d):
        total = ScalarField.zero(ext)
        for nu in range(d):
            if not (sharp[mu][nu].is_zero or xi[nu].is_zero):
                total = total + sharp[mu][nu] * xi[nu]
        x_parts.append(total)
    coeffs = [p * I_UNIT for p in x_parts] + list(xi)
    return SectionFamily.from_dense(chart, coeffs, times, time_variable)


def hamiltonian_z_family(
    chart: CourantChart,
    holomorphic_components,
    times,
    time_variable: str = TIME_VARIABLE,
) -> SectionFamily:
    """Eigenbundle sections from a holomorphic tangent field.

    The section is 2i times the conjugate field (a pure antiholomorphic
    tangent section); its imaginary part is twice the real part of the
    given field.
    """
    ext = extended_variables(chart, time_variable)
    comps = [_lift_to(ext, c) for c in holomorphic_components]
    if len(comps) != chart.dim:
        raise MoserError(f"tangent field needs {chart.dim} components")
    two_i = I_UNIT * 2
    zero = ScalarField.zero(ext)
    coeffs = [c.conjugate() * two_i for c in comps] + [zero] * chart.dim
    return SectionFamily.from_dense(chart, coeffs, times, time_variable)


# ---------------------------------------------------------------------------
# algebraic stage checks
# ---------------------------------------------------------------------------


def _sup_on_grid(scalar: Scalar, grid: np.ndarray) -> float:
    fn = scalar.compile_numeric()
    cols = [grid[:, k] for k in range(grid.shape[1])]
    vals = np.asarray(fn(cols))
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def membership_records(family: GcsFamily, z_family: SectionFamily, times=None):
    """Exact per-sample check that the sections sit in the +i eigenbundle."""
    chart = family.chart
    times = [Fraction(t) for t in (times if times is not None else family.times)]
    records = []
    for t in times:
        J = family.structure_at(t)
        z = z_family.at(t)
        defect = J.apply(z) - z.scaled(I_UNIT)
        records.append(
            exact_record(
                f"eigenbundle_membership[t={t}]",
                defect.term_count(),
                detail="J z = i z",
            )
        )
    return records


def check_cocycle(
    family: GcsFamily,
    times=None,
    grid: Optional[np.ndarray] = None,
    fd_tolerance: float = 1e-6,
) -> Report:
    """Closedness of the derivative form on the moving eigenbundle.

    At each sample time the form <., Jdot .> is restricted to spanning
    sections of the +i eigenbundle and hit with the subbundle coboundary on
    all frame triples.  Exact derivatives give exact residuals; fallback
    finite-difference derivatives are checked on a numeric grid.
    """
    chart = family.chart
    n = chart.rank
    report = Report(task="cocycle")
    times = [Fraction(t) for t in (times if times is not None else family.times)]
    for t in times:
        J = family.structure_at(t)
        dot, exact = family.derivative_at(t)
        alpha = omega_form(dot)
        P = eigenprojector(J)
        spanning = [P.column(i) for i in range(n)]
        pair_values = {}
        pair_brackets = {}
        for i in range(n):
            for j in range(i + 1, n):
                pair_values[(i, j)] = alpha.apply(spanning[i], spanning[j])
                pair_brackets[(i, j)] = courant_bracket(spanning[i], spanning[j])

        def value(i, j):
            return pair_values[(i, j)] if i < j else -pair_values[(j, i)]

        worst_terms = 0
        worst_value = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    residual = (
                        anchor_apply(spanning[i], value(j, k))
                        - anchor_apply(spanning[j], value(i, k))
                        + anchor_apply(spanning[k], value(i, j))
                        - alpha.apply(pair_brackets[(i, j)], spanning[k])
                        + alpha.apply(pair_brackets[(i, k)], spanning[j])
                        - alpha.apply(pair_brackets[(j, k)], spanning[i])
                    )
                    if exact:
                        worst_terms = max(worst_terms, scalar_term_count(residual))
                    else:
                        if grid is None:
                            grid = default_grid(chart)
                        worst_value = max(worst_value, _sup_on_grid(residual, grid))
        if exact:
            report.add(
                exact_record(
                    f"cocycle_closed[t={t}]",
                    worst_terms,
                    detail=f"all {n * (n - 1) * (n - 2) // 6} spanning triples",
                )
            )
        else:
            report.add(
                numeric_record(
                    f"cocycle_closed[t={t}]",
                    worst_value,
                    fd_tolerance,
                    detail="finite-difference derivative; grid supremum",
                )
            )
    return report


def check_infinitesimal(
    family: GcsFamily,
    z_family: SectionFamily,
    times=None,
    grid: Optional[np.ndarray] = None,
    fd_tolerance: float = 1e-6,
) -> Report:
    """The real generator compensates the time derivative: Jdot + L_x J = 0."""
    chart = family.chart
    report = Report(task="infinitesimal")
    times = [Fraction(t) for t in (times if times is not None else family.times)]
    for t in times:
        J = family.structure_at(t)
        dot, exact = family.derivative_at(t)
        x = z_family.real_generator_at(t)
        residual = dot + lie_endomorphism(x, J)
        if exact:
            report.add(
                exact_record(
                    f"infinitesimal_compensation[t={t}]",
                    residual.term_count(),
                    detail="Jdot + L_x J = 0",
                )
            )
        else:
            if grid is None:
                grid = default_grid(chart)
            worst = 0.0
            for row in residual.matrix:
                for entry in row:
                    worst = max(worst, _sup_on_grid(entry, grid))
            report.add(
                numeric_record(
                    f"infinitesimal_compensation[t={t}]",
                    worst,
                    fd_tolerance,
                    detail="finite-difference derivative; grid supremum",
                )
            )
    return report


# ---------------------------------------------------------------------------
# flow integration
# ---------------------------------------------------------------------------


def default_grid(
    chart_or_dim,
    per_axis: int = 5,
    bound: float = 1.0,
    extra_random: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """Lattice over the cube plus a few seeded rational points."""
    d = chart_or_dim.dim if hasattr(chart_or_dim, "dim") else int(chart_or_dim)
    axis = np.linspace(-bound, bound, per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    import random as _random

    rng = _random.Random(seed)
    extra = np.array(
        [
            [rng.randint(-9, 9) / 10 * bound for _ in range(d)]
            for _ in range(extra_random)
        ]
    )
    if extra_random:
        pts = np.vstack([pts, extra])
    return pts


@dataclass
class FlowResult:
    """Trajectories plus the frame transport of a generalized flow."""

    start_time: float
    end_time: float
    steps: int
    points: np.ndarray          # (npts, d) initial positions
    mapped: np.ndarray          # (npts, d) final positions
    tangent_transport: np.ndarray   # (npts, d, d) derivative of the point map
    covector_shear: np.ndarray      # (npts, d, d) lower-left transport block
    frame_transport: np.ndarray     # (npts, 2d, 2d) full transport

    def pairing_defect(self, chart: CourantChart) -> float:
        g = np.array([[float(x) for x in row] for row in chart.pairing])
        phi = self.frame_transport
        lhs = np.einsum("pki,kl,plj->pij", phi, g, phi)
        return float(np.max(np.abs(lhs - g)))


def _compile_generator(chart: CourantChart, components, time_variable: str):
    ext = extended_variables(chart, time_variable)
    comps = [_lift_to(ext, c) for c in components]
    if len(comps) != chart.rank:
        raise MoserError(f"generator needs {chart.rank} components")
    for c in comps:
        if not (c - c.conjugate()).is_zero:
            raise MoserError("flow generator must be a real section")
    d = chart.dim
    tangent = comps[:d]
    covector = comps[d:]
    x_fns = [c.compile_numeric() for c in tangent]
    grad_fns = [
        [partial_or_zero(tangent[mu], ext[nu]).compile_numeric() for nu in range(d)]
        for mu in range(d)
    ]
    has_covector = any(not c.is_zero for c in covector)
    shear_fns = None
    if has_covector:
        # B_{mu nu} = d_nu xi_mu - d_mu xi_nu, the transposed curl
        shear_fns = [
            [
                (
                    partial_or_zero(covector[mu], ext[nu])
                    - partial_or_zero(covector[nu], ext[mu])
                ).compile_numeric()
                for nu in range(d)
            ]
            for mu in range(d)
        ]
    return x_fns, grad_fns, shear_fns


def _eval_stack(fns, cols, npts):
    rows = []
    for fn in fns:
        v = fn(cols)
        rows.append(np.broadcast_to(np.asarray(v), (npts,)).astype(complex))
    return np.stack(rows, axis=1)


def _eval_matrix_stack(fns, cols, npts):
    d = len(fns)
    out = np.empty((npts, d, d), dtype=complex)
    for mu in range(d):
        for nu in range(d):
            v = np.asarray(fns[mu][nu](cols))
            out[:, mu, nu] = np.broadcast_to(v, (npts,))
    return out


def integrate_flow(
    chart: CourantChart,
    generator,
    t_start,
    t_end,
    points: np.ndarray,
    steps: int = 100,
    escape_radius: float = 10.0,
    time_variable: str = TIME_VARIABLE,
) -> FlowResult:
    """Flow the base points along the generator and transport the frame.

    Fourth-order integration of the point map and its derivative; the
    covector block is the variational integral of the transported curl of
    the covector part, evaluated with a composite quadrature on the same
    even-step mesh (hence the even-step requirement).
    """
    if steps <= 0 or steps % 2:
        raise MoserError("steps must be a positive even integer")
    d = chart.dim
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise MoserError(f"points must have shape (n, {d})")
    npts = pts.shape[0]
    x_fns, grad_fns, shear_fns = _compile_generator(chart, generator, time_variable)

    t0, t1 = float(t_start), float(t_end)
    h = (t1 - t0) / steps

    def velocity(p, tau):
        cols = [p[:, k] for k in range(d)] + [tau]
        return _eval_stack(x_fns, cols, npts).real

    def gradient(p, tau):
        cols = [p[:, k] for k in range(d)] + [tau]
        return _eval_matrix_stack(grad_fns, cols, npts).real

    def shear(p, tau):
        cols = [p[:, k] for k in range(d)] + [tau]
        return _eval_matrix_stack(shear_fns, cols, npts).real

    p = pts.copy()
    m = np.broadcast_to(np.eye(d), (npts, d, d)).copy()

    def integrand(p_now, m_now, tau):
        b = shear(p_now, tau)
        return np.einsum("pki,pkl,plj->pij", m_now, b, m_now)

    # composite Simpson weights: 1,4,2,...,4,1 times h/3; the initial node
    # enters here with weight 1, the loop adds each node it reaches
    simpson_total = integrand(p, m, t0) if shear_fns else None

    for k in range(steps):
        tau = t0 + k * h

        k1p = velocity(p, tau)
        k1m = np.einsum("pij,pjk->pik", gradient(p, tau), m)

        p2 = p + 0.5 * h * k1p
        m2 = m + 0.5 * h * k1m
        k2p = velocity(p2, tau + 0.5 * h)
        k2m = np.einsum("pij,pjk->pik", gradient(p2, tau + 0.5 * h), m2)

        p3 = p + 0.5 * h * k2p
        m3 = m + 0.5 * h * k2m
        k3p = velocity(p3, tau + 0.5 * h)
        k3m = np.einsum("pij,pjk->pik", gradient(p3, tau + 0.5 * h), m3)

        p4 = p + h * k3p
        m4 = m + h * k3m
        k4p = velocity(p4, tau + h)
        k4m = np.einsum("pij,pjk->pik", gradient(p4, tau + h), m4)

        p = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        m = m + (h / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)

        radii = np.linalg.norm(p, axis=1)
        if np.any(radii > escape_radius):
            bad = int(np.argmax(radii))
            raise FlowEscapeError(
                f"trajectory from {pts[bad].tolist()} left the ball of radius "
                f"{escape_radius} at step {k + 1} of {steps}"
            )
        if simpson_total is not None:
            weight = 1.0 if k == steps - 1 else (4.0 if k % 2 == 0 else 2.0)
            simpson_total += weight * integrand(p, m, tau + h)

    f_mat = m
    if simpson_total is not None:
        integral = (h / 3.0) * simpson_total
        c_mat = np.linalg.solve(np.transpose(f_mat, (0, 2, 1)), integral)
    else:
        c_mat = np.zeros((npts, d, d))

    f_inv_t = np.transpose(np.linalg.inv(f_mat), (0, 2, 1))
    phi = np.zeros((npts, 2 * d, 2 * d))
    phi[:, :d, :d] = f_mat
    phi[:, d:, :d] = c_mat
    phi[:, d:, d:] = f_inv_t
    return FlowResult(
        start_time=t0,
        end_time=t1,
        steps=steps,
        points=pts,
        mapped=p,
        tangent_transport=f_mat,
        covector_shear=c_mat,
        frame_transport=phi,
    )


def compose_flows(first: FlowResult, second: FlowResult) -> FlowResult:
    """Chain two transports; the second must start where the first ended."""
    if first.mapped.shape != second.points.shape or not np.allclose(
        first.mapped, second.points, atol=1e-9
    ):
        raise MoserError("flows do not chain: endpoint mismatch")
    phi = np.einsum("pij,pjk->pik", second.frame_transport, first.frame_transport)
    d = first.points.shape[1]
    return FlowResult(
        start_time=first.start_time,
        end_time=second.end_time,
        steps=first.steps + second.steps,
        points=first.points,
        mapped=second.mapped,
        tangent_transport=phi[:, :d, :d],
        covector_shear=phi[:, d:, :d],
        frame_transport=phi,
    )


# ---------------------------------------------------------------------------
# identification
# ---------------------------------------------------------------------------


def _compile_endomorphism(J: EndomorphismField):
    return [[c.compile_numeric() for c in row] for row in J.matrix]


def _endomorphism_values(fns, pts: np.ndarray) -> np.ndarray:
    npts = pts.shape[0]
    cols = [pts[:, k] for k in range(pts.shape[1])]
    n = len(fns)
    out = np.empty((npts, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[:, i, j] = np.broadcast_to(np.asarray(fns[i][j](cols)), (npts,))
    return out


def verify_identification(
    family: GcsFamily,
    flow: FlowResult,
    checkpoint,
    base_time=None,
    tol: float = 1e-5,
) -> CheckRecord:
    """Transported structure at the checkpoint equals the initial structure."""
    chart = family.chart
    t0 = Fraction(base_time) if base_time is not None else family.times[0]
    t = Fraction(checkpoint)
    j0_vals = _endomorphism_values(
        _compile_endomorphism(family.structure_at(t0)), flow.points
    )
    jt_vals = _endomorphism_values(
        _compile_endomorphism(family.structure_at(t)), flow.mapped
    )
    phi = flow.frame_transport.astype(complex)
    transported = np.linalg.solve(phi, np.einsum("pij,pjk->pik", jt_vals, phi))
    residual = float(np.max(np.abs(transported - j0_vals)))
    return numeric_record(
        f"identification[t={t}]",
        residual,
        tol,
        detail=f"{flow.points.shape[0]} grid points, {flow.steps} steps",
    )


def moser_pipeline(
    family: GcsFamily,
    z_family: SectionFamily,
    steps: int = 100,
    identification_tol: float = 1e-5,
    checkpoints=None,
    grid: Optional[np.ndarray] = None,
    fd_tolerance: float = 1e-6,
    escape_radius: float = 10.0,
) -> Report:
    """Full verification pipeline for one deformation family.

    Order: eigenbundle membership, cocycle closedness, exact infinitesimal
    compensation, flow integration to each checkpoint, and the transported
    identification.  A failed algebraic stage skips the flow stages, and the
    report then carries the failed records.
    """
    chart = family.chart
    report = Report(task="moser")
    times = family.times
    t0 = times[0]
    if checkpoints is None:
        checkpoints = [times[-1]]
    checkpoints = [Fraction(c) for c in checkpoints]
    if family.kind == "sampled":
        missing = [c for c in checkpoints if c not in times]
        if missing:
            raise MoserError(f"checkpoints {missing} are not sample times")
    if grid is None:
        grid = default_grid(chart)

    report.extend(membership_records(family, z_family))
    report.extend(check_cocycle(family, grid=grid, fd_tolerance=fd_tolerance).checks)
    algebra_ok = report.passed
    if algebra_ok:
        report.extend(
            check_infinitesimal(
                family, z_family, grid=grid, fd_tolerance=fd_tolerance
            ).checks
        )
        algebra_ok = report.passed

    if not algebra_ok:
        report.meta["flow"] = "skipped: algebraic stage failed"
        return report

    generator = z_family.real_generator_dense()
    for cp in checkpoints:
        try:
            flow = integrate_flow(
                chart,
                generator,
                t0,
                cp,
                points=grid,
                steps=steps,
                escape_radius=escape_radius,
                time_variable=z_family.time_variable,
            )
        except FlowEscapeError as err:
            report.add(
                CheckRecord(
                    name=f"identification[t={cp}]",
                    kind="numeric",
                    passed=False,
                    residual=float("inf"),
                    tolerance=identification_tol,
                    detail=str(err),
                )
            )
            continue
        report.add(
            numeric_record(
                f"transport_preserves_pairing[t={cp}]",
                flow.pairing_defect(chart),
                1e-8,
            )
        )
        report.add(
            verify_identification(
                family, flow, cp, base_time=t0, tol=identification_tol
            )
        )
    report.meta["steps"] = steps
    report.meta["grid_points"] = int(grid.shape[0])
    return report
