"""Acceptance gate: eight end-to-end criteria with pinned tolerances.

Each test exercises one criterion through the public API and prints a single
PASS/FAIL line.  Tolerances and time budgets are frozen here; loosening them
is a behavior change, not a test fix.
"""

import json
import math
import random
import time
from fractions import Fraction as F

import numpy as np

from gengeo.courant import (
    check_axioms,
    check_dorfman_properties,
    random_scalar,
    random_section,
    standard_chart,
)
from gengeo.darboux import dw_pipeline, primitive_jet_records
from gengeo.fields import ScalarField
from gengeo.gcs import holomorphic_wedge_bivector, standard_complex_structure
from gengeo.liecalc import check_lie_properties
from gengeo.moser import (
    SectionFamily,
    check_cocycle,
    compose_flows,
    default_grid,
    extended_variables,
    hamiltonian_z_family,
    integrate_flow,
    moser_pipeline,
    sampled_hamiltonian_family,
    sampled_symplectic_family,
    symplectic_z_family,
)
from gengeo.scenario import load_example, load_scenario, run_scenario

TENTHS = [F(k, 10) for k in range(11)]


def _report(num, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def _exact_and_green(checks):
    return all(c.passed and c.kind == "exact" for c in checks)


def test_criterion_1_bracket_axioms_exact():
    """Axioms of the bracket/anchor/pairing hold exactly on random sections."""
    start = time.monotonic()
    ok = True
    for d in (1, 2, 3):
        chart = standard_chart(d)
        rng = random.Random(101 + d)
        sections = [random_section(chart, rng) for _ in range(50)]
        functions = [random_scalar(rng, chart.variables) for _ in range(50)]
        ok = ok and _exact_and_green(check_axioms(chart, sections, functions).checks)
        ok = ok and _exact_and_green(
            check_dorfman_properties(chart, sections, functions).checks
        )
    elapsed = time.monotonic() - start
    ok = ok and elapsed <= 30.0
    _report(
        1,
        ok,
        f"axioms and derived identities exact for base dims 1-3, "
        f"50 random sections each ({elapsed:.1f}s <= 30s)",
    )


def test_criterion_2_derivative_calculus_exact():
    """The derivative-calculus identity suite holds exactly on random triples."""
    start = time.monotonic()
    chart = standard_chart(2)
    rng = random.Random(202)
    sections = [random_section(chart, rng) for _ in range(75)]
    functions = [random_scalar(rng, chart.variables) for _ in range(75)]
    report = check_lie_properties(chart, sections, functions)
    elapsed = time.monotonic() - start
    ok = _exact_and_green(report.checks) and elapsed <= 30.0
    _report(
        2,
        ok,
        f"{len(report.checks)} identities exact on 25 random triples "
        f"({elapsed:.1f}s <= 30s)",
    )


def test_criterion_3_sampled_symplectic_moser():
    """Sampled area-scaling family: algebra exact, identification to 1e-5."""
    start = time.monotonic()
    chart = standard_chart(2)
    ext = extended_variables(chart)
    x1 = ScalarField.coordinate("x1", ext)
    t = ScalarField.coordinate("t", ext)
    one = ScalarField.one(ext)

    rate = [[0, 1], [-1, 0]]
    samples = [
        (tk, [[0, 1 + tk], [-(1 + tk), 0]], rate) for tk in TENTHS
    ]
    family = sampled_symplectic_family(chart, samples)
    z_family = symplectic_z_family(
        chart, [[0, one + t], [-(one + t), 0]], [0, -x1], TENTHS
    )
    grid = default_grid(chart)
    report = moser_pipeline(
        family,
        z_family,
        steps=100,
        identification_tol=1e-5,
        checkpoints=[F(1)],
        grid=grid,
    )
    ident = [c for c in report.checks if c.name.startswith("identification")]
    algebraic = [
        c
        for c in report.checks
        if c.name.split("[")[0]
        in ("eigenbundle_membership", "cocycle_closed", "infinitesimal_compensation")
    ]

    flow = integrate_flow(chart, z_family.real_generator_dense(), 0, 1, grid, steps=100)
    target = np.stack([grid[:, 0] / 2.0, grid[:, 1]], axis=1)
    map_err = float(np.max(np.abs(flow.mapped - target)))

    elapsed = time.monotonic() - start
    ok = (
        report.passed
        and len(algebraic) == 33
        and _exact_and_green(algebraic)
        and ident
        and max(c.residual for c in ident) <= 1e-5
        and map_err <= 1e-6
        and elapsed <= 60.0
    )
    _report(
        3,
        ok,
        f"11-sample family certified, identification residual "
        f"{max(c.residual for c in ident):.1e} <= 1e-5, flow halves x1 to "
        f"{map_err:.1e} <= 1e-6 ({elapsed:.1f}s <= 60s)",
    )


def test_criterion_4_transport_exactness():
    """Frame transport: closed forms, group law, pairing preservation."""
    start = time.monotonic()
    chart = standard_chart(2)
    ext = extended_variables(chart)
    x1 = ScalarField.coordinate("x1", ext)
    x2 = ScalarField.coordinate("x2", ext)
    zero = ScalarField.zero(ext)
    grid = default_grid(chart)

    pure_covector = [zero, zero, zero, x1]
    flow = integrate_flow(chart, pure_covector, 0, 1, grid, steps=10)
    shear_err = float(
        np.max(np.abs(flow.covector_shear - np.array([[0.0, -1.0], [1.0, 0.0]])))
    )

    gen = [x2, zero, zero, x1]
    direct = integrate_flow(chart, gen, 0, 1, grid, steps=50)
    first = integrate_flow(chart, gen, 0, 0.5, grid, steps=24)
    second = integrate_flow(chart, gen, 0.5, 1, first.mapped, steps=26)
    chained = compose_flows(first, second)
    group_err = max(
        float(np.max(np.abs(chained.frame_transport - direct.frame_transport))),
        float(np.max(np.abs(chained.mapped - direct.mapped))),
    )
    pairing_err = max(direct.pairing_defect(chart), flow.pairing_defect(chart))

    elapsed = time.monotonic() - start
    ok = (
        shear_err <= 1e-12
        and group_err <= 1e-6
        and pairing_err <= 1e-8
        and elapsed <= 60.0
    )
    _report(
        4,
        ok,
        f"covector transport {shear_err:.1e} <= 1e-12, group law "
        f"{group_err:.1e} <= 1e-6, pairing defect {pairing_err:.1e} <= 1e-8 "
        f"({elapsed:.1f}s <= 60s)",
    )


def test_criterion_5_holomorphic_poisson_moser():
    """Exponential bivector family on the 4-dimensional chart."""
    start = time.monotonic()
    chart = standard_chart(4)
    j_mat = standard_complex_structure(chart)
    x1 = ScalarField.coordinate("x1", chart.variables)
    x2 = ScalarField.coordinate("x2", chart.variables)
    x3 = ScalarField.coordinate("x3", chart.variables)
    x4 = ScalarField.coordinate("x4", chart.variables)
    i_unit = ScalarField.constant(complex(0, 1), chart.variables)
    z1 = x1 + x2 * i_unit
    z2 = x3 + x4 * i_unit

    samples = []
    for tk in TENTHS:
        c = F(float(math.exp(tk)))
        pi = holomorphic_wedge_bivector(chart, z1 * c, pair=(1, 2))
        samples.append((tk, pi, pi))
    family = sampled_hamiltonian_family(chart, j_mat, samples, verify=True)

    half = F(1, 2)
    comps = [0, 0, z2 * half, z2 * (-i_unit * half)]
    z_family = hamiltonian_z_family(chart, comps, TENTHS)

    grid = default_grid(chart)
    report = moser_pipeline(
        family,
        z_family,
        steps=100,
        identification_tol=1e-5,
        checkpoints=[F(1, 2), F(1)],
        grid=grid,
    )
    ident = [c for c in report.checks if c.name.startswith("identification")]

    flow = integrate_flow(chart, z_family.real_generator_dense(), 0, 1, grid, steps=100)
    e = math.e
    target = np.stack(
        [grid[:, 0], grid[:, 1], e * grid[:, 2], e * grid[:, 3]], axis=1
    )
    map_err = float(np.max(np.abs(flow.mapped - target)))

    elapsed = time.monotonic() - start
    ok = (
        report.passed
        and len(ident) == 2
        and max(c.residual for c in ident) <= 1e-5
        and map_err <= 1e-6
        and elapsed <= 120.0
    )
    _report(
        5,
        ok,
        f"exponential bivector certified at t=1/2, 1: identification "
        f"{max(c.residual for c in ident):.1e} <= 1e-5, flow scales the "
        f"second complex coordinate to {map_err:.1e} <= 1e-6 "
        f"({elapsed:.1f}s <= 120s)",
    )


def test_criterion_6_normal_form_construction():
    """Curved area form is flowed onto its constant normal form."""
    start = time.monotonic()
    chart = standard_chart(2)
    x1 = ScalarField.coordinate("x1", chart.variables)
    one = ScalarField.one(chart.variables)
    curved = one + x1 * x1
    omega = [[0, curved], [-curved, 0]]
    report = dw_pipeline(
        chart,
        omega,
        times=TENTHS,
        steps=100,
        identification_tol=1e-4,
        pullback_tol=1e-4,
        grid=default_grid(chart),
    )
    by_prefix = {}
    for c in report.checks:
        by_prefix.setdefault(c.name.split("[")[0], []).append(c)

    exact_names = (
        "scaling_rate_identity",
        "primitive_differential",
        "primitive_vanishes_at_origin",
        "primitive_first_jet_vanishes",
        "primitive_solves_rate",
    )
    exact_ok = all(
        name in by_prefix and _exact_and_green(by_prefix[name])
        for name in exact_names
    )
    ident = max(c.residual for c in by_prefix.get("identification", []))
    pullback = max(c.residual for c in by_prefix["form_pullback_is_normal_form"])
    origin = max(c.residual for c in by_prefix["flow_fixes_origin"])

    elapsed = time.monotonic() - start
    ok = (
        report.passed
        and exact_ok
        and ident <= 1e-4
        and pullback <= 1e-4
        and origin <= 1e-10
        and elapsed <= 120.0
    )
    _report(
        6,
        ok,
        f"radial primitive exact, identification {ident:.1e} <= 1e-4, "
        f"pullback to the constant form {pullback:.1e} <= 1e-4, origin fixed "
        f"to {origin:.1e} ({elapsed:.1f}s <= 120s)",
    )


def test_criterion_7_negative_controls():
    """Spoiled inputs must be rejected, not absorbed."""
    start = time.monotonic()
    controls = {}

    # (a) two-form rate that is not closed in dimension four
    chart4 = standard_chart(4)
    y1 = ScalarField.coordinate("x1", chart4.variables)

    def omega4(tk):
        m = [[0] * 4 for _ in range(4)]
        m[0][1], m[1][0] = 1, -1
        m[2][3] = 1 + tk * y1
        m[3][2] = -(1 + tk * y1)
        return m

    rate4 = [[0] * 4 for _ in range(4)]
    rate4[2][3], rate4[3][2] = y1, -y1
    bad_rate = sampled_symplectic_family(
        chart4, [(tk, omega4(tk), rate4) for tk in (F(0), F(1, 10), F(1, 5))]
    )
    cocycle = check_cocycle(bad_rate, times=[F(1, 10)])
    controls["non-closed rate"] = (
        not cocycle.passed and cocycle.checks[0].residual_terms > 0
    )

    # (b) section outside the moving eigenbundle
    chart = standard_chart(2)
    ext = extended_variables(chart)
    t = ScalarField.coordinate("t", ext)
    one = ScalarField.one(ext)
    zero = ScalarField.zero(ext)
    x1e = ScalarField.coordinate("x1", ext)
    rate = [[0, 1], [-1, 0]]
    family = sampled_symplectic_family(
        chart, [(tk, [[0, 1 + tk], [-(1 + tk), 0]], rate) for tk in TENTHS]
    )
    stray = SectionFamily.from_dense(chart, [one, zero, zero, zero], TENTHS)
    report = moser_pipeline(family, stray, grid=default_grid(chart))
    membership = [
        c for c in report.checks if c.name.startswith("eigenbundle_membership")
    ]
    controls["stray section"] = (
        not report.passed
        and any(not c.passed for c in membership)
        and report.meta.get("flow", "").startswith("skipped")
    )

    # (c) primitive cochain with a nonvanishing first jet
    linear_beta = SectionFamily.from_dense(chart, [zero, zero, x1e, zero], TENTHS)
    jets = {r.name: r for r in primitive_jet_records(chart, linear_beta)}
    controls["linear primitive"] = (
        jets["primitive_vanishes_at_origin"].passed
        and not jets["primitive_first_jet_vanishes"].passed
    )

    # (d) structure constants violating the Jacobi identity
    doc = {
        "task": "axioms",
        "chart": {
            "kind": "double",
            "anchor": [["0"] * 3 for _ in range(3)],
            "structure": {"1,2": ["0", "0", "1"], "1,3": ["1", "0", "0"]},
        },
        "numeric": {"trials": 8},
    }
    axioms = run_scenario(load_scenario(doc))
    controls["non-Jacobi constants"] = not axioms.passed

    elapsed = time.monotonic() - start
    ok = all(controls.values()) and elapsed <= 60.0
    rejected = sum(controls.values())
    _report(
        7,
        ok,
        f"{rejected}/4 spoiled inputs rejected "
        f"({', '.join(k for k, v in controls.items() if v)}) "
        f"({elapsed:.1f}s <= 60s)",
    )


def test_criterion_8_deterministic_reports():
    """Identical scenarios produce byte-identical reports."""
    start = time.monotonic()
    ok = True
    for name in ("courant_axioms", "symplectic_moser"):
        scenario = load_example(name)
        first = run_scenario(scenario).to_json()
        second = run_scenario(scenario).to_json()
        ok = ok and first == second
        payload = json.loads(first)
        ok = ok and payload["seed"] == 0 and len(payload["scenario_hash"]) == 12
    elapsed = time.monotonic() - start
    ok = ok and elapsed <= 60.0
    _report(
        8,
        ok,
        f"repeat runs of two bundled scenarios byte-identical "
        f"({elapsed:.1f}s <= 60s)",
    )
