"""Declarative scenario schema and runner.

A scenario is a JSON document selecting a task (bracket axioms, structure
checks, a deformation run, or the normal-form construction) together with
the chart, the geometric objects as polynomial strings, and the numeric
controls.  Runs are deterministic: the same scenario and seed produce a
byte-identical report, and every report carries the hash of the effective
scenario it came from.
"""

from __future__ import annotations

import hashlib
import json
import random
from fractions import Fraction
from importlib import resources
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .courant import (
    CourantChart,
    check_axioms,
    check_dorfman_properties,
    double_of_lie_algebroid,
    random_scalar,
    random_section,
    standard_chart,
)
from .darboux import dw_pipeline
from .fields import parse_polynomial
from .gcs import (
    check_gcs,
    closedness_record,
    gcs_from_complex,
    gcs_from_holomorphic_poisson,
    gcs_from_symplectic,
    hamiltonian_invertibility,
    holomorphic_wedge_bivector,
    maurer_cartan_check,
    standard_complex_structure,
)
from .moser import (
    GcsFamily,
    SectionFamily,
    default_grid,
    dense_symplectic_family,
    extended_variables,
    hamiltonian_z_family,
    moser_pipeline,
    sampled_hamiltonian_family,
    sampled_symplectic_family,
    symplectic_z_family,
)
from .report import Report


class ScenarioError(ValueError):
    """The scenario document is invalid or inconsistent."""


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------


class ChartSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["standard", "double"] = "standard"
    dim: int = Field(default=2, ge=1, le=6)
    anchor: Optional[List[List[str]]] = None
    structure: Optional[Dict[str, List[str]]] = None


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    per_axis: int = Field(default=5, ge=2, le=9)
    bound: float = Field(default=1.0, gt=0)
    extra: int = Field(default=5, ge=0, le=50)


class NumericSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(default=100, ge=2)
    tol: float = Field(default=1e-5, gt=0)
    seed: int = 0
    trials: int = Field(default=24, ge=4, le=120)
    t_samples: Optional[List[str]] = None
    checkpoints: Optional[List[str]] = None
    fd_tolerance: float = Field(default=1e-6, gt=0)
    pullback_tol: Optional[float] = Field(default=None, gt=0)
    escape_radius: float = Field(default=10.0, gt=0)
    grid: GridSpec = GridSpec()


class StructureSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["symplectic", "complex", "holomorphic-poisson"]
    omega: Optional[List[List[str]]] = None
    j: Optional[List[List[str]]] = None
    coefficient: Optional[str] = None
    pair: Tuple[int, int] = (1, 2)


class SampleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: str
    omega: Optional[List[List[str]]] = None
    omega_dot: Optional[List[List[str]]] = None
    coefficient: Optional[str] = None
    coefficient_dot: Optional[str] = None


class FamilySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal[
        "symplectic-dense", "symplectic-sampled", "hamiltonian-sampled", "dense"
    ]
    omega: Optional[List[List[str]]] = None
    matrix: Optional[List[List[str]]] = None
    j: Optional[List[List[str]]] = None
    pair: Tuple[int, int] = (1, 2)
    samples: Optional[List[SampleSpec]] = None


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["symplectic-primitive", "sections", "holomorphic-tangent"]
    xi: Optional[List[str]] = None
    coeffs: Optional[List[str]] = None
    components: Optional[List[str]] = None


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: Literal["axioms", "check-gcs", "moser", "dw", "dw-run"]
    description: str = ""
    chart: ChartSpec = ChartSpec()
    structure: Optional[StructureSpec] = None
    family: Optional[FamilySpec] = None
    generator: Optional[GeneratorSpec] = None
    omega: Optional[List[List[str]]] = None
    numeric: NumericSpec = NumericSpec()


def load_scenario(data) -> Scenario:
    """Validate a dict (or JSON string) into a scenario, or raise ScenarioError."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as err:
            raise ScenarioError(f"not valid JSON: {err}") from err
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(str(err)) from err


def scenario_hash(scenario: Scenario) -> str:
    payload = json.dumps(
        scenario.model_dump(), sort_keys=True, separators=(",", ":"), default=str
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def apply_overrides(scenario: Scenario, steps=None, tol=None, seed=None) -> Scenario:
    """New scenario with selected numeric fields replaced."""
    updates = {}
    if steps is not None:
        updates["steps"] = steps
    if tol is not None:
        updates["tol"] = tol
    if seed is not None:
        updates["seed"] = seed
    if not updates:
        return scenario
    numeric = scenario.numeric.model_copy(update=updates)
    return scenario.model_copy(update={"numeric": numeric})


# ---------------------------------------------------------------------------
# bundled examples
# ---------------------------------------------------------------------------


def _examples_dir():
    return resources.files(__package__) / "scenarios"


def example_names() -> List[str]:
    """Names of the scenario documents shipped with the package."""
    return sorted(
        entry.name[: -len(".json")]
        for entry in _examples_dir().iterdir()
        if entry.name.endswith(".json")
    )


def load_example(name: str) -> Scenario:
    """Load a bundled scenario by name (with or without the .json suffix)."""
    if name.endswith(".json"):
        name = name[: -len(".json")]
    entry = _examples_dir() / f"{name}.json"
    if not entry.is_file():
        known = ", ".join(example_names())
        raise ScenarioError(f"unknown example {name!r}; bundled: {known}")
    return load_scenario(entry.read_text())


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def _fraction(text: str, what: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as err:
        raise ScenarioError(f"bad rational for {what}: {text!r}") from err


def _poly(text: str, variables, what: str):
    try:
        return parse_polynomial(text, variables)
    except Exception as err:
        raise ScenarioError(f"bad polynomial for {what}: {text!r} ({err})") from err


def _poly_matrix(rows, variables, what: str):
    if rows is None:
        raise ScenarioError(f"missing matrix: {what}")
    return [
        [_poly(c, variables, f"{what}[{i}][{j}]") for j, c in enumerate(row)]
        for i, row in enumerate(rows)
    ]


def build_chart(spec: ChartSpec) -> CourantChart:
    if spec.kind == "standard":
        return standard_chart(spec.dim)
    if spec.anchor is None:
        raise ScenarioError("double chart needs an anchor matrix")
    d = len(spec.anchor)
    variables = tuple(f"x{k+1}" for k in range(d))
    anchor = [
        [_poly(c, variables, f"anchor[{i}][{j}]") for j, c in enumerate(row)]
        for i, row in enumerate(spec.anchor)
    ]
    m = len(spec.anchor[0]) if spec.anchor else 0
    structure = None
    if spec.structure:
        structure = [[None] * m for _ in range(m)]
        for key, coeffs in spec.structure.items():
            try:
                i, j = (int(p) for p in key.split(","))
            except ValueError as err:
                raise ScenarioError(
                    f"structure key must be 'i,j' (1-indexed): {key!r}"
                ) from err
            if not (1 <= i <= m and 1 <= j <= m):
                raise ScenarioError(f"structure key out of range: {key!r}")
            parsed = [
                _poly(c, variables, f"structure[{key}][{n}]")
                for n, c in enumerate(coeffs)
            ]
            structure[i - 1][j - 1] = parsed
            if structure[j - 1][i - 1] is None:
                structure[j - 1][i - 1] = [-c for c in parsed]
    try:
        return double_of_lie_algebroid(anchor, structure)
    except (ValueError, ArithmeticError) as err:
        raise ScenarioError(f"bad chart: {err}") from err


def _times(spec: NumericSpec):
    if spec.t_samples is None:
        return [Fraction(k, 10) for k in range(11)]
    return [_fraction(t, "t_samples") for t in spec.t_samples]


def _checkpoints(spec: NumericSpec, times):
    if spec.checkpoints is None:
        return [times[-1]]
    return [_fraction(t, "checkpoints") for t in spec.checkpoints]


# ---------------------------------------------------------------------------
# task runners
# ---------------------------------------------------------------------------


def _run_axioms(scenario: Scenario, chart: CourantChart) -> Report:
    numeric = scenario.numeric
    rng = random.Random(numeric.seed)
    sections = [random_section(chart, rng) for _ in range(numeric.trials)]
    functions = [
        random_scalar(rng, chart.variables) for _ in range(numeric.trials)
    ]
    report = Report(task="axioms")
    report.extend(check_axioms(chart, sections, functions).checks)
    report.extend(check_dorfman_properties(chart, sections, functions).checks)
    report.meta["trials"] = numeric.trials
    return report


def _build_structure(spec: StructureSpec, chart: CourantChart):
    variables = chart.variables
    if spec.kind == "symplectic":
        omega = _poly_matrix(spec.omega, variables, "structure.omega")
        return gcs_from_symplectic(chart, omega), omega
    if spec.kind == "complex":
        j = _poly_matrix(spec.j, variables, "structure.j")
        return gcs_from_complex(chart, j), j
    j = (
        _poly_matrix(spec.j, variables, "structure.j")
        if spec.j is not None
        else standard_complex_structure(chart)
    )
    if spec.coefficient is None:
        raise ScenarioError("holomorphic-poisson structure needs a coefficient")
    coeff = _poly(spec.coefficient, variables, "structure.coefficient")
    pi = holomorphic_wedge_bivector(chart, coeff, pair=tuple(spec.pair))
    return gcs_from_holomorphic_poisson(chart, j, pi, verify=True), (j, pi)


def _run_check_gcs(scenario: Scenario, chart: CourantChart) -> Report:
    if scenario.structure is None:
        raise ScenarioError("check-gcs needs a structure block")
    J, built = _build_structure(scenario.structure, chart)
    report = Report(task="check-gcs")
    report.extend(check_gcs(J).checks)
    if scenario.structure.kind == "symplectic":
        report.add(closedness_record(chart, built))
    elif scenario.structure.kind == "holomorphic-poisson":
        j, pi = built
        report.extend(maurer_cartan_check(chart, j, pi).checks)
        report.extend(hamiltonian_invertibility(chart, j, pi_mat=pi).checks)
    return report


def _build_family(spec: FamilySpec, chart: CourantChart, times) -> GcsFamily:
    ext = extended_variables(chart)
    if spec.kind == "symplectic-dense":
        omega = _poly_matrix(spec.omega, ext, "family.omega")
        return dense_symplectic_family(chart, omega, times)
    if spec.kind == "dense":
        matrix = _poly_matrix(spec.matrix, ext, "family.matrix")
        return GcsFamily.from_dense(chart, matrix, times)
    if spec.samples is None:
        raise ScenarioError(f"family kind {spec.kind!r} needs samples")
    if spec.kind == "symplectic-sampled":
        samples = []
        for s in spec.samples:
            omega = _poly_matrix(s.omega, chart.variables, "sample.omega")
            dot = (
                _poly_matrix(s.omega_dot, chart.variables, "sample.omega_dot")
                if s.omega_dot is not None
                else None
            )
            samples.append((_fraction(s.t, "sample.t"), omega, dot))
        return sampled_symplectic_family(chart, samples)
    j = (
        _poly_matrix(spec.j, chart.variables, "family.j")
        if spec.j is not None
        else standard_complex_structure(chart)
    )
    samples = []
    for s in spec.samples:
        if s.coefficient is None:
            raise ScenarioError("hamiltonian sample needs a coefficient")
        pi = holomorphic_wedge_bivector(
            chart,
            _poly(s.coefficient, chart.variables, "sample.coefficient"),
            pair=tuple(spec.pair),
        )
        dot = None
        if s.coefficient_dot is not None:
            dot = holomorphic_wedge_bivector(
                chart,
                _poly(s.coefficient_dot, chart.variables, "sample.coefficient_dot"),
                pair=tuple(spec.pair),
            )
        samples.append((_fraction(s.t, "sample.t"), pi, dot))
    return sampled_hamiltonian_family(chart, j, samples, verify=True)


def _build_generator(
    spec: GeneratorSpec, family_spec: FamilySpec, chart: CourantChart, times
) -> SectionFamily:
    ext = extended_variables(chart)
    if spec.kind == "sections":
        if spec.coeffs is None:
            raise ScenarioError("sections generator needs coeffs")
        coeffs = [_poly(c, ext, f"generator.coeffs[{k}]") for k, c in enumerate(spec.coeffs)]
        return SectionFamily.from_dense(chart, coeffs, times)
    if spec.kind == "holomorphic-tangent":
        if spec.components is None:
            raise ScenarioError("holomorphic-tangent generator needs components")
        comps = [
            _poly(c, ext, f"generator.components[{k}]")
            for k, c in enumerate(spec.components)
        ]
        return hamiltonian_z_family(chart, comps, times)
    # symplectic-primitive: invert the family's dense form on the covector
    if spec.xi is None:
        raise ScenarioError("symplectic-primitive generator needs xi")
    if family_spec.kind != "symplectic-dense":
        raise ScenarioError(
            "symplectic-primitive generator needs a symplectic-dense family"
        )
    omega = _poly_matrix(family_spec.omega, ext, "family.omega")
    xi = [_poly(c, ext, f"generator.xi[{k}]") for k, c in enumerate(spec.xi)]
    return symplectic_z_family(chart, omega, xi, times)


def _run_moser(scenario: Scenario, chart: CourantChart) -> Report:
    if scenario.family is None or scenario.generator is None:
        raise ScenarioError("moser needs family and generator blocks")
    numeric = scenario.numeric
    times = _times(numeric)
    family = _build_family(scenario.family, chart, times)
    z_family = _build_generator(scenario.generator, scenario.family, chart, times)
    grid = default_grid(
        chart,
        per_axis=numeric.grid.per_axis,
        bound=numeric.grid.bound,
        extra_random=numeric.grid.extra,
        seed=numeric.seed,
    )
    return moser_pipeline(
        family,
        z_family,
        steps=numeric.steps,
        identification_tol=numeric.tol,
        checkpoints=_checkpoints(numeric, times),
        grid=grid,
        fd_tolerance=numeric.fd_tolerance,
        escape_radius=numeric.escape_radius,
    )


def _run_dw(scenario: Scenario, chart: CourantChart) -> Report:
    if scenario.omega is None:
        raise ScenarioError("dw needs an omega matrix")
    numeric = scenario.numeric
    omega = _poly_matrix(scenario.omega, chart.variables, "omega")
    times = _times(numeric)
    grid = default_grid(
        chart,
        per_axis=numeric.grid.per_axis,
        bound=numeric.grid.bound,
        extra_random=numeric.grid.extra,
        seed=numeric.seed,
    )
    return dw_pipeline(
        chart,
        omega,
        times=times,
        steps=numeric.steps,
        identification_tol=numeric.tol,
        pullback_tol=numeric.pullback_tol or numeric.tol,
        grid=grid,
        escape_radius=numeric.escape_radius,
    )


_RUNNERS = {
    "axioms": _run_axioms,
    "check-gcs": _run_check_gcs,
    "moser": _run_moser,
    "dw": _run_dw,
    "dw-run": _run_dw,
}


def run_scenario(scenario: Scenario) -> Report:
    """Execute a validated scenario and stamp the report."""
    chart = build_chart(scenario.chart)
    try:
        report = _RUNNERS[scenario.task](scenario, chart)
    except ScenarioError:
        raise
    except (ValueError, ArithmeticError) as err:
        raise ScenarioError(f"scenario is inconsistent: {err}") from err
    report.version = __version__
    report.scenario_hash = scenario_hash(scenario)
    report.seed = scenario.numeric.seed
    if scenario.description:
        report.meta["description"] = scenario.description
    return report
