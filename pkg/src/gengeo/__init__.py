"""Exact checks and Moser-type flow identification for generalized complex
structures on polynomial charts.

The package verifies bracket axioms and integrability symbolically over
Gaussian-rational coefficients, then certifies deformation families by
constructing the compensating flow numerically and measuring how well it
identifies the deformed structure with the initial one.
"""

__version__ = "0.1.0"

from .courant import (
    CourantChart,
    Section,
    check_axioms,
    check_dorfman_properties,
    double_of_lie_algebroid,
    standard_chart,
)
from .darboux import dw_pipeline
from .fields import ScalarField, parse_polynomial
from .gcs import (
    check_gcs,
    gcs_from_complex,
    gcs_from_holomorphic_poisson,
    gcs_from_symplectic,
)
from .moser import GcsFamily, SectionFamily, integrate_flow, moser_pipeline
from .report import CheckRecord, Report
from .scenario import Scenario, ScenarioError, load_scenario, run_scenario

__all__ = [
    "__version__",
    "CourantChart",
    "Section",
    "check_axioms",
    "check_dorfman_properties",
    "double_of_lie_algebroid",
    "standard_chart",
    "dw_pipeline",
    "ScalarField",
    "parse_polynomial",
    "check_gcs",
    "gcs_from_complex",
    "gcs_from_holomorphic_poisson",
    "gcs_from_symplectic",
    "GcsFamily",
    "SectionFamily",
    "integrate_flow",
    "moser_pipeline",
    "CheckRecord",
    "Report",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "run_scenario",
]
