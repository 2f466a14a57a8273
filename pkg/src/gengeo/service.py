"""HTTP service exposing scenario execution.

Endpoints: ``GET /health`` for liveness, ``GET /examples`` and
``GET /examples/{name}`` for the bundled scenario documents, and
``POST /run`` to execute either an inline scenario or a bundled example
(with optional numeric overrides) and return the report.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from . import __version__
from .scenario import (
    Scenario,
    ScenarioError,
    apply_overrides,
    example_names,
    load_example,
    load_scenario,
    run_scenario,
)

app = FastAPI(
    title="gengeo",
    version=__version__,
    description="Exact checks and flow identification for generalized "
    "complex structures on polynomial charts.",
)


class HealthResponse(BaseModel):
    status: str
    version: str


class ExampleSummary(BaseModel):
    name: str
    task: str
    description: str


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Optional[Dict] = None
    example: Optional[str] = None
    steps: Optional[int] = None
    tol: Optional[float] = None
    seed: Optional[int] = None


class RunResponse(BaseModel):
    passed: bool
    report: Dict


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/examples", response_model=List[ExampleSummary])
def examples() -> List[ExampleSummary]:
    out = []
    for name in example_names():
        scenario = load_example(name)
        out.append(
            ExampleSummary(
                name=name, task=scenario.task, description=scenario.description
            )
        )
    return out


@app.get("/examples/{name}")
def example(name: str) -> Dict:
    try:
        return load_example(name).model_dump()
    except ScenarioError as err:
        raise HTTPException(status_code=404, detail=str(err)) from err


@app.post("/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    if (request.scenario is None) == (request.example is None):
        raise HTTPException(
            status_code=422, detail="provide exactly one of scenario or example"
        )
    try:
        if request.example is not None:
            scenario: Scenario = load_example(request.example)
        else:
            scenario = load_scenario(request.scenario)
        scenario = apply_overrides(
            scenario, steps=request.steps, tol=request.tol, seed=request.seed
        )
        report = run_scenario(scenario)
    except ScenarioError as err:
        raise HTTPException(status_code=422, detail=str(err)) from err
    return RunResponse(passed=report.passed, report=report.as_dict())
