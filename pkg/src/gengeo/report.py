"""Check records and reports shared by all verification stages.

Reports are deterministic: given the same inputs and seed the JSON emission is
byte-identical (fixed key order, no timestamps).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CheckRecord:
    """One verification step.

    kind "exact" records a residual term count (0 on pass); kind "numeric"
    records a float residual against a tolerance.
    """

    name: str
    kind: str  # "exact" | "numeric"
    passed: bool
    residual: Optional[float] = None
    residual_terms: Optional[int] = None
    tolerance: Optional[float] = None
    detail: Optional[str] = None
    location: Optional[dict] = None

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "kind": self.kind,
            "status": "PASS" if self.passed else "FAIL",
        }
        if self.kind == "numeric":
            out["residual"] = self.residual
            out["tolerance"] = self.tolerance
        else:
            out["residual_terms"] = 0 if self.passed else self.residual_terms
        if self.detail:
            out["detail"] = self.detail
        if self.location:
            out["location"] = self.location
        return out


def exact_record(name: str, residual_terms: int, detail: str = None, location: dict = None) -> CheckRecord:
    return CheckRecord(
        name=name,
        kind="exact",
        passed=residual_terms == 0,
        residual_terms=residual_terms,
        detail=detail,
        location=location,
    )


def numeric_record(name: str, residual: float, tolerance: float, detail: str = None, location: dict = None) -> CheckRecord:
    return CheckRecord(
        name=name,
        kind="numeric",
        passed=residual <= tolerance,
        residual=float(residual),
        tolerance=float(tolerance),
        detail=detail,
        location=location,
    )


@dataclass
class Report:
    """Ordered collection of check records for one task run."""

    task: str
    checks: list = field(default_factory=list)
    version: str = ""
    scenario_hash: Optional[str] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.checks.append(record)
        return record

    def extend(self, records) -> None:
        for r in records:
            self.add(r)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        out = {
            "task": self.task,
            "status": "PASS" if self.passed else "FAIL",
            "checks": [c.as_dict() for c in self.checks],
            "version": self.version,
        }
        if self.scenario_hash is not None:
            out["scenario_hash"] = self.scenario_hash
        if self.seed is not None:
            out["seed"] = self.seed
        if self.meta:
            out["meta"] = self.meta
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=False)

    def to_text(self) -> str:
        lines = [f"task: {self.task}"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            if c.kind == "numeric":
                extra = f"residual={c.residual:.3e} tol={c.tolerance:.1e}"
            else:
                extra = f"residual_terms={0 if c.passed else c.residual_terms}"
            detail = f"  [{c.detail}]" if c.detail else ""
            lines.append(f"{status:4}  {c.name}  ({c.kind}, {extra}){detail}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)
