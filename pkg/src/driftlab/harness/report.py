"""Experiment reports with byte-stable JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

PASS = "pass"
FAIL = "fail"
HYPOTHESIS_VIOLATED = "hypothesis_violated"
EXIT_CODES = {PASS: 0, FAIL: 1, HYPOTHESIS_VIOLATED: 2}


def plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class Check:
    name: str
    value: float
    bound: float
    relation: str = "<="

    @property
    def passed(self) -> bool:
        if math.isnan(self.value) or math.isnan(self.bound):
            return False
        if self.relation == "<=":
            return self.value <= self.bound
        if self.relation == "<":
            return self.value < self.bound
        if self.relation == ">=":
            return self.value >= self.bound
        return self.value > self.bound

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "relation": self.relation,
                "bound": self.bound, "passed": self.passed}


@dataclass
class ExperimentReport:
    """Verdict of one experiment.

    ``tables`` hold plot data written next to the JSON by the CLI; they are
    not part of the serialized report.
    """

    name: str
    parameters: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    certificate: dict | None = None
    notes: list = field(default_factory=list)
    config: dict | None = None
    tables: dict = field(default_factory=dict, repr=False)
    forced_verdict: str | None = None

    def check(self, name: str, value, bound, relation: str = "<=") -> bool:
        c = Check(name, float(value), float(bound), relation)
        self.checks.append(c)
        return c.passed

    @property
    def verdict(self) -> str:
        if self.forced_verdict is not None:
            return self.forced_verdict
        return PASS if all(c.passed for c in self.checks) else FAIL

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def failed_checks(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def get_check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def add_table(self, name: str, columns, rows) -> None:
        self.tables[name] = (list(columns), np.asarray(rows, dtype=float))

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "verdict": self.verdict,
            "parameters": self.parameters,
            "tolerances": self.tolerances,
            "certificate": self.certificate,
            "measured": self.measured,
            "checks": [c.to_dict() for c in self.checks],
            "notes": self.notes,
        }
        if self.config is not None:
            out["config"] = self.config
        return plain(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def summary_row(self) -> list:
        failed = ";".join(self.failed_checks())
        return [self.name, self.verdict, len(self.checks),
                sum(c.passed for c in self.checks), failed]


def hypothesis_violated(name: str, parameters: dict, certificate: dict,
                        reason: str) -> ExperimentReport:
    rep = ExperimentReport(name, parameters=parameters, certificate=certificate,
                           forced_verdict=HYPOTHESIS_VIOLATED)
    rep.notes.append(reason)
    return rep
