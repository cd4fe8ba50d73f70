"""Structured records of inequality checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"
PRECONDITION = "precondition"


class PreconditionError(ValueError):
    """A check's hypothesis does not hold for the given instance.

    ``minimal`` carries the smallest admissible value of the offending
    parameter when one can be named (for instance the smallest ``N``).
    """

    def __init__(self, message, minimal=None):
        super().__init__(message)
        self.minimal = minimal


def clean(x: Any) -> Any:
    """Convert numpy scalars and non-finite floats into JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def ratio_slack(lhs: float, rhs: float) -> float:
    """``rhs / lhs``; at least 1 means the inequality holds."""
    if lhs <= 0:
        return math.inf
    return rhs / lhs


@dataclass
class VerificationReport:
    """Outcome of one inequality check on one instance.

    ``lhs`` and ``rhs`` are the two sides at the worst case found, ``slack``
    is ``rhs / lhs`` and ``extracted_constant`` is the smallest constant
    that makes the inequality hold when the statement leaves it unspecified.
    """

    check_id: str
    paper_eq: str
    instance: dict
    lhs: float
    rhs: float
    slack: float
    extracted_constant: float | None
    passed: bool
    seed: int | None = None
    status: str = PASS
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == PASS and not self.passed:
            self.status = FAIL

    def to_dict(self) -> dict:
        return clean({
            "check_id": self.check_id,
            "paper_eq": self.paper_eq,
            "instance": self.instance,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "extracted_constant": self.extracted_constant,
            "pass": self.passed,
            "seed": self.seed,
            "status": self.status,
            "detail": self.detail,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def inequality_report(check_id, label, instance, lhs, rhs, *, extracted=None, seed=None,
                      detail=None, rtol=1e-10) -> VerificationReport:
    """Report for ``lhs <= rhs`` with a relative floating-point allowance."""
    ok = bool(lhs <= rhs * (1 + rtol) + 1e-300)
    return VerificationReport(check_id, label, instance, float(lhs), float(rhs),
                              ratio_slack(lhs, rhs), extracted, ok, seed,
                              PASS if ok else FAIL, detail or {})


def skipped_report(check_id, label, instance, reason, *, status=SKIPPED, seed=None,
                   minimal=None) -> VerificationReport:
    detail = {"reason": reason}
    if minimal is not None:
        detail["minimal"] = minimal
    return VerificationReport(check_id, label, instance, math.nan, math.nan, math.nan,
                              None, status == SKIPPED, seed, status, detail)
