"""Inequality reports shared by every check in the package."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Status(str, Enum):
    ASSERTED_PASS = "asserted_pass"
    ASSERTED_FAIL = "asserted_fail"
    REPORT_ONLY = "report_only"
    NOT_APPLICABLE = "not_applicable"


@dataclass
class InequalityReport:
    """Outcome of testing one inequality on many inputs.

    ``worst_ratio`` is the largest observed lhs/rhs-style ratio and
    ``witness`` the (serializable) input that attains it.  Checks backed by a
    theorem get an ``asserted_*`` status, conjecture probes ``report_only``.
    """

    name: str
    constant: float
    worst_ratio: float
    witness: dict[str, Any] = field(default_factory=dict)
    trials: int = 0
    status: Status = Status.REPORT_ONLY
    notes: str = ""
    table: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status is not Status.ASSERTED_FAIL

    @classmethod
    def asserted(cls, name, constant, worst_ratio, ok, **kw) -> "InequalityReport":
        status = Status.ASSERTED_PASS if ok else Status.ASSERTED_FAIL
        return cls(name, constant, worst_ratio, status=status, **kw)

    def to_record(self) -> dict[str, Any]:
        rec = {
            "name": self.name,
            "constant": self.constant,
            "worst_ratio": self.worst_ratio,
            "trials": self.trials,
            "status": self.status.value,
            "witness": self.witness,
            "notes": self.notes,
        }
        if self.table:
            rec["table"] = self.table
        return rec
