"""Verdicts and property reports produced by the verifier and the stage search."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


EXIT_CODES = {Verdict.PASS: 0, Verdict.FAIL: 1, Verdict.INCONCLUSIVE: 2}
EXIT_ERROR = 3


def combine(verdicts) -> Verdict:
    """FAIL dominates INCONCLUSIVE, which dominates PASS."""
    verdicts = list(verdicts)
    if Verdict.FAIL in verdicts:
        return Verdict.FAIL
    if Verdict.INCONCLUSIVE in verdicts:
        return Verdict.INCONCLUSIVE
    return Verdict.PASS


def to_plain(value: Any) -> Any:
    """Coerce numpy scalars, tuples and nested containers into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if hasattr(value, "item") and callable(value.item):
        return value.item()
    return value


@dataclass
class PropertyReport:
    """Outcome of one property check at one stage.

    `measured` and `thresholds` share keys where a quantity is compared against a
    bound; `sampling` records grids, seeds and sample counts so the check can be
    replayed.
    """

    property_id: str
    verdict: Verdict
    stage: int
    measured: Dict[str, Any] = field(default_factory=dict)
    thresholds: Dict[str, Any] = field(default_factory=dict)
    counterexample: Optional[Dict[str, Any]] = None
    sampling: Dict[str, Any] = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_json(self) -> Dict[str, Any]:
        return to_plain(
            {
                "id": self.property_id,
                "verdict": self.verdict,
                "stage": self.stage,
                "measured": self.measured,
                "thresholds": self.thresholds,
                "counterexample": self.counterexample,
                "sampling": self.sampling,
                "message": self.message,
            }
        )

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "PropertyReport":
        return cls(
            property_id=doc["id"],
            verdict=Verdict(doc["verdict"]),
            stage=int(doc["stage"]),
            measured=dict(doc.get("measured", {})),
            thresholds=dict(doc.get("thresholds", {})),
            counterexample=doc.get("counterexample"),
            sampling=dict(doc.get("sampling", {})),
            message=doc.get("message", ""),
        )


@dataclass
class VerificationReport:
    stage: int
    reports: List[PropertyReport] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        return combine(r.verdict for r in self.reports)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def get(self, property_id: str) -> Optional[PropertyReport]:
        for report in self.reports:
            if report.property_id == property_id:
                return report
        return None

    def add(self, report: PropertyReport) -> None:
        self.reports.append(report)

    def to_json(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "verdict": self.verdict.value,
            "properties": [r.to_json() for r in self.reports],
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "VerificationReport":
        return cls(int(doc["stage"]), [PropertyReport.from_json(p) for p in doc.get("properties", [])])
