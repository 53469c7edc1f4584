"""Pass/fail reports for the design-parameter inequalities."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Condition:
    """Inequality ``lhs < rhs``; the margin is ``rhs - lhs``."""

    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs < self.rhs

    def as_dict(self) -> dict:
        return {
            "condition": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ValidationReport:
    conditions: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, i) -> Condition:
        return self.conditions[i]

    def format(self) -> str:
        lines = []
        for c in self.conditions:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status}  {c.name:<32s} {c.lhs:.6g} < {c.rhs:.6g}  (margin {c.margin:+.6g})")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "conditions": [c.as_dict() for c in self.conditions]}
