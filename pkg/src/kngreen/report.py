"""Verification report containers shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class VerifyReport:
    """Outcome of a verification suite: named residuals against tolerances."""

    name: str
    passed: bool = True
    metrics: dict[str, float] = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def record(self, key: str, value: float, tolerance: float | None = None) -> None:
        self.metrics[key] = float(value)
        if tolerance is not None and not (value <= tolerance):
            self.passed = False

    def require(self, key: str, ok: bool) -> None:
        self.details[key] = bool(ok)
        if not ok:
            self.passed = False
