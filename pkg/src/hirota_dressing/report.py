from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ResidualReport:
    """Outcome of one numerical check. ``passed`` is ``max_residual < tolerance``."""

    name: str
    max_residual: float
    mean_residual: float
    tolerance: float
    samples: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    expect_fail: bool = False

    @property
    def passed(self) -> bool:
        return bool(self.max_residual < self.tolerance)

    @classmethod
    def from_residuals(cls, name, residuals, tolerance, samples=(), **kw):
        res = [float(r) for r in residuals]
        if not res:
            return cls(name, 0.0, 0.0, tolerance, list(samples), **kw)
        mx = max(res) if not any(math.isnan(r) for r in res) else math.nan
        return cls(name, mx, sum(res) / len(res), tolerance, list(samples), **kw)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.name}: max={self.max_residual:.3e} "
                f"mean={self.mean_residual:.3e} tol={self.tolerance:.1e}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_residual": _num(self.max_residual),
            "mean_residual": _num(self.mean_residual),
            "tolerance": self.tolerance,
            "samples": [str(s) for s in self.samples],
            "warnings": list(self.warnings),
            "details": self.details,
        }


def _num(x: float):
    return x if math.isfinite(x) else repr(x)
