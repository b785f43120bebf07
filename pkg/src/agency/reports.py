"""Shared report containers for verification and audit operations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def jsonable(value):
    """Convert numpy scalars/arrays and containers into plain python values."""
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, frozenset):
        return sorted(value)
    if hasattr(value, "to_jsonable"):
        return value.to_jsonable()
    return value


@dataclass
class CheckReport:
    """Outcome of one verification clause.

    residual is the worst numeric slack observed (0.0 for clean passes) and
    witness, when present, pins down the offending sample or allocation.
    """

    name: str
    passed: bool
    residual: float = 0.0
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        out = {
            "name": self.name,
            "passed": bool(self.passed),
            "residual": float(self.residual),
        }
        if self.witness is not None:
            out["witness"] = jsonable(self.witness)
        if self.details:
            out["details"] = jsonable(self.details)
        return out

    def __bool__(self) -> bool:
        return bool(self.passed)
