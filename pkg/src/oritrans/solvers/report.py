from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any


class BudgetExceeded(RuntimeError):
    """A search would exceed its configured budget; never truncated silently."""


@dataclass
class SolveReport:
    best: Any
    value: float
    counts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def worker_count() -> int:
    """Worker cap from ORITRANS_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("ORITRANS_THREADS", "1")))
    except ValueError:
        return 1
