"""Resource limits shared across the pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass


@dataclass
class Limits:
    timeout_s: float = 30.0
    chase_depth: int = 3
    max_nodes: int = 1_000_000
    max_steps: int = 2_000_000
    oracle_space_cap: int = 65536  # largest tuple space a summation may enumerate


class BudgetError(Exception):
    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        super().__init__(f"{kind}: {detail}" if detail else kind)


class Budget:
    """Step counter plus wall-clock deadline; raises BudgetError when spent."""

    def __init__(self, limits: Limits | None = None):
        self.limits = limits or Limits()
        self.steps = 0
        self._deadline = (time.monotonic() + self.limits.timeout_s
                          if self.limits.timeout_s > 0 else None)

    def step(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.limits.max_steps:
            raise BudgetError("steps", f"exceeded {self.limits.max_steps} rewrite steps")
        if self._deadline is not None:
            self.check_time()

    def check_time(self) -> None:
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise BudgetError("timeout", f"exceeded {self.limits.timeout_s}s")

    def check_nodes(self, n: int) -> None:
        if n > self.limits.max_nodes:
            raise BudgetError("nodes", f"expression grew past {self.limits.max_nodes} nodes")
