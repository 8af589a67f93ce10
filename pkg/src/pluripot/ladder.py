"""Shift ladders C_k = 2^k C_0 and the report they produce."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridFunction


@dataclass(frozen=True)
class LadderConfig:
    c0: float = 1.0
    k_max: int = 40
    eps: float = 1e-6
    floor_check: bool = False

    def __post_init__(self):
        if self.k_max < 4:
            raise ValueError("a ladder needs at least 4 rungs")
        if self.c0 <= 0 or self.eps <= 0:
            raise ValueError("c0 and eps must be positive")

    def shifts(self):
        return [self.c0 * 2.0**k for k in range(self.k_max)]


@dataclass
class ResidualReport:
    g: GridFunction
    converged: bool
    rungs: int
    gap: float
    gaps: list = field(default_factory=list)
    floor_stable: bool | None = None
    last_shift: float = 0.0

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "rungs": int(self.rungs),
            "gap": float(self.gap),
            "gaps": [float(x) for x in self.gaps],
            "floor_stable": self.floor_stable,
            "last_shift": float(self.last_shift),
        }


def run_ladder(step: Callable[[float, GridFunction | None], GridFunction], cfg: LadderConfig) -> ResidualReport:
    """Iterate ``step(C, previous)`` over the shifts until the sup-change is below eps."""
    prev = None
    gaps = []
    shift = 0.0
    for k, shift in enumerate(cfg.shifts()):
        cur = step(shift, prev)
        if prev is not None:
            ok = cur.mask
            gap = float(np.max(np.abs(cur.values - prev.values)[ok])) if np.any(ok) else 0.0
            gaps.append(gap)
            if gap < cfg.eps:
                return ResidualReport(cur, True, k + 1, gap, gaps, last_shift=shift)
        prev = cur
    return ResidualReport(prev, False, cfg.k_max, gaps[-1] if gaps else float("inf"), gaps, last_shift=shift)
