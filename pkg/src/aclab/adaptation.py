"""Online consistency adaptation from inefficiency reports.

The adaptation owner collects reports per state and moves the applied level
one step at a time: TIGHTEN decrements toward level 0 (strictest, smallest
queue), RELAX increments toward the most relaxed level, both clamped to the
table. Two policies are provided: a windowed-mean threshold rule with an
explicit hold band, and a PID compensator whose raw output is compared
against the target value itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

TIGHTEN = "tighten"
RELAX = "relax"
HOLD = "hold"


@dataclass(frozen=True)
class ThresholdConfig:
    upper: float = 3.5
    lower: float = 1.5
    window: int = 5

    def __post_init__(self) -> None:
        if self.lower >= self.upper:
            raise ValueError("lower trigger must stay below the upper trigger")
        if self.window < 1:
            raise ValueError("window must be positive")


@dataclass(frozen=True)
class PidConfig:
    p_gain: float = 0.2
    i_gain: float = 0.2
    d_gain: float = 0.1
    target: float = 2.0
    window: int = 5

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValueError("differential term needs a window of at least 2")


def threshold_action(history: Sequence[float], cfg: ThresholdConfig) -> str:
    """Mean of the last W reports against the trigger band."""
    window = history[-cfg.window:]
    mean = sum(window) / len(window)
    if mean >= cfg.upper:
        return TIGHTEN
    if mean <= cfg.lower:
        return RELAX
    return HOLD


def pid_action(history: Sequence[float], cfg: PidConfig) -> str:
    """Proportional/integral/differential compensation of the latest reports."""
    if len(history) < 2:
        return HOLD
    latest, previous = history[-1], history[-2]
    window = history[-cfg.window:]
    p_term = cfg.p_gain * (cfg.target - latest)
    i_term = cfg.i_gain * sum(x - cfg.target for x in window)
    d_term = cfg.d_gain * ((latest - cfg.target) - (previous - cfg.target))
    total = p_term + i_term + d_term
    if total > cfg.target:
        return TIGHTEN
    if total < cfg.target:
        return RELAX
    return HOLD


class Oca:
    """Centralized adaptation state: report histories and applied levels."""

    def __init__(self, policy: str, states: Sequence[str], levels: int,
                 initial_level: int,
                 threshold_cfg: ThresholdConfig | None = None,
                 pid_cfg: PidConfig | None = None):
        if policy not in ("threshold", "pid", "fixed"):
            raise ValueError(f"unknown adaptation policy {policy!r}")
        self.policy = policy
        self.threshold_cfg = threshold_cfg or ThresholdConfig()
        self.pid_cfg = pid_cfg or PidConfig()
        self.levels = levels
        self.history: dict[str, list[float]] = {s: [] for s in states}
        self.level: dict[str, int] = {s: initial_level for s in states}

    def report(self, state: str, phi: float) -> tuple[str, int, int]:
        """Fold one report in; returns (action, old level, new level)."""
        hist = self.history[state]
        hist.append(phi)
        if self.policy == "threshold":
            action = threshold_action(hist, self.threshold_cfg)
        elif self.policy == "pid":
            action = pid_action(hist, self.pid_cfg)
        else:
            action = HOLD
        old = self.level[state]
        new = old
        if action == TIGHTEN:
            new = max(0, old - 1)
        elif action == RELAX:
            new = min(self.levels - 1, old + 1)
        self.level[state] = new
        return action, old, new
