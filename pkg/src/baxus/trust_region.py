"""Trust-region state machine.

A lengthscale-shaped box around the incumbent shrinks after ``tau_fail``
consecutive failures, doubles after ``tau_success`` consecutive improvements,
and terminates once its base side length falls below ``LENGTH_MIN``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .surrogate import GPHyperparameters

__all__ = [
    "LENGTH_INIT",
    "LENGTH_MIN",
    "LENGTH_MAX",
    "TAU_SUCCESS",
    "TrustRegionState",
    "tr_box",
    "record_result",
    "improvement_threshold",
]

LENGTH_INIT = 0.8
LENGTH_MIN = 2.0**-7
LENGTH_MAX = 1.6
TAU_SUCCESS = 3


@dataclass
class TrustRegionState:
    """Mutable, single-owner trust-region bookkeeping."""

    tau_fail: int
    incumbent_point: np.ndarray
    incumbent_value: float
    tau_success: int = TAU_SUCCESS
    base_length: float = LENGTH_INIT
    length_init: float = LENGTH_INIT
    length_min: float = LENGTH_MIN
    length_max: float = LENGTH_MAX
    success_count: int = 0
    failure_count: int = 0
    terminated: bool = field(default=False)

    def __post_init__(self):
        if self.tau_fail < 1 or self.tau_success < 1:
            raise ValueError("tolerances must be >= 1")
        if not self.length_min <= self.base_length <= self.length_max:
            raise ValueError("need length_min <= base_length <= length_max")
        self.incumbent_point = np.asarray(self.incumbent_point, dtype=float)

    def update_incumbent(self, point: np.ndarray, value: float) -> None:
        if value < self.incumbent_value:
            self.incumbent_point = np.asarray(point, dtype=float).copy()
            self.incumbent_value = float(value)


def improvement_threshold(incumbent_value: float) -> float:
    """Margin by which a value must undercut the incumbent to count as
    progress: relative 1e-3 with an absolute floor of 1e-8."""
    return max(1e-3 * abs(incumbent_value), 1e-8)


def tr_box(state: TrustRegionState, hyper: GPHyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box around the incumbent, sides proportional to the kernel
    lengthscales (normalized by their geometric mean so the volume depends on
    the base length only), intersected with [-1, 1]^d."""
    if state.terminated:
        raise RuntimeError("trust region is terminated")
    lam = hyper.lengthscales
    weights = lam / np.exp(np.mean(np.log(lam)))
    half = 0.5 * state.base_length * weights
    center = state.incumbent_point
    if center.shape != lam.shape:
        raise ValueError(
            f"incumbent has dimension {center.shape}, lengthscales {lam.shape}"
        )
    lower = np.clip(center - half, -1.0, 1.0)
    upper = np.clip(center + half, -1.0, 1.0)
    return lower, upper


def record_result(state: TrustRegionState, improved: bool) -> str:
    """Update counters after one evaluation.

    Returns one of ``"none"``, ``"expanded"``, ``"shrunk"``, ``"terminated"``.
    Improvements and failures reset each other's counter; hitting
    ``tau_success`` doubles the base length (capped), hitting ``tau_fail``
    halves it, and a halving below the minimum terminates the region.
    """
    if state.terminated:
        raise RuntimeError("trust region is terminated")
    if improved:
        state.success_count += 1
        state.failure_count = 0
        if state.success_count >= state.tau_success:
            state.base_length = min(2.0 * state.base_length, state.length_max)
            state.success_count = 0
            return "expanded"
        return "none"
    state.failure_count += 1
    state.success_count = 0
    if state.failure_count >= state.tau_fail:
        state.base_length = 0.5 * state.base_length
        state.failure_count = 0
        if state.base_length < state.length_min:
            state.terminated = True
            return "terminated"
        return "shrunk"
    return "none"
