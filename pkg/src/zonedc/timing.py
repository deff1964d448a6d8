"""Motion timing model for tweezer-based atom transport.

All durations are microseconds, all distances micrometers. A single
transport move follows a symmetric jerk-limited profile: four equal
segments of constant jerk (+j, -j, -j, +j) with a constant-velocity
cruise inserted once the speed cap is reached. Trap transfers (picking
up or dropping a batch of atoms) take a fixed time each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:  # pragma: no cover
    from .routing import RearrangementStep

#: Half the storage trap pitch; nominal magnitude of the small offset move
#: inserted between pickup batches.
DEFAULT_OFFSET_DISTANCE = 2.0

#: One storage trap pitch; nominal travel of a single reorder shift in
#: relaxed routing.
DEFAULT_SHIFT_DISTANCE = 4.0


@dataclass(frozen=True)
class MotionParams:
    """Physical constants of the transport system.

    jerk is in um/us^3, v_max in um/us, transfer_time in us per pickup
    or drop of one batch. The defaults reproduce a 200 um hop in roughly
    0.28 ms.
    """

    jerk: float = 4.4e-4
    v_max: float = 1.1
    transfer_time: float = 15.0

    def __post_init__(self) -> None:
        if self.jerk <= 0 or self.v_max <= 0 or self.transfer_time <= 0:
            raise ValueError("motion constants must be positive")


DEFAULT_MOTION = MotionParams()


def move_time(distance: float, params: MotionParams = DEFAULT_MOTION) -> float:
    """Duration of a single move of the given Euclidean distance.

    Below the clamp distance the peak velocity j*t^2 stays under v_max and
    the profile is a pure S-curve: T = 4 * (d / (2 j))^(1/3). Beyond it,
    the ramps saturate at t = sqrt(v_max / j) and the remaining distance
    is covered at v_max. Continuous and strictly increasing in distance.
    """
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if distance == 0:
        return 0.0
    t_ramp = math.sqrt(params.v_max / params.jerk)
    d_ramp = 2.0 * params.jerk * t_ramp**3  # distance consumed by ramp-up plus ramp-down
    if distance <= d_ramp:
        return 4.0 * (distance / (2.0 * params.jerk)) ** (1.0 / 3.0)
    return 4.0 * t_ramp + (distance - d_ramp) / params.v_max


def step_time(
    step: "RearrangementStep",
    params: MotionParams = DEFAULT_MOTION,
    *,
    offset_distance: float = DEFAULT_OFFSET_DISTANCE,
    shift_distance: float = DEFAULT_SHIFT_DISTANCE,
) -> float:
    """Duration of one rearrangement step.

    Components: one transfer per pickup batch and per drop batch, one
    small offset move between consecutive pickup batches, the transit
    move at the longest per-atom distance, and one shift per row or
    column inversion resolved in relaxed mode.
    """
    if not step.moves:
        return 0.0
    n_pick = len(step.pickup_batches)
    n_drop = len(step.drop_batches)
    total = (n_pick + n_drop) * params.transfer_time
    total += max(0, n_pick - 1) * move_time(offset_distance, params)
    inversions = step.row_inversions + step.col_inversions
    total += inversions * move_time(shift_distance, params)
    total += move_time(max(m.distance for m in step.moves), params)
    return total


def total_time(
    steps: Iterable["RearrangementStep"],
    params: MotionParams = DEFAULT_MOTION,
    *,
    offset_distance: float = DEFAULT_OFFSET_DISTANCE,
    shift_distance: float = DEFAULT_SHIFT_DISTANCE,
) -> float:
    """Sum of step_time over a sequence of steps."""
    return sum(
        step_time(s, params, offset_distance=offset_distance, shift_distance=shift_distance)
        for s in steps
    )
