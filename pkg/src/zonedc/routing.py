"""Grouping of atom moves into parallel rearrangement steps.

A step picks up a set of atoms, carries them in one transit, and drops
them. All moves of a step share the transport grid, so they must agree
on a consistent mapping of source rows to destination rows and source
columns to destination columns:

* the row map and the column map are functions (no split) and injective
  (no merge) in both modes;
* strict mode additionally keeps both maps order-preserving (activated
  lines never cross);
* relaxed mode may permute rows (they are reordered while picking up
  row by row) and columns (reordered while dropping off column by
  column), paying one small shift per inversion;
* activated lines keep a minimal separation at the pickup and drop
  configurations.

Two narrowing rules keep the emitted pickup sequence free of stray trap
captures by construction: no two moves of a group share a source
column, and a group never mixes transport directions (the grouping key,
by default the vertical direction of travel, must agree).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

from .arch import Position
from . import timing
from .timing import MotionParams

#: Minimal distance between two simultaneously activated rows or columns,
#: one trap pitch of the finest grid on the default machine.
DEFAULT_MIN_SEPARATION = 2.0

Mode = str  # "strict" | "relaxed"


@dataclass(frozen=True)
class Move:
    """One atom transport from src to dst."""

    qubit: int
    src: Position
    dst: Position

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError(f"move of qubit {self.qubit} has identical src and dst")
        if not all(map(math.isfinite, (self.src.x, self.src.y, self.dst.x, self.dst.y))):
            raise ValueError("move coordinates must be finite")

    @property
    def distance(self) -> float:
        return self.src.distance(self.dst)


def direction_key(move: Move) -> Hashable:
    """Default grouping key: vertical direction of travel."""
    dy = move.dst.y - move.src.y
    return (dy > 0) - (dy < 0)


class GroupBuilder:
    """Incremental compatibility state of one move group."""

    __slots__ = ("moves", "key", "row_pairs", "col_pairs", "dst_rows", "dst_cols", "max_distance")

    def __init__(self, key: Hashable):
        self.moves: list[Move] = []
        self.key = key
        self.row_pairs: list[tuple[float, float]] = []  # (src_y, dst_y) sorted by src_y
        self.col_pairs: list[tuple[float, float]] = []  # (src_x, dst_x) sorted by src_x
        self.dst_rows: list[float] = []
        self.dst_cols: list[float] = []
        self.max_distance = 0.0

    def can_add(self, move: Move, mode: Mode, min_separation: float, key: Hashable) -> bool:
        if self.moves and key != self.key:
            return False
        sx, sy = move.src.x, move.src.y
        dx, dy = move.dst.x, move.dst.y

        # Columns: sources and destinations must all be distinct.
        i = bisect.bisect_left(self.col_pairs, (sx, -math.inf))
        if i < len(self.col_pairs) and self.col_pairs[i][0] == sx:
            return False
        if not _separated_and_ordered(
            self.col_pairs, i, sx, dx, min_separation, ordered=(mode == "strict")
        ):
            return False
        j = bisect.bisect_left(self.dst_cols, dx)
        if not _clear_of_neighbors(self.dst_cols, j, dx, min_separation):
            return False

        # Rows: same source row must map to the same destination row.
        i = bisect.bisect_left(self.row_pairs, (sy, -math.inf))
        if i < len(self.row_pairs) and self.row_pairs[i][0] == sy:
            return self.row_pairs[i][1] == dy
        if not _separated_and_ordered(
            self.row_pairs, i, sy, dy, min_separation, ordered=(mode == "strict")
        ):
            return False
        j = bisect.bisect_left(self.dst_rows, dy)
        return _clear_of_neighbors(self.dst_rows, j, dy, min_separation)

    def add(self, move: Move, key: Hashable) -> None:
        if not self.moves:
            self.key = key
        self.moves.append(move)
        sx, sy = move.src.x, move.src.y
        dx, dy = move.dst.x, move.dst.y
        bisect.insort(self.col_pairs, (sx, dx))
        bisect.insort(self.dst_cols, dx)
        i = bisect.bisect_left(self.row_pairs, (sy, -math.inf))
        if not (i < len(self.row_pairs) and self.row_pairs[i][0] == sy):
            self.row_pairs.insert(i, (sy, dy))
            bisect.insort(self.dst_rows, dy)
        self.max_distance = max(self.max_distance, move.distance)

    @property
    def num_rows(self) -> int:
        return len(self.row_pairs)


def _separated_and_ordered(
    pairs: list[tuple[float, float]],
    insert_at: int,
    src: float,
    dst: float,
    min_separation: float,
    *,
    ordered: bool,
) -> bool:
    """Check a new (src, dst) line against its sorted neighbors.

    Verifies the source separation, destination injectivity, and in
    strict mode that the destination keeps the source order. Existing
    pairs are internally consistent, so neighbor checks suffice for the
    order; injectivity of dst against non-neighbors is checked by the
    caller through the sorted dst list.
    """
    if insert_at > 0:
        prev_src, prev_dst = pairs[insert_at - 1]
        if src - prev_src < min_separation:
            return False
        if ordered and dst <= prev_dst:
            return False
    if insert_at < len(pairs):
        next_src, next_dst = pairs[insert_at]
        if next_src - src < min_separation:
            return False
        if ordered and dst >= next_dst:
            return False
    return True


def _clear_of_neighbors(values: list[float], insert_at: int, value: float, min_separation: float) -> bool:
    if insert_at > 0 and value - values[insert_at - 1] < min_separation:
        return False
    if insert_at < len(values) and values[insert_at] - value < min_separation:
        return False
    return True


def compatible(
    group: Iterable[Move],
    move: Move,
    mode: Mode,
    *,
    min_separation: float = DEFAULT_MIN_SEPARATION,
    key: Callable[[Move], Hashable] = direction_key,
) -> bool:
    """Whether group + move still forms one valid rearrangement step.

    The group itself must already be internally compatible under the
    given mode.
    """
    if mode not in ("strict", "relaxed"):
        raise ValueError(f"unknown routing mode {mode!r}")
    builder: GroupBuilder | None = None
    for m in group:
        if builder is None:
            builder = GroupBuilder(key(m))
        builder.add(m, key(m))
    if builder is None:
        builder = GroupBuilder(key(move))
    return builder.can_add(move, mode, min_separation, key(move))


@dataclass(frozen=True)
class RearrangementStep:
    """One pickup/transit/drop cycle of parallel moves.

    pickup_batches group the moves by source row in pickup order (by
    ascending destination row, which equals ascending source row for
    order-preserving steps). drop_batches group them by simultaneous
    drop: order-preserving column sets drop in one batch, reordered ones
    drop highest destination first with shifts in between.
    """

    moves: tuple[Move, ...]
    mode: Mode
    pickup_batches: tuple[tuple[Move, ...], ...]
    drop_batches: tuple[tuple[Move, ...], ...]
    row_inversions: int
    col_inversions: int

    def duration(
        self,
        motion: MotionParams,
        *,
        offset_distance: float = timing.DEFAULT_OFFSET_DISTANCE,
        shift_distance: float = timing.DEFAULT_SHIFT_DISTANCE,
    ) -> float:
        return timing.step_time(
            self, motion, offset_distance=offset_distance, shift_distance=shift_distance
        )


@dataclass(frozen=True)
class RoutingResult:
    """All steps of one transition plus their estimated duration."""

    steps: tuple[RearrangementStep, ...]
    total_time: float
    mode: Mode  # requested mode ("strict", "relaxed", or "auto")


def _count_inversions(values: Sequence[float]) -> int:
    count = 0
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if values[i] > values[j]:
                count += 1
    return count


def make_step(moves: Sequence[Move]) -> RearrangementStep:
    """Freeze one internally compatible group into a step.

    The recorded mode reflects what the group needs: strict when both
    maps are order-preserving, relaxed otherwise.
    """
    row_map: dict[float, float] = {}
    for m in moves:
        row_map.setdefault(m.src.y, m.dst.y)
    src_rows = sorted(row_map)
    dst_by_src_order = [row_map[y] for y in src_rows]
    row_inversions = _count_inversions(dst_by_src_order)

    col_pairs = sorted((m.src.x, m.dst.x) for m in moves)
    dst_cols_by_src_order = [dx for _, dx in col_pairs]
    col_inversions = _count_inversions(dst_cols_by_src_order)

    # Pickup: row by row, ordered by destination row.
    by_row: dict[float, list[Move]] = {}
    for m in moves:
        by_row.setdefault(m.src.y, []).append(m)
    pickup_rows = sorted(by_row, key=lambda y: (row_map[y], y))
    pickup_batches = tuple(
        tuple(sorted(by_row[y], key=lambda m: m.src.x)) for y in pickup_rows
    )

    # Drops: pop the highest remaining destination column while the
    # remainder is out of order, then drop the rest together.
    remaining = sorted(moves, key=lambda m: m.src.x)
    drop_batches: list[tuple[Move, ...]] = []
    while remaining:
        dst_order = [m.dst.x for m in remaining]
        if all(a < b for a, b in zip(dst_order, dst_order[1:])):
            drop_batches.append(tuple(sorted(remaining, key=lambda m: m.dst.x)))
            break
        top = max(remaining, key=lambda m: m.dst.x)
        drop_batches.append((top,))
        remaining.remove(top)

    mode: Mode = "strict" if row_inversions == 0 and col_inversions == 0 else "relaxed"
    return RearrangementStep(
        moves=tuple(moves),
        mode=mode,
        pickup_batches=pickup_batches,
        drop_batches=tuple(drop_batches),
        row_inversions=row_inversions,
        col_inversions=col_inversions,
    )


def group_moves(
    moves: Sequence[Move],
    mode: Mode,
    order_hint: Sequence[Move] | None = None,
    *,
    min_separation: float = DEFAULT_MIN_SEPARATION,
    key: Callable[[Move], Hashable] = direction_key,
) -> list[RearrangementStep]:
    """Greedy first-fit grouping of moves into steps.

    Moves are offered in order_hint order (default: input order) to the
    earliest open group that stays compatible; otherwise a new group
    opens. Under a relaxed request the strict partition is used instead
    whenever greediness would make it produce fewer groups, so relaxed
    never needs more steps than strict.
    """
    if mode not in ("strict", "relaxed"):
        raise ValueError(f"unknown routing mode {mode!r}")
    ordered = list(order_hint) if order_hint is not None else list(moves)
    if set(map(id, ordered)) != set(map(id, moves)) and sorted(
        (m.qubit, m.src, m.dst) for m in ordered
    ) != sorted((m.qubit, m.src, m.dst) for m in moves):
        raise ValueError("order_hint must be a permutation of the moves")
    if len({m.src for m in ordered}) != len(ordered) or len({m.dst for m in ordered}) != len(ordered):
        raise ValueError("moves must have distinct sources and distinct destinations")

    groups = _first_fit(ordered, mode, min_separation, key)
    if mode == "relaxed":
        strict_groups = _first_fit(ordered, "strict", min_separation, key)
        if len(strict_groups) < len(groups):
            groups = strict_groups
    return [make_step(g.moves) for g in groups]


def _first_fit(
    ordered: Sequence[Move],
    mode: Mode,
    min_separation: float,
    key: Callable[[Move], Hashable],
) -> list[GroupBuilder]:
    groups: list[GroupBuilder] = []
    for move in ordered:
        k = key(move)
        for group in groups:
            if group.can_add(move, mode, min_separation, k):
                group.add(move, k)
                break
        else:
            fresh = GroupBuilder(k)
            fresh.add(move, k)
            groups.append(fresh)
    return groups


@dataclass(frozen=True)
class ModeDecision:
    steps: tuple[RearrangementStep, ...]
    chosen: Mode
    strict_time: float
    relaxed_time: float


def choose_mode(
    moves: Sequence[Move],
    motion: MotionParams = timing.DEFAULT_MOTION,
    order_hint: Sequence[Move] | None = None,
    *,
    min_separation: float = DEFAULT_MIN_SEPARATION,
    key: Callable[[Move], Hashable] = direction_key,
    offset_distance: float = timing.DEFAULT_OFFSET_DISTANCE,
    shift_distance: float = timing.DEFAULT_SHIFT_DISTANCE,
) -> ModeDecision:
    """Pick the cheaper of the strict and relaxed groupings.

    Both groupings are estimated with the step timing model; ties go to
    strict, which needs no reorder shifts. Deterministic.
    """
    strict_steps = group_moves(
        moves, "strict", order_hint, min_separation=min_separation, key=key
    )
    relaxed_steps = group_moves(
        moves, "relaxed", order_hint, min_separation=min_separation, key=key
    )
    t_strict = timing.total_time(
        strict_steps, motion, offset_distance=offset_distance, shift_distance=shift_distance
    )
    t_relaxed = timing.total_time(
        relaxed_steps, motion, offset_distance=offset_distance, shift_distance=shift_distance
    )
    if t_strict <= t_relaxed:
        return ModeDecision(tuple(strict_steps), "strict", t_strict, t_relaxed)
    return ModeDecision(tuple(relaxed_steps), "relaxed", t_strict, t_relaxed)
