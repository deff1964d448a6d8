"""Per-layer placement as an incremental tree search.

A search node is a partial placement: the first `depth` movers of the
transition have been assigned target traps. Each child places the next
mover on one more candidate site. The accumulated cost g mirrors the
strict-routing time of the provisional grouping of the placed moves, so
the goal node's g equals the routing estimate for the same grouping.

The heuristic adds, for every unplaced mover, the travel time to its
nearest candidate, stretched by the deepening weights, plus a look-ahead
term that penalizes placements that pull next-layer partners apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterator, Sequence

from . import timing
from .arch import Architecture, PairSlot, Position, TrapId, ZoneKind
from .circuit import Layer
from .errors import CapacityError, EmitError
from .routing import DEFAULT_MIN_SEPARATION, GroupBuilder, Move
from .timing import MotionParams

#: Fraction of entanglement pairs a single layer may occupy.
MAX_FILL = 0.9

#: Default number of nearest candidate sites examined per mover.
DEFAULT_WINDOW = 16


@dataclass(frozen=True)
class HeuristicParams:
    """Weights of the placement heuristic.

    delta inflates the remaining-cost estimate, beta fades it out with
    depth, alpha scales the next-layer look-ahead.
    """

    delta: float = 0.01
    beta: float = 0.0
    alpha: float = 0.4

    def __post_init__(self) -> None:
        if self.delta < 0 or self.beta < 0 or self.alpha < 0:
            raise ValueError("heuristic weights must be non-negative")


DEFAULT_PARAMS = HeuristicParams()


@dataclass(frozen=True)
class AtomState:
    """Where one qubit's atom currently sits."""

    qubit: int
    site: TrapId
    region: ZoneKind


class MoverKind:
    PAIR_LEAD = "pair_lead"      # first atom of a gate pair, picks the pair
    PAIR_FOLLOW = "pair_follow"  # second atom, takes the partner slot
    PARTNER = "partner"          # joins a reused atom at its fixed partner slot
    RETURN = "return"            # goes back to a free storage trap


@dataclass(frozen=True)
class Mover:
    qubit: int
    kind: str
    src_site: TrapId
    src: Position
    lead_qubit: int | None = None           # for PAIR_FOLLOW
    fixed_target: TrapId | None = None      # for PARTNER
    candidates: tuple[tuple[TrapId, Position], ...] = ()  # sorted by distance
    min_distance: float = 0.0


@dataclass(frozen=True)
class PlacementTask:
    """Everything the per-transition search needs, immutable."""

    arch: Architecture
    motion: MotionParams
    movers: tuple[Mover, ...]
    fixed: dict[int, TrapId]
    prev_positions: dict[int, Position]
    next_pairs: tuple[tuple[int, int], ...]
    pair_offset: float
    min_separation: float
    window: int | None
    suffix_min_time: tuple[float, ...]  # suffix sums of per-mover best travel time

    @property
    def num_movers(self) -> int:
        return len(self.movers)


class SearchNode:
    """One partial placement. Immutable once created.

    Children record only their delta against the parent; group builders
    and claim sets are materialized lazily when a node gets expanded.
    """

    __slots__ = (
        "parent", "depth", "qubit", "site", "move", "group_index",
        "g", "h", "lookahead", "_groups", "_claimed",
    )

    def __init__(
        self,
        parent: "SearchNode | None",
        qubit: int | None,
        site: TrapId | None,
        move: Move | None,
        group_index: int,
        g: float,
        h: float,
        lookahead: float,
    ):
        self.parent = parent
        self.depth = 0 if parent is None else parent.depth + 1
        self.qubit = qubit
        self.site = site
        self.move = move
        self.group_index = group_index
        self.g = g
        self.h = h
        self.lookahead = lookahead
        self._groups: list[GroupBuilder] | None = None
        self._claimed: set[TrapId] | None = None

    @property
    def f(self) -> float:
        return self.g + self.h

    def chain(self) -> Iterator["SearchNode"]:
        """Nodes from the root (exclusive) down to self."""
        nodes = []
        node: SearchNode | None = self
        while node is not None and node.parent is not None:
            nodes.append(node)
            node = node.parent
        return iter(reversed(nodes))

    def assignment(self) -> dict[int, TrapId]:
        return {n.qubit: n.site for n in self.chain()}

    def site_of(self, qubit: int) -> TrapId:
        node: SearchNode | None = self
        while node is not None and node.parent is not None:
            if node.qubit == qubit:
                return node.site
            node = node.parent
        raise EmitError(f"qubit {qubit} not placed yet")

    def claimed(self) -> set[TrapId]:
        if self._claimed is None:
            self._claimed = {n.site for n in self.chain()}
        return self._claimed

    def groups(self, task: PlacementTask) -> list[GroupBuilder]:
        """Provisional grouping of the placed moves, rebuilt on demand."""
        if self._groups is None:
            groups: list[GroupBuilder] = []
            for node in self.chain():
                key = _group_key(task.arch, node.move)
                if node.group_index == len(groups):
                    fresh = GroupBuilder(key)
                    fresh.add(node.move, key)
                    groups.append(fresh)
                else:
                    groups[node.group_index].add(node.move, key)
            self._groups = groups
        return self._groups

    def group_structure(self) -> list[list[int]]:
        """Partition of placed qubits into provisional groups, in order."""
        partition: list[list[int]] = []
        for node in self.chain():
            if node.group_index == len(partition):
                partition.append([])
            partition[node.group_index].append(node.qubit)
        return partition

    def moves_by_group(self) -> list[list[Move]]:
        partition: list[list[Move]] = []
        for node in self.chain():
            if node.group_index == len(partition):
                partition.append([])
            partition[node.group_index].append(node.move)
        return partition


def _group_key(arch: Architecture, move: Move) -> Hashable:
    """Group moves only within the same source-zone/target-zone class."""
    src = arch.trap_at(move.src)
    dst = arch.trap_at(move.dst)
    src_zone = src.zone_index if src is not None else -1
    dst_zone = dst.zone_index if dst is not None else -1
    return (src_zone, dst_zone)


def _group_cost(builder: GroupBuilder, task: PlacementTask) -> float:
    """Strict-routing time of one provisional group.

    Rows pick up one batch each with an offset move between batches, the
    order-preserving column set drops in a single batch, and the transit
    runs at the longest distance in the group.
    """
    rows = builder.num_rows
    transfer = task.motion.transfer_time
    offset = timing.move_time(timing.DEFAULT_OFFSET_DISTANCE, task.motion)
    return (rows + 1) * transfer + (rows - 1) * offset + timing.move_time(builder.max_distance, task.motion)


# -- task construction -------------------------------------------------------


def build_task(
    arch: Architecture,
    prev_assignment: dict[int, TrapId],
    layer: Layer,
    reuse: set[int] | None = None,
    *,
    next_layer: Layer | None = None,
    window: int | None = DEFAULT_WINDOW,
    motion: MotionParams | None = None,
    min_separation: float | None = None,
) -> PlacementTask:
    """Derive the movers and their candidate sites for one transition.

    Raises CapacityError when the layer wants more entanglement pairs
    than the filling limit allows.
    """
    reuse = reuse or set()
    motion = motion or arch.motion
    min_separation = arch.min_trap_spacing if min_separation is None else min_separation
    ez = arch.entanglement_zone_index
    capacity = int(MAX_FILL * arch.num_entanglement_pairs() + 1e-9)
    pairs = sorted((min(a, b), max(a, b)) for a, b in layer.cz_pairs)
    if len(pairs) > capacity:
        raise CapacityError(
            f"layer has {len(pairs)} gate pairs but the zone supports at most {capacity}"
        )

    positions = {q: arch.trap_position(site) for q, site in prev_assignment.items()}
    in_ezone = {q for q, site in prev_assignment.items() if site.zone_index == ez}
    layer_qubits = {q for pair in pairs for q in pair}
    for q in reuse:
        if q not in in_ezone or q not in layer_qubits:
            raise ValueError(f"reused qubit {q} is not resident and interacting")

    moving: list[tuple[str, int, int | None]] = []  # (kind, qubit, lead)
    partner_targets: dict[int, TrapId] = {}
    for a, b in pairs:
        if a in reuse and b in reuse:
            continue
        if a in reuse or b in reuse:
            stay, move = (a, b) if a in reuse else (b, a)
            partner_targets[move] = arch.pair_partner(prev_assignment[stay])
            moving.append((MoverKind.PARTNER, move, None))
        else:
            moving.append((MoverKind.PAIR_LEAD, a, None))
            moving.append((MoverKind.PAIR_FOLLOW, b, a))

    mover_qubits = {q for _, q, _ in moving}
    returners = sorted(q for q in in_ezone if q not in layer_qubits)
    mover_qubits.update(returners)

    # Pairs a lead may target: unoccupied, or every occupant leaves this
    # transition. Pairs hosting a reused atom are reachable only through
    # the fixed partner slot.
    occupants: dict[tuple[int, int], list[int]] = {}
    for q in in_ezone:
        site = prev_assignment[q]
        occupants.setdefault((site.row, site.col), []).append(q)
    available_pairs = []
    zone = arch.zones[ez]
    for row in range(zone.rows):
        for col in range(zone.cols):
            holders = occupants.get((row, col), [])
            if all(q in mover_qubits for q in holders):
                available_pairs.append((row, col))

    free_storage = _free_storage_index(arch, prev_assignment)

    movers: list[Mover] = []
    for kind, q, lead in moving:
        src_site = prev_assignment[q]
        src = positions[q]
        if kind == MoverKind.PARTNER:
            target = partner_targets[q]
            pos = arch.trap_position(target)
            movers.append(
                Mover(q, kind, src_site, src, fixed_target=target,
                      candidates=((target, pos),), min_distance=src.distance(pos))
            )
        elif kind == MoverKind.PAIR_LEAD:
            cands = _pair_slot_candidates(arch, ez, available_pairs, src, src_site)
            if not cands:
                raise CapacityError("no entanglement pair available for placement")
            movers.append(
                Mover(q, kind, src_site, src, candidates=cands,
                      min_distance=src.distance(cands[0][1]))
            )
        else:  # PAIR_FOLLOW: candidates depend on the lead, bound the distance
            best = math.inf
            for row, col in available_pairs:
                for slot in (PairSlot.LEFT, PairSlot.RIGHT):
                    pos = arch.trap_position(TrapId(ez, row, col, slot))
                    best = min(best, src.distance(pos))
            movers.append(
                Mover(q, kind, src_site, src, lead_qubit=lead,
                      min_distance=0.0 if math.isinf(best) else best)
            )
    for q in returners:
        src_site = prev_assignment[q]
        src = positions[q]
        cands = free_storage.nearest(src, max(64, (window or DEFAULT_WINDOW) * 8))
        if not cands:
            raise CapacityError("no free storage trap for a returning atom")
        movers.append(
            Mover(q, MoverKind.RETURN, src_site, src, candidates=cands,
                  min_distance=src.distance(cands[0][1]))
        )

    suffix = [0.0] * (len(movers) + 1)
    for i in range(len(movers) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + timing.move_time(movers[i].min_distance, motion)

    fixed = {q: site for q, site in prev_assignment.items() if q not in mover_qubits}
    next_pairs = tuple(sorted((min(a, b), max(a, b)) for a, b in next_layer.cz_pairs)) if next_layer else ()
    return PlacementTask(
        arch=arch,
        motion=motion,
        movers=tuple(movers),
        fixed=fixed,
        prev_positions=positions,
        next_pairs=next_pairs,
        pair_offset=zone.pair_offset,
        min_separation=min_separation,
        window=window,
        suffix_min_time=tuple(suffix),
    )


def _pair_slot_candidates(
    arch: Architecture,
    ez: int,
    available_pairs: list[tuple[int, int]],
    src: Position,
    src_site: TrapId,
) -> tuple[tuple[TrapId, Position], ...]:
    cands = []
    for row, col in available_pairs:
        for slot in (PairSlot.LEFT, PairSlot.RIGHT):
            site = TrapId(ez, row, col, slot)
            if site == src_site:
                continue  # a mover never "moves" onto its own trap
            pos = arch.trap_position(site)
            cands.append((src.distance(pos), site.row, site.col, slot.value, site, pos))
    cands.sort(key=lambda t: t[:4])
    return tuple((site, pos) for *_, site, pos in cands)


class _FreeStorageIndex:
    """Nearest free storage traps by grid walking, no global sort."""

    def __init__(self, arch: Architecture, occupied: set[TrapId]):
        self.arch = arch
        self.occupied = occupied
        self.zones = [
            (zi, z) for zi, z in enumerate(arch.zones) if z.kind is ZoneKind.STORAGE
        ]

    def nearest(self, src: Position, count: int) -> tuple[tuple[TrapId, Position], ...]:
        found: list[tuple[float, float, float, TrapId, Position]] = []
        for zi, zone in self.zones:
            rows = sorted(range(zone.rows), key=lambda r: abs(zone.origin.y + r * zone.row_pitch - src.y))
            per_row = count
            for r in rows:
                y = zone.origin.y + r * zone.row_pitch
                if found and len(found) >= count:
                    worst = max(f[0] for f in found)
                    if abs(y - src.y) > worst:
                        break
                cols = sorted(range(zone.cols), key=lambda c: abs(zone.origin.x + c * zone.col_pitch - src.x))
                taken = 0
                for c in cols:
                    if taken >= per_row:
                        break
                    site = TrapId(zi, r, c)
                    if site in self.occupied:
                        continue
                    pos = Position(zone.origin.x + c * zone.col_pitch, y)
                    found.append((src.distance(pos), pos.y, pos.x, site, pos))
                    taken += 1
        found.sort(key=lambda t: t[:3])
        return tuple((site, pos) for *_, site, pos in found[:count])


def _free_storage_index(arch: Architecture, prev_assignment: dict[int, TrapId]) -> _FreeStorageIndex:
    occupied = {site for site in prev_assignment.values()}
    return _FreeStorageIndex(arch, occupied)


# -- node operations ----------------------------------------------------------


def make_root(task: PlacementTask, params: HeuristicParams = DEFAULT_PARAMS) -> SearchNode:
    lookahead = _lookahead_total(task, {})
    root = SearchNode(None, None, None, None, -1, 0.0, 0.0, lookahead)
    root.h = _heuristic_value(task, params, 0, lookahead)
    return root


def is_goal(node: SearchNode, task: PlacementTask) -> bool:
    return node.depth == task.num_movers


def node_cost(node: SearchNode) -> float:
    """Accumulated strict-routing time of the node's provisional groups."""
    return node.g


def node_heuristic(node: SearchNode, task: PlacementTask, params: HeuristicParams) -> float:
    """Estimated remaining cost; recomputed from scratch for inspection."""
    positions = _current_positions(node, task)
    lookahead = _lookahead_total(task, positions)
    return _heuristic_value(task, params, node.depth, lookahead)


def _heuristic_value(task: PlacementTask, params: HeuristicParams, depth: int, lookahead: float) -> float:
    n = task.num_movers
    fade = 1.0 if n == 0 else 1.0 - params.beta * depth / n
    base = (1.0 + params.delta) * max(0.0, fade) * task.suffix_min_time[depth]
    return base + params.alpha * lookahead


def _current_positions(node: SearchNode, task: PlacementTask) -> dict[int, Position]:
    placed = {}
    n: SearchNode | None = node
    while n is not None and n.parent is not None:
        placed[n.qubit] = n.move.dst
        n = n.parent
    return placed


def _pair_term(task: PlacementTask, pa: Position, pb: Position) -> float:
    gap = max(0.0, pa.distance(pb) - task.pair_offset)
    return timing.move_time(gap / 2.0, task.motion)


def _lookahead_total(task: PlacementTask, placed: dict[int, Position]) -> float:
    """Travel-time bound for pulling next-layer partners together."""
    if not task.next_pairs:
        return 0.0
    total = 0.0
    for a, b in task.next_pairs:
        pa = placed.get(a) or _resting_position(task, a)
        pb = placed.get(b) or _resting_position(task, b)
        if pa is None or pb is None:
            continue
        total += _pair_term(task, pa, pb)
    return total


def _resting_position(task: PlacementTask, qubit: int) -> Position | None:
    if qubit in task.prev_positions:
        return task.prev_positions[qubit]
    return None


def expand(
    node: SearchNode,
    task: PlacementTask,
    params: HeuristicParams = DEFAULT_PARAMS,
) -> list[SearchNode]:
    """Children of a non-goal node, ordered by ascending g + h.

    One child per candidate site of the next mover. Returns an empty
    list when every candidate is already claimed (a dead leaf).
    """
    if is_goal(node, task):
        return []
    mover = task.movers[node.depth]
    claimed = node.claimed()
    groups = node.groups(task)

    candidates: list[tuple[TrapId, Position]]
    if mover.kind == MoverKind.PAIR_FOLLOW:
        lead_site = node.site_of(mover.lead_qubit)
        target = task.arch.pair_partner(lead_site)
        candidates = [] if target in claimed else [(target, task.arch.trap_position(target))]
    else:
        candidates = []
        limit = task.window if task.window is not None else len(mover.candidates)
        if mover.kind == MoverKind.PAIR_LEAD:
            claimed_pairs = {(s.zone_index, s.row, s.col) for s in claimed}
            for site, pos in mover.candidates:
                if (site.zone_index, site.row, site.col) in claimed_pairs:
                    continue
                candidates.append((site, pos))
                if len(candidates) >= limit:
                    break
        else:
            for site, pos in mover.candidates:
                if site in claimed:
                    continue
                candidates.append((site, pos))
                if len(candidates) >= limit:
                    break

    children = []
    for site, pos in candidates:
        move = Move(mover.qubit, mover.src, pos)
        key = _group_key(task.arch, move)
        joined = len(groups)
        delta = math.inf
        for gi, builder in enumerate(groups):
            if builder.can_add(move, "strict", task.min_separation, key):
                joined = gi
                before = _group_cost(builder, task)
                builder.add(move, key)
                delta = _group_cost(builder, task) - before
                _rollback(builder, move)
                break
        if joined == len(groups):
            probe = GroupBuilder(key)
            probe.add(move, key)
            delta = _group_cost(probe, task)

        lookahead = node.lookahead + _lookahead_delta(task, node, mover.qubit, pos)
        h = _heuristic_value(task, params, node.depth + 1, lookahead)
        child = SearchNode(node, mover.qubit, site, move, joined, node.g + delta, h, lookahead)
        children.append((child.f, site.row, site.col, mover.qubit, child))
    children.sort(key=lambda t: t[:4])
    return [c for *_, c in children]


def _rollback(builder: GroupBuilder, move: Move) -> None:
    """Undo a probing add (the move is always the most recent one)."""
    builder.moves.pop()
    builder.col_pairs.remove((move.src.x, move.dst.x))
    builder.dst_cols.remove(move.dst.x)
    if not any(m.src.y == move.src.y for m in builder.moves):
        builder.row_pairs.remove((move.src.y, move.dst.y))
        builder.dst_rows.remove(move.dst.y)
    builder.max_distance = max((m.distance for m in builder.moves), default=0.0)


def _lookahead_delta(task: PlacementTask, node: SearchNode, qubit: int, dst: Position) -> float:
    if not task.next_pairs:
        return 0.0
    delta = 0.0
    placed = None
    for a, b in task.next_pairs:
        if qubit != a and qubit != b:
            continue
        if placed is None:
            placed = _current_positions(node, task)
        other = b if qubit == a else a
        po = placed.get(other) or _resting_position(task, other)
        pq_old = placed.get(qubit) or _resting_position(task, qubit)
        if po is None or pq_old is None:
            continue
        delta += _pair_term(task, dst, po) - _pair_term(task, pq_old, po)
    return delta
