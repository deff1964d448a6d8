"""End-to-end compilation: schedule, reuse, place, route, and emit.

Transitions are the unit of work: one per gate layer (moving atoms into
position before its entangling pulse) plus a final transition that
returns every atom left in the entanglement zone to storage.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

from . import codegen, placement, routing, search, timing
from .arch import Architecture, Position, TrapId, default_architecture
from .circuit import Circuit, Layer, ReusePlan, reuse_analysis, schedule
from .errors import BudgetError, EmitError
from .placement import HeuristicParams, PlacementTask
from .routing import Move, RearrangementStep, RoutingResult
from .search import SearchConfig, SearchOutcome
from .timing import MotionParams


@dataclass
class TransitionStats:
    label: str
    rearrangement_time_us: float = 0.0
    steps: int = 0
    nodes_expanded: int = 0
    nodes_created: int = 0
    peak_queue_size: int = 0
    mode: str = "none"
    wall_clock_s: float = 0.0


@dataclass
class CompileStats:
    strategy: str
    routing: str
    seed: int
    qubits: int
    layers: int
    per_transition: list[TransitionStats] = field(default_factory=list)

    @property
    def total_rearrangement_time_us(self) -> float:
        return sum(t.rearrangement_time_us for t in self.per_transition)

    @property
    def total_steps(self) -> int:
        return sum(t.steps for t in self.per_transition)

    @property
    def total_nodes_expanded(self) -> int:
        return sum(t.nodes_expanded for t in self.per_transition)

    @property
    def peak_queue_size(self) -> int:
        return max((t.peak_queue_size for t in self.per_transition), default=0)

    @property
    def peak_node_storage_bytes(self) -> int:
        created = max((t.nodes_created for t in self.per_transition), default=0)
        return created * search.NODE_SIZE_BYTES

    @property
    def total_wall_clock_s(self) -> float:
        return sum(t.wall_clock_s for t in self.per_transition)

    def to_text(self) -> str:
        """Deterministic key=value rendering; volatile timings excluded."""
        lines = [
            "# zonedc stats v1",
            f"strategy = {self.strategy}",
            f"routing = {self.routing}",
            f"seed = {self.seed}",
            f"qubits = {self.qubits}",
            f"layers = {self.layers}",
            f"total/rearrangement_time_us = {self.total_rearrangement_time_us:.3f}",
            f"total/steps = {self.total_steps}",
            f"total/nodes_expanded = {self.total_nodes_expanded}",
            f"peak/queue_size = {self.peak_queue_size}",
        ]
        for t in self.per_transition:
            prefix = f"transition/{t.label}"
            lines.append(f"{prefix}/rearrangement_time_us = {t.rearrangement_time_us:.3f}")
            lines.append(f"{prefix}/steps = {t.steps}")
            lines.append(f"{prefix}/nodes_expanded = {t.nodes_expanded}")
            lines.append(f"{prefix}/peak_queue_size = {t.peak_queue_size}")
            lines.append(f"{prefix}/mode = {t.mode}")
        return "\n".join(lines) + "\n"


@dataclass
class Transition:
    label: str
    layer: Layer | None
    task: PlacementTask | None
    outcome: SearchOutcome | None
    result: RoutingResult
    assignment_after: dict[int, TrapId]


@dataclass
class CompileResult:
    circuit: Circuit
    arch: Architecture
    layers: list[Layer]
    reuse: ReusePlan
    initial_assignment: dict[int, TrapId]
    transitions: list[Transition]
    instructions: list[codegen.Instruction]
    stats: CompileStats

    def instruction_text(self) -> str:
        return codegen.format_instructions(
            self.instructions, self.circuit.num_qubits, self.arch.name
        )


def compile_circuit(
    circuit: Circuit,
    arch: Architecture | None = None,
    *,
    strategy: str = "ids",
    routing_mode: str = "auto",
    params: HeuristicParams | None = None,
    config: SearchConfig | None = None,
    window: int | None = placement.DEFAULT_WINDOW,
    motion: MotionParams | None = None,
    seed: int = 0,
) -> CompileResult:
    """Run the full pipeline on one circuit.

    Deterministic for fixed inputs; the seed is recorded in the stats
    for provenance. Raises CapacityError or BudgetError on failure.
    """
    if routing_mode not in ("strict", "relaxed", "auto"):
        raise ValueError(f"unknown routing mode {routing_mode!r}")
    arch = arch or default_architecture()
    motion = motion or arch.motion
    params = params or HeuristicParams()
    config = config or SearchConfig(strategy=strategy)
    if config.strategy != strategy:
        config = SearchConfig(
            strategy=strategy,
            queue_capacity=config.queue_capacity,
            trials=config.trials,
            node_budget=config.node_budget,
            max_nodes=config.max_nodes,
        )

    layers = schedule(circuit)
    reuse = reuse_analysis(layers)
    assignment = codegen.default_initial_assignment(arch, circuit.num_qubits)
    stats = CompileStats(strategy, routing_mode, seed, circuit.num_qubits, len(layers))

    transitions: list[Transition] = []
    cz_layers = [ly for ly in layers if ly.cz_pairs]
    ez = arch.entanglement_zone_index

    for i, layer in enumerate(cz_layers):
        reuse_in = reuse[i - 1] if i > 0 else set()
        next_layer = cz_layers[i + 1] if i + 1 < len(cz_layers) else None
        transition, assignment = _run_transition(
            f"layer{i}", layer, arch, assignment, reuse_in, next_layer,
            strategy, routing_mode, params, config, window, motion, stats,
        )
        transitions.append(transition)

    if any(site.zone_index == ez for site in assignment.values()):
        transition, assignment = _run_transition(
            "return", Layer(), arch, assignment, set(), None,
            strategy, routing_mode, params, config, window, motion, stats,
        )
        transitions.append(transition)

    placements = [codegen.default_initial_assignment(arch, circuit.num_qubits)]
    placements += [t.assignment_after for t in transitions]
    results = [t.result for t in transitions]
    instructions = codegen.emit(layers, placements, results, arch, motion)
    return CompileResult(
        circuit=circuit,
        arch=arch,
        layers=layers,
        reuse=reuse,
        initial_assignment=placements[0],
        transitions=transitions,
        instructions=instructions,
        stats=stats,
    )


def _run_transition(
    label, layer, arch, assignment, reuse_in, next_layer,
    strategy, routing_mode, params, config, window, motion, stats,
):
    start = _time.perf_counter()
    task = placement.build_task(
        arch, assignment, layer, reuse_in,
        next_layer=next_layer, window=window, motion=motion,
    )
    row = TransitionStats(label=label)
    outcome = None
    new_assignment = dict(assignment)
    if task.movers:
        root = placement.make_root(task, params)
        outcome = search.run_search(
            root,
            lambda n: placement.expand(n, task, params),
            lambda n: n.f,
            lambda n: placement.is_goal(n, task),
            config,
        )
        if outcome.best_goal is None:
            raise BudgetError(
                f"{label}: {strategy} found no placement within "
                f"budget (expanded {outcome.nodes_expanded}, created {outcome.nodes_created})"
            )
        goal = outcome.best_goal
        for node in goal.chain():
            new_assignment[node.qubit] = node.site
        order_hint = [m for group in goal.moves_by_group() for m in group]
        result = _route(order_hint, arch, motion, routing_mode, task.min_separation)
        result = _resolve_step_order(result, arch, assignment, routing_mode, motion, task.min_separation)
        row.nodes_expanded = outcome.nodes_expanded
        row.nodes_created = outcome.nodes_created
        row.peak_queue_size = outcome.peak_queue_size
    else:
        result = RoutingResult(steps=(), total_time=0.0, mode=routing_mode)

    row.rearrangement_time_us = result.total_time
    row.steps = len(result.steps)
    row.mode = _describe_modes(result)
    row.wall_clock_s = _time.perf_counter() - start
    stats.per_transition.append(row)
    return (
        Transition(label, layer if layer.cz_pairs or layer.pre_single_qubit else None,
                   task, outcome, result, new_assignment),
        new_assignment,
    )


def _zone_key(arch: Architecture):
    def key(move: Move):
        src = arch.trap_at(move.src)
        dst = arch.trap_at(move.dst)
        return (
            src.zone_index if src is not None else -1,
            dst.zone_index if dst is not None else -1,
        )

    return key


def _route(moves, arch, motion, mode, min_separation) -> RoutingResult:
    key = _zone_key(arch)
    if mode == "auto":
        decision = routing.choose_mode(
            moves, motion, order_hint=moves, min_separation=min_separation, key=key
        )
        steps = decision.steps
    else:
        steps = tuple(
            routing.group_moves(moves, mode, order_hint=moves, min_separation=min_separation, key=key)
        )
    return RoutingResult(steps=steps, total_time=timing.total_time(steps, motion), mode=mode)


def _resolve_step_order(
    result: RoutingResult,
    arch: Architecture,
    assignment_before: dict[int, TrapId],
    mode: str,
    motion: MotionParams,
    min_separation: float,
) -> RoutingResult:
    """Order steps so every drop target is vacant when reached.

    A step that drops onto a trap vacated in this transition must run
    after the vacating step. Cycles (mutual slot swaps under strict
    routing) are broken by bouncing one atom through a free storage
    trap, splitting its move in two.
    """
    steps = list(result.steps)
    occupied_before = {
        _pos_key(arch.trap_position(site)): q for q, site in assignment_before.items()
    }
    for _ in range(len(steps) + sum(len(s.moves) for s in steps) + 1):
        vacates: dict[tuple[float, float], int] = {}
        moving_qubits = set()
        for si, step in enumerate(steps):
            for m in step.moves:
                vacates[_pos_key(m.src)] = si
                moving_qubits.add(m.qubit)
        edges: dict[int, set[int]] = {i: set() for i in range(len(steps))}
        for si, step in enumerate(steps):
            for m in step.moves:
                key = _pos_key(m.dst)
                holder = occupied_before.get(key)
                if holder is None or holder not in moving_qubits:
                    continue
                vacator = vacates.get(key)
                if vacator is not None and vacator != si:
                    edges[vacator].add(si)

        order = _stable_topo(len(steps), edges)
        if order is not None:
            ordered = tuple(steps[i] for i in order)
            return RoutingResult(
                steps=ordered,
                total_time=timing.total_time(ordered, motion),
                mode=result.mode,
            )
        steps = _break_cycle(steps, edges, arch, assignment_before, occupied_before)
    raise EmitError("could not order rearrangement steps acyclically")


def _pos_key(pos: Position) -> tuple[float, float]:
    return (round(pos.x, 6), round(pos.y, 6))


def _stable_topo(n: int, edges: dict[int, set[int]]) -> list[int] | None:
    indeg = [0] * n
    for src, dsts in edges.items():
        for d in dsts:
            indeg[d] += 1
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    out: list[int] = []
    while ready:
        i = ready.pop(0)
        out.append(i)
        for d in sorted(edges[i]):
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
        ready.sort()
    return out if len(out) == n else None


def _break_cycle(steps, edges, arch, assignment_before, occupied_before):
    """Split one cyclic move through a spare storage trap."""
    # Steps still inside a cycle have nonzero in-degree after peeling.
    indeg = {i: 0 for i in range(len(steps))}
    for src, dsts in edges.items():
        for d in dsts:
            indeg[d] += 1
    peel = [i for i in indeg if indeg[i] == 0]
    while peel:
        i = peel.pop()
        for d in edges[i]:
            indeg[d] -= 1
            if indeg[d] == 0:
                peel.append(d)
    cyclic = sorted(i for i, deg in indeg.items() if deg > 0)
    target_step = cyclic[0]
    vacated = {_pos_key(m.src) for s in steps for m in s.moves}
    candidates = [
        m for m in steps[target_step].moves
        if _pos_key(m.dst) in vacated and occupied_before.get(_pos_key(m.dst)) is not None
    ]
    move = min(candidates, key=lambda m: m.qubit)

    bounce = _spare_storage_position(arch, assignment_before, steps, move)
    first = Move(move.qubit, move.src, bounce)
    second = Move(move.qubit, bounce, move.dst)
    rest = [m for m in steps[target_step].moves if m is not move]
    new_steps = [s for i, s in enumerate(steps) if i != target_step]
    if rest:
        new_steps.insert(target_step, routing.make_step(rest))
    new_steps.append(routing.make_step([first]))
    new_steps.append(routing.make_step([second]))
    return new_steps


def _spare_storage_position(arch, assignment_before, steps, move) -> Position:
    """Nearest storage trap untouched before, during, and after the transition."""
    busy = {_pos_key(arch.trap_position(site)) for site in assignment_before.values()}
    for s in steps:
        for m in s.moves:
            busy.add(_pos_key(m.src))
            busy.add(_pos_key(m.dst))
    best = None
    for site in arch.storage_traps():
        pos = arch.trap_position(site)
        if _pos_key(pos) in busy:
            continue
        d = pos.distance(move.src)
        cand = (d, pos.y, pos.x, pos)
        if best is None or cand[:3] < best[:3]:
            best = cand
    if best is None:
        raise EmitError("no spare storage trap available to break a placement cycle")
    return best[3]


def _describe_modes(result: RoutingResult) -> str:
    modes = {s.mode for s in result.steps}
    if not modes:
        return "none"
    if len(modes) == 1:
        return next(iter(modes))
    return "mixed"
