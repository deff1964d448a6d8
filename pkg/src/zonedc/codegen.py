"""Instruction emission and constraint validation.

The emitted program is line-oriented text, one instruction per line:

    @<t_us> PICKUP rows=[..] cols=[..]
    @<t_us> SHIFT axis=y delta=<um>
    @<t_us> MOVE map=[(x,y)->(x,y),..]
    @<t_us> DROP cols=[..]
    @<t_us> RYDBERG zone=<name>
    @<t_us> GATE <name> q=<i>|global

Lines starting with '#' are comments; the emitter writes '# qubits N'
and '# arch NAME' headers so a file is self-contained for validation.
Timestamps are start times in microseconds under the step timing model.

Emission discipline per step: atoms are picked up row by row; after
each batch the freshly activated lines are parked off every trap grid
line (and clear of all upcoming pickup coordinates), so no later
activation ever forms a trap over a bystander atom. Rows are parked
above the next pickup row in destination order, which realizes row
reordering for relaxed steps. One transit move carries everything to
the drop region; out-of-order columns then drop one at a time, highest
destination first, with shifts in between.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from . import timing
from .arch import Architecture, Position, TrapId, ZoneKind
from .circuit import Gate, Layer
from .errors import EmitError, MalformedSequenceError
from .routing import Move, RearrangementStep, RoutingResult
from .timing import MotionParams

_COORD_TOL = 1e-6
_GRID_TOL = 0.25  # a parked line closer than this to a trap line counts as on-grid
_SCAN_STEP = 0.5


def _key(x: float, y: float) -> tuple[float, float]:
    return (round(x, 6), round(y, 6))


@dataclass(frozen=True)
class Instruction:
    kind: str  # pickup | shift | move | drop | rydberg | gate
    time: float
    rows: tuple[float, ...] = ()
    cols: tuple[float, ...] = ()
    axis: str = ""
    delta: float = 0.0
    mapping: tuple[tuple[float, float, float, float], ...] = ()
    zone: str = ""
    gate: str = ""
    qubit: int | None = None  # None means a global pulse

    def to_line(self) -> str:
        t = f"@{self.time:.3f}"
        if self.kind == "pickup":
            return f"{t} PICKUP rows=[{_fmt_list(self.rows)}] cols=[{_fmt_list(self.cols)}]"
        if self.kind == "shift":
            return f"{t} SHIFT axis={self.axis} delta={self.delta:.3f}"
        if self.kind == "move":
            pairs = ",".join(
                f"({x0:.3f},{y0:.3f})->({x1:.3f},{y1:.3f})" for x0, y0, x1, y1 in self.mapping
            )
            return f"{t} MOVE map=[{pairs}]"
        if self.kind == "drop":
            return f"{t} DROP cols=[{_fmt_list(self.cols)}]"
        if self.kind == "rydberg":
            return f"{t} RYDBERG zone={self.zone}"
        if self.kind == "gate":
            scope = "global" if self.qubit is None else str(self.qubit)
            return f"{t} GATE {self.gate} q={scope}"
        raise ValueError(f"unknown instruction kind {self.kind!r}")


def _fmt_list(values: tuple[float, ...]) -> str:
    return ",".join(f"{v:.3f}" for v in values)


@dataclass(frozen=True)
class Violation:
    index: int
    constraint: str  # crossing | preservation | ghost_spot
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


# -- emission -----------------------------------------------------------------


def default_initial_assignment(arch: Architecture, num_qubits: int) -> dict[int, TrapId]:
    """Row-major packing of qubits into the first storage zone."""
    sites = {}
    it = arch.storage_traps()
    for q in range(num_qubits):
        try:
            sites[q] = next(it)
        except StopIteration:
            raise EmitError(f"storage holds fewer than {num_qubits} atoms") from None
    return sites


def emit(
    layers: list[Layer],
    placements: list[dict[int, TrapId]],
    routing_results: list[RoutingResult],
    arch: Architecture,
    motion: MotionParams | None = None,
) -> list[Instruction]:
    """Lower the compiled transitions into timed instructions.

    placements[0] is the initial assignment; routing_results[t] holds
    the steps of transition t (one per layer with gate pairs, plus a
    final return transition when atoms are left to park). Inconsistent
    inputs raise EmitError.
    """
    motion = motion or arch.motion
    emitter = _Emitter(arch, motion, placements[0])
    cz_layers = [ly for ly in layers if ly.cz_pairs]
    n_transitions = len(routing_results)
    if n_transitions not in (len(cz_layers), len(cz_layers) + 1):
        raise EmitError("routing results do not line up with the gate layers")

    t_idx = 0
    for layer in layers:
        if layer.cz_pairs:
            for gate in layer.pre_single_qubit:
                emitter.emit_gate(gate)
            emitter.emit_transition(routing_results[t_idx])
            t_idx += 1
            emitter.emit_rydberg(layer)
        else:
            for gate in layer.pre_single_qubit:
                emitter.emit_gate(gate)
    if t_idx < n_transitions:
        emitter.emit_transition(routing_results[t_idx])
    return emitter.instructions


class _Line:
    """One activated transport row or column."""

    __slots__ = ("pos", "atoms")

    def __init__(self, pos: float):
        self.pos = pos
        self.atoms: set[int] = set()


class _Emitter:
    def __init__(self, arch: Architecture, motion: MotionParams, initial: dict[int, TrapId]):
        self.arch = arch
        self.motion = motion
        self.instructions: list[Instruction] = []
        self.t = 0.0
        self.positions: dict[int, Position] = {
            q: arch.trap_position(site) for q, site in initial.items()
        }
        self.occupancy: dict[tuple[float, float], int] = {}
        for q, pos in self.positions.items():
            k = _key(pos.x, pos.y)
            if k in self.occupancy:
                raise EmitError(f"qubits {self.occupancy[k]} and {q} share a trap")
            self.occupancy[k] = q
        self.trap_rows = arch.trap_rows()
        self.trap_cols = arch.trap_cols()
        self.sep = arch.min_trap_spacing
        self.offset_time = timing.move_time(timing.DEFAULT_OFFSET_DISTANCE, motion)
        self.shift_time = timing.move_time(timing.DEFAULT_SHIFT_DISTANCE, motion)

    # -- small pieces ------------------------------------------------------

    def emit_gate(self, gate: Gate) -> None:
        name = gate.name
        if gate.params:
            name += "(" + ",".join(f"{p:.6g}" for p in gate.params) + ")"
        self.instructions.append(Instruction("gate", self.t, gate=name, qubit=gate.qubits[0]))

    def emit_rydberg(self, layer: Layer) -> None:
        zone_index = self.arch.entanglement_zone_index
        self._check_colocation(layer, zone_index)
        label = self.arch.zone_label(zone_index)
        self.instructions.append(Instruction("rydberg", self.t, zone=label))

    def _check_colocation(self, layer: Layer, zone_index: int) -> None:
        for a, b in layer.cz_pairs:
            pa, pb = self.positions.get(a), self.positions.get(b)
            if pa is None or pb is None:
                raise EmitError(f"pair ({a},{b}) has unplaced atoms")
            ta = self.arch.trap_at(pa)
            tb = self.arch.trap_at(pb)
            if (
                ta is None
                or tb is None
                or ta.zone_index != zone_index
                or self.arch.pair_partner(ta) != tb
            ):
                raise EmitError(f"pair ({a},{b}) is not on one entanglement pair at its pulse")

    def emit_transition(self, routing: RoutingResult) -> None:
        for step in routing.steps:
            self._emit_step(step)

    # -- one rearrangement step --------------------------------------------

    def _emit_step(self, step: RearrangementStep) -> None:
        if not step.moves:
            return
        dst_row_of = {m.src.y: m.dst.y for m in step.moves}
        rows: dict[float, _Line] = {}
        cols: dict[float, _Line] = {}
        col_src_order: list[float] = []  # src x of activated cols, ascending
        qubit_line: dict[int, tuple[float, float]] = {}  # qubit -> (src row y, src col x)
        move_of = {m.qubit: m for m in step.moves}

        batches = step.pickup_batches
        for k, batch in enumerate(batches):
            src_y = batch[0].src.y
            new_cols = sorted(m.src.x for m in batch)
            for m in batch:
                key = _key(m.src.x, m.src.y)
                holder = self.occupancy.get(key)
                if holder != m.qubit:
                    raise EmitError(
                        f"qubit {m.qubit} expected at ({m.src.x}, {m.src.y}), found {holder}"
                    )
            self.instructions.append(
                Instruction("pickup", self.t, rows=(src_y,), cols=tuple(new_cols))
            )
            self.t += self.motion.transfer_time
            row = _Line(src_y)
            rows[src_y] = row
            for m in batch:
                del self.occupancy[_key(m.src.x, m.src.y)]
                col = _Line(m.src.x)
                col.atoms.add(m.qubit)
                cols[m.src.x] = col
                row.atoms.add(m.qubit)
                qubit_line[m.qubit] = (src_y, m.src.x)
            col_src_order = sorted(cols)

            if k + 1 < len(batches):
                upcoming_rows = [b[0].src.y for b in batches[k + 1 :]]
                upcoming_cols = [m.src.x for b in batches[k + 1 :] for m in b]
                row_targets = self._park_rows(rows, dst_row_of, upcoming_rows)
                col_targets = self._park_cols(cols, col_src_order, new_cols, upcoming_cols)
                inversions = sum(
                    1
                    for other in rows
                    if other != src_y
                    and (other < src_y) != (dst_row_of[other] < dst_row_of[src_y])
                )
                self._emit_motion(
                    step, rows, cols, qubit_line, move_of, row_targets, col_targets,
                    duration=self.offset_time + inversions * self.shift_time,
                )

        # Transit: rows to their destination rows, columns to the first
        # drop configuration. Stage-one column inversions ride along.
        drop_plan = self._drop_plan(step, col_src_order)
        row_targets = {src: dst_row_of[src] for src in rows}
        col_targets, inversions = drop_plan[0]
        max_dist = max(m.distance for m in step.moves)
        self._emit_motion(
            step, rows, cols, qubit_line, move_of, row_targets, col_targets,
            duration=timing.move_time(max_dist, self.motion) + inversions * self.shift_time,
        )

        for stage, batch in enumerate(step.drop_batches):
            if stage > 0:
                col_targets, inversions = drop_plan[stage]
                self._emit_motion(
                    step, rows, cols, qubit_line, move_of, {}, col_targets,
                    duration=inversions * self.shift_time,
                )
            drop_xs = sorted({m.dst.x for m in batch})
            self.instructions.append(Instruction("drop", self.t, cols=tuple(drop_xs)))
            self.t += self.motion.transfer_time
            for m in batch:
                src_row, src_col = qubit_line[m.qubit]
                landing = Position(cols[src_col].pos, rows[src_row].pos)
                if landing.distance(m.dst) > _COORD_TOL:
                    raise EmitError(
                        f"qubit {m.qubit} would land at {landing}, planned {m.dst}"
                    )
                lkey = _key(landing.x, landing.y)
                if lkey in self.occupancy:
                    raise EmitError(f"qubit {m.qubit} lands on an occupied trap {landing}")
                self.occupancy[lkey] = m.qubit
                self.positions[m.qubit] = m.dst
                rows[src_row].atoms.discard(m.qubit)
                del cols[src_col]

    def _emit_motion(self, step, rows, cols, qubit_line, move_of, row_targets, col_targets, duration):
        """One MOVE (or SHIFT when uniform) updating line positions."""
        mapping = []
        for qubit, (src_row, src_col) in sorted(qubit_line.items()):
            if qubit not in move_of or src_col not in cols:
                continue  # already dropped
            row, col = rows[src_row], cols[src_col]
            x0, y0 = col.pos, row.pos
            x1 = col_targets.get(src_col, x0)
            y1 = row_targets.get(src_row, y0)
            if abs(x1 - x0) > _COORD_TOL or abs(y1 - y0) > _COORD_TOL:
                mapping.append((x0, y0, x1, y1))
        if mapping:
            instr = self._as_shift_or_move(rows, cols, row_targets, col_targets, mapping)
            self.instructions.append(instr)
        self.t += duration
        for src_row, y1 in row_targets.items():
            if src_row in rows:
                rows[src_row].pos = y1
        for src_col, x1 in col_targets.items():
            if src_col in cols:
                cols[src_col].pos = x1

    def _as_shift_or_move(self, rows, cols, row_targets, col_targets, mapping) -> Instruction:
        deltas_y = {round(row_targets.get(s, rows[s].pos) - rows[s].pos, 6) for s in rows}
        deltas_x = {round(col_targets.get(s, cols[s].pos) - cols[s].pos, 6) for s in cols}
        if deltas_x == {0.0} and len(deltas_y) == 1:
            return Instruction("shift", self.t, axis="y", delta=next(iter(deltas_y)))
        if deltas_y == {0.0} and len(deltas_x) == 1:
            return Instruction("shift", self.t, axis="x", delta=next(iter(deltas_x)))
        return Instruction("move", self.t, mapping=tuple(mapping))

    # -- staging geometry ----------------------------------------------------

    def _park_rows(self, rows, dst_row_of, upcoming_rows) -> dict[float, float]:
        """Park every active row above the next pickup row, stacked in
        destination order, off every trap row and clear of upcoming rows."""
        next_row = upcoming_rows[0]
        order = sorted(rows, key=lambda s: dst_row_of[s], reverse=True)
        targets: dict[float, float] = {}
        ceiling = next_row - self.sep
        for src in order:
            pos = self._scan_down(ceiling, upcoming_rows, self.trap_rows)
            targets[src] = pos
            ceiling = pos - self.sep
        return targets

    def _park_cols(self, cols, col_src_order, new_cols, upcoming_cols) -> dict[float, float]:
        """Park freshly activated columns off-grid near their sources,
        respecting order against the already-parked columns."""
        targets: dict[float, float] = {}
        for src in sorted(new_cols, reverse=True):
            idx = col_src_order.index(src)
            left = col_src_order[idx - 1] if idx > 0 else None
            right = col_src_order[idx + 1] if idx + 1 < len(col_src_order) else None
            lo = -math.inf if left is None else cols[left].pos + self.sep
            hi = math.inf if right is None else (
                targets.get(right, cols[right].pos) - self.sep
            )
            pos = self._scan_interval(
                src - timing.DEFAULT_OFFSET_DISTANCE, lo, hi, upcoming_cols, self.trap_cols
            )
            targets[src] = pos
        return targets

    def _scan_down(self, start: float, avoid: list[float], grid: list[float]) -> float:
        pos = start
        for _ in range(10_000):
            if self._line_clear(pos, avoid, grid):
                return pos
            pos -= _SCAN_STEP
        raise EmitError("no feasible parking position found")

    def _scan_interval(self, preferred, lo, hi, avoid, grid) -> float:
        pos = min(preferred, hi)
        while pos >= lo:
            if self._line_clear(pos, avoid, grid):
                return pos
            pos -= _SCAN_STEP
        pos = max(preferred, lo)
        while pos <= hi:
            if self._line_clear(pos, avoid, grid):
                return pos
            pos += _SCAN_STEP
        # Fall back to the preferred spot clamped into the order window.
        return min(max(preferred, lo), hi)

    def _line_clear(self, pos: float, avoid: list[float], grid: list[float]) -> bool:
        if any(abs(pos - a) < self.sep for a in avoid):
            return False
        return all(abs(pos - g) > _GRID_TOL for g in grid)

    def _drop_plan(self, step, col_src_order) -> list[tuple[dict[float, float], int]]:
        """Column targets and resolved inversions for each drop stage."""
        dst_of = {m.src.x: m.dst.x for m in step.moves}
        plan: list[tuple[dict[float, float], int]] = []
        remaining = list(col_src_order)
        for batch in step.drop_batches:
            batch_srcs = sorted(m.src.x for m in batch)
            targets = {src: dst_of[src] for src in batch_srcs}
            dropping = batch_srcs[-1]
            inversions = 0
            if len(batch) < len(remaining):  # staged drop, park the others around it
                drop_x = dst_of[dropping]
                idx = remaining.index(dropping)
                x = drop_x
                for src in reversed(remaining[:idx]):
                    x -= self.sep
                    targets[src] = min(x, dst_of[src])
                    x = targets[src]
                x = drop_x
                for src in remaining[idx + 1 :]:
                    x += self.sep
                    targets[src] = x
                inversions = len(remaining) - idx - 1
            plan.append((targets, inversions))
            for src in batch_srcs:
                remaining.remove(src)
        return plan


# -- text format ---------------------------------------------------------------


def format_instructions(
    instructions: list[Instruction], num_qubits: int, arch_name: str = ""
) -> str:
    lines = ["# zonedc instructions v1", f"# qubits {num_qubits}"]
    if arch_name:
        lines.append(f"# arch {arch_name}")
    lines.extend(instr.to_line() for instr in instructions)
    return "\n".join(lines) + "\n"


_LINE_RE = re.compile(r"^@(?P<t>-?\d+(?:\.\d+)?)\s+(?P<op>[A-Z]+)\s*(?P<rest>.*)$")
_NUM_LIST = re.compile(r"-?\d+(?:\.\d+)?")
_MAP_PAIR = re.compile(
    r"\((-?\d+(?:\.\d+)?),(-?\d+(?:\.\d+)?)\)->\((-?\d+(?:\.\d+)?),(-?\d+(?:\.\d+)?)\)"
)


def parse_instructions(text: str) -> tuple[list[Instruction], dict[str, str]]:
    """Parse an instruction file back into instructions plus its headers."""
    meta: dict[str, str] = {}
    out: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"^#\s*(\w+)\s+(.*)$", line)
            if m:
                meta[m.group(1)] = m.group(2).strip()
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise MalformedSequenceError(f"line {lineno}: cannot parse {line!r}")
        t = float(m.group("t"))
        op, rest = m.group("op"), m.group("rest")
        if op == "PICKUP":
            rm = re.match(r"^rows=\[(?P<rows>[^\]]*)\]\s+cols=\[(?P<cols>[^\]]*)\]$", rest)
            if not rm:
                raise MalformedSequenceError(f"line {lineno}: bad PICKUP")
            rows = tuple(float(v) for v in _NUM_LIST.findall(rm.group("rows")))
            cols = tuple(float(v) for v in _NUM_LIST.findall(rm.group("cols")))
            out.append(Instruction("pickup", t, rows=rows, cols=cols))
        elif op == "SHIFT":
            rm = re.match(r"^axis=(?P<axis>[xy])\s+delta=(?P<d>-?\d+(?:\.\d+)?)$", rest)
            if not rm:
                raise MalformedSequenceError(f"line {lineno}: bad SHIFT")
            out.append(Instruction("shift", t, axis=rm.group("axis"), delta=float(rm.group("d"))))
        elif op == "MOVE":
            rm = re.match(r"^map=\[(?P<m>.*)\]$", rest)
            if not rm:
                raise MalformedSequenceError(f"line {lineno}: bad MOVE")
            mapping = tuple(
                (float(a), float(b), float(c), float(d))
                for a, b, c, d in _MAP_PAIR.findall(rm.group("m"))
            )
            out.append(Instruction("move", t, mapping=mapping))
        elif op == "DROP":
            rm = re.match(r"^cols=\[(?P<cols>[^\]]*)\]$", rest)
            if not rm:
                raise MalformedSequenceError(f"line {lineno}: bad DROP")
            out.append(
                Instruction("drop", t, cols=tuple(float(v) for v in _NUM_LIST.findall(rm.group("cols"))))
            )
        elif op == "RYDBERG":
            rm = re.match(r"^zone=(\S+)$", rest)
            if not rm:
                raise MalformedSequenceError(f"line {lineno}: bad RYDBERG")
            out.append(Instruction("rydberg", t, zone=rm.group(1)))
        elif op == "GATE":
            rm = re.match(r"^(?P<g>\S+)\s+q=(?P<q>global|\d+)$", rest)
            if not rm:
                raise MalformedSequenceError(f"line {lineno}: bad GATE")
            q = None if rm.group("q") == "global" else int(rm.group("q"))
            out.append(Instruction("gate", t, gate=rm.group("g"), qubit=q))
        else:
            raise MalformedSequenceError(f"line {lineno}: unknown instruction {op}")
    return out, meta


# -- validation -----------------------------------------------------------------


class _SimLine:
    __slots__ = ("pos", "atoms")

    def __init__(self, pos: float):
        self.pos = pos
        self.atoms: set[int] = set()


def validate(
    instructions: list[Instruction],
    arch: Architecture,
    initial: dict[int, TrapId] | int,
) -> ValidationReport:
    """Simulate the transport state and flag constraint violations.

    Checks: (i) activated lines never swap order or come closer than the
    trap pitch, endpoint-checked per motion (crossing); (ii) activated
    lines never split or merge (preservation); (iii) no pickup forms a
    trap over a bystander atom, and every captured atom is released onto
    a free trap (ghost_spot). Structurally bad sequences raise
    MalformedSequenceError instead of being reported.
    """
    if isinstance(initial, int):
        initial = default_initial_assignment(arch, initial)
    report = ValidationReport()
    occupancy: dict[tuple[float, float], int] = {}
    for q, site in initial.items():
        pos = arch.trap_position(site)
        occupancy[_key(pos.x, pos.y)] = q

    rows: list[_SimLine] = []
    cols: list[_SimLine] = []
    held: dict[int, tuple[_SimLine, _SimLine]] = {}  # qubit -> (row, col)
    captured_at: dict[int, int] = {}
    sep = arch.min_trap_spacing
    last_t = -math.inf

    def flag(index: int, constraint: str, detail: str) -> None:
        report.violations.append(Violation(index, constraint, detail))

    for idx, instr in enumerate(instructions):
        if instr.time + _COORD_TOL < last_t:
            raise MalformedSequenceError(f"instruction {idx}: timestamps decrease")
        last_t = instr.time

        if instr.kind == "pickup":
            _sim_pickup(instr, idx, arch, occupancy, rows, cols, held, captured_at, sep, flag)
        elif instr.kind in ("move", "shift"):
            _sim_motion(instr, idx, rows, cols, held, sep, flag)
        elif instr.kind == "drop":
            _sim_drop(instr, idx, arch, occupancy, rows, cols, held, captured_at, flag)
        elif instr.kind in ("rydberg", "gate"):
            pass
        else:
            raise MalformedSequenceError(f"instruction {idx}: unknown kind {instr.kind!r}")

    for qubit, index in sorted(captured_at.items()):
        if qubit in held:
            flag(index, "ghost_spot", f"atom {qubit} was captured but never released")
    return report


def _sim_pickup(instr, idx, arch, occupancy, rows, cols, held, captured_at, sep, flag):
    new_rows = []
    for y in instr.rows:
        for line in rows:
            if abs(line.pos - y) < sep:
                label = "preservation" if abs(line.pos - y) <= _COORD_TOL else "crossing"
                flag(idx, label, f"row activated at {y:.3f} against a row at {line.pos:.3f}")
        line = _SimLine(y)
        rows.append(line)
        new_rows.append(line)
    new_cols = []
    for x in instr.cols:
        for line in cols:
            if abs(line.pos - x) < sep:
                label = "preservation" if abs(line.pos - x) <= _COORD_TOL else "crossing"
                flag(idx, label, f"column activated at {x:.3f} against a column at {line.pos:.3f}")
        line = _SimLine(x)
        cols.append(line)
        new_cols.append(line)

    rows_set = {round(y, 6) for y in instr.rows}
    cols_set = {round(x, 6) for x in instr.cols}
    for row in rows:
        for col in cols:
            if row not in new_rows and col not in new_cols:
                continue  # intersection existed before this pickup
            qubit = occupancy.get(_key(col.pos, row.pos))
            if qubit is None:
                continue
            intended = round(row.pos, 6) in rows_set and round(col.pos, 6) in cols_set
            if not intended:
                flag(
                    idx,
                    "ghost_spot",
                    f"trap over atom {qubit} at ({col.pos:.3f},{row.pos:.3f}) from a parked line",
                )
            del occupancy[_key(col.pos, row.pos)]
            held[qubit] = (row, col)
            row.atoms.add(qubit)
            col.atoms.add(qubit)
            captured_at[qubit] = idx


def _sim_motion(instr, idx, rows, cols, held, sep, flag):
    row_targets: dict[int, float] = {}
    col_targets: dict[int, float] = {}
    if instr.kind == "shift":
        lines = rows if instr.axis == "y" else cols
        targets = row_targets if instr.axis == "y" else col_targets
        for i, _ in enumerate(lines):
            targets[i] = lines[i].pos + instr.delta
    else:
        for x0, y0, x1, y1 in instr.mapping:
            qubit = _atom_at(held, rows, cols, x0, y0)
            if qubit is None:
                raise MalformedSequenceError(
                    f"instruction {idx}: no held atom at ({x0:.3f},{y0:.3f})"
                )
            row, col = held[qubit]
            ri, ci = rows.index(row), cols.index(col)
            if ri in row_targets and abs(row_targets[ri] - y1) > _COORD_TOL:
                flag(idx, "preservation", f"row at {row.pos:.3f} asked to split")
            if ci in col_targets and abs(col_targets[ci] - x1) > _COORD_TOL:
                flag(idx, "preservation", f"column at {col.pos:.3f} asked to split")
            row_targets.setdefault(ri, y1)
            col_targets.setdefault(ci, x1)

    _check_line_motion(rows, row_targets, idx, "row", sep, flag)
    _check_line_motion(cols, col_targets, idx, "column", sep, flag)
    for i, y in row_targets.items():
        rows[i].pos = y
    for i, x in col_targets.items():
        cols[i].pos = x


def _check_line_motion(lines, targets, idx, what, sep, flag):
    future = [targets.get(i, line.pos) for i, line in enumerate(lines)]
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            before = lines[j].pos - lines[i].pos
            after = future[j] - future[i]
            if abs(after) <= _COORD_TOL:
                flag(idx, "preservation", f"two {what}s merge at {future[i]:.3f}")
            elif before * after < 0:
                flag(idx, "crossing", f"{what}s at {lines[i].pos:.3f} and {lines[j].pos:.3f} swap order")
            elif abs(after) < sep:
                flag(idx, "crossing", f"{what}s end {abs(after):.3f} um apart, need {sep}")


def _atom_at(held, rows, cols, x, y):
    for qubit, (row, col) in held.items():
        if abs(col.pos - x) <= _COORD_TOL and abs(row.pos - y) <= _COORD_TOL:
            return qubit
    return None


def _sim_drop(instr, idx, arch, occupancy, rows, cols, held, captured_at, flag):
    for x in instr.cols:
        col = next((c for c in cols if abs(c.pos - x) <= _COORD_TOL), None)
        if col is None:
            raise MalformedSequenceError(f"instruction {idx}: no active column at {x:.3f}")
        for qubit in sorted(col.atoms):
            row, _ = held[qubit]
            landing = Position(col.pos, row.pos)
            trap = arch.trap_at(landing)
            if trap is None:
                flag(
                    captured_at.get(qubit, idx),
                    "ghost_spot",
                    f"atom {qubit} released off-trap at ({landing.x:.3f},{landing.y:.3f})",
                )
            elif _key(landing.x, landing.y) in occupancy:
                flag(idx, "ghost_spot", f"atom {qubit} dropped onto an occupied trap")
            occupancy[_key(landing.x, landing.y)] = qubit
            row.atoms.discard(qubit)
            del held[qubit]
        cols.remove(col)
    for row in [r for r in rows if not r.atoms]:
        rows.remove(row)
