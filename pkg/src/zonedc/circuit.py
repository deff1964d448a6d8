"""Circuit parsing, layer scheduling, and reuse analysis.

The native circuit grammar is line-oriented:

    qubits 4;
    h 0;
    rz(0.5) 1;
    cz 0 1;        # comments run to end of line

Statements end with ';' and whitespace is free-form. A shim accepts the
common interchange subset as well (OPENQASM 2 headers, one qreg, cz and
named one-qubit gates) through the same entry point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError


@dataclass(frozen=True)
class Gate:
    """One gate: 'cz' on two distinct qubits, or a named one-qubit gate."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.name == "cz":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"cz needs two distinct qubits, got {self.qubits}")
        elif len(self.qubits) != 1:
            raise ValueError(f"single-qubit gate {self.name} needs exactly one qubit")

    @property
    def is_cz(self) -> bool:
        return self.name == "cz"


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self) -> None:
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"qubit {q} out of range for {self.num_qubits}-qubit circuit")


@dataclass
class Layer:
    """One scheduling unit: disjoint cz pairs plus the one-qubit gates
    that run just before them."""

    cz_pairs: list[tuple[int, int]] = field(default_factory=list)
    pre_single_qubit: list[Gate] = field(default_factory=list)

    def qubits(self) -> set[int]:
        return {q for pair in self.cz_pairs for q in pair}


#: Per layer index, the qubits that stay in the entanglement zone into the
#: next layer.
ReusePlan = list[set[int]]


# -- parsing ----------------------------------------------------------------

_NATIVE_STMT = re.compile(
    r"^(?:(?P<cz>cz)\s+(?P<a>\d+)\s+(?P<b>\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)\s*(?:\((?P<params>[^()]*)\))?\s+(?P<q>\d+))$"
)
_QASM_STMT = re.compile(
    r"^(?P<name>[A-Za-z_][A-Za-z_0-9]*)\s*(?:\((?P<params>[^()]*)\))?\s*"
    r"(?P<args>[A-Za-z_][A-Za-z_0-9]*\s*\[\s*\d+\s*\](?:\s*,\s*[A-Za-z_][A-Za-z_0-9]*\s*\[\s*\d+\s*\])*)$"
)


def _strip_comments(text: str) -> list[tuple[int, str]]:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split("//", 1)[0]
        lines.append((lineno, body))
    return lines


def _parse_params(raw: str | None, lineno: int) -> tuple[float, ...]:
    if raw is None or not raw.strip():
        return ()
    out = []
    for piece in raw.split(","):
        try:
            out.append(float(piece.strip()))
        except ValueError:
            raise ParseError(f"bad gate parameter {piece.strip()!r}", lineno) from None
    return tuple(out)


def parse_circuit(text: str) -> Circuit:
    """Parse a circuit from native text or the interchange subset."""
    if re.search(r"\bOPENQASM\b|\bqreg\b", text):
        return _parse_qasm(text)
    return _parse_native(text)


def _statements(text: str) -> list[tuple[int, int, str]]:
    """Split on ';' keeping (line, column) of each statement start."""
    stmts = []
    for lineno, body in _strip_comments(text):
        col = 1
        for piece in body.split(";"):
            stripped = piece.strip()
            if stripped:
                offset = piece.index(stripped[0])
                stmts.append((lineno, col + offset, stripped))
            col += len(piece) + 1
    return stmts


def _parse_native(text: str) -> Circuit:
    stmts = _statements(text)
    if not stmts:
        raise ParseError("empty circuit file", 1)
    lineno, column, head = stmts[0]
    m = re.match(r"^qubits\s+(\d+)$", head)
    if not m:
        raise ParseError("circuit must start with 'qubits N;'", lineno, column)
    num_qubits = int(m.group(1))
    gates = []
    for lineno, column, stmt in stmts[1:]:
        m = _NATIVE_STMT.match(stmt)
        if not m:
            raise ParseError(f"cannot parse statement {stmt!r}", lineno, column)
        if m.group("cz"):
            a, b = int(m.group("a")), int(m.group("b"))
            _check_range((a, b), num_qubits, lineno, column)
            if a == b:
                raise ParseError("cz needs two distinct qubits", lineno, column)
            gates.append(Gate("cz", (a, b)))
        else:
            name = m.group("name").lower()
            if name == "qubits":
                raise ParseError("duplicate 'qubits' header", lineno, column)
            q = int(m.group("q"))
            _check_range((q,), num_qubits, lineno, column)
            gates.append(Gate(name, (q,), _parse_params(m.group("params"), lineno)))
    return Circuit(num_qubits, tuple(gates))


def _parse_qasm(text: str) -> Circuit:
    stmts = _statements(text)
    num_qubits = None
    reg = None
    gates = []
    skip = {"barrier", "measure", "creg", "include", "reset"}
    for lineno, column, stmt in stmts:
        if stmt.startswith("OPENQASM"):
            continue
        m = re.match(r"^qreg\s+([A-Za-z_][A-Za-z_0-9]*)\s*\[\s*(\d+)\s*\]$", stmt)
        if m:
            if reg is not None:
                raise ParseError("only a single qreg is supported", lineno, column)
            reg, num_qubits = m.group(1), int(m.group(2))
            continue
        first = stmt.split(None, 1)[0].split("(", 1)[0]
        if first in skip or stmt.startswith("measure"):
            continue
        m = _QASM_STMT.match(stmt)
        if not m:
            raise ParseError(f"cannot parse statement {stmt!r}", lineno, column)
        if num_qubits is None:
            raise ParseError("gate before qreg declaration", lineno, column)
        args = []
        for ref in m.group("args").split(","):
            rm = re.match(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*\[\s*(\d+)\s*\]\s*$", ref)
            if rm.group(1) != reg:
                raise ParseError(f"unknown register {rm.group(1)!r}", lineno, column)
            args.append(int(rm.group(2)))
        name = m.group("name").lower()
        _check_range(tuple(args), num_qubits, lineno, column)
        if name == "cz":
            if len(args) != 2:
                raise ParseError("cz needs two qubits", lineno, column)
            gates.append(Gate("cz", tuple(args)))
        elif len(args) == 1:
            gates.append(Gate(name, tuple(args), _parse_params(m.group("params"), lineno)))
        else:
            raise ParseError(f"unsupported multi-qubit gate {name!r} (only cz)", lineno, column)
    if num_qubits is None:
        raise ParseError("no qreg declaration found", 1)
    return Circuit(num_qubits, tuple(gates))


def _check_range(qubits: tuple[int, ...], n: int, lineno: int, column: int) -> None:
    for q in qubits:
        if q >= n:
            raise ParseError(f"qubit {q} out of range (circuit has {n})", lineno, column)


# -- scheduling ---------------------------------------------------------------


def schedule(circuit: Circuit) -> list[Layer]:
    """Greedy as-soon-as-possible layering.

    Each cz lands in the earliest layer after every earlier cz touching
    one of its qubits. One-qubit gates attach to the layer of the next
    cz on that qubit, or to a trailing epilogue layer without cz pairs.
    Concatenating the layers reproduces a dependency-equivalent circuit.
    """
    layers: list[Layer] = []
    avail = [0] * circuit.num_qubits
    pending: list[list[Gate]] = [[] for _ in range(circuit.num_qubits)]
    for gate in circuit.gates:
        if gate.is_cz:
            a, b = gate.qubits
            level = max(avail[a], avail[b])
            while len(layers) <= level:
                layers.append(Layer())
            layer = layers[level]
            layer.cz_pairs.append((min(a, b), max(a, b)))
            layer.pre_single_qubit.extend(pending[a])
            layer.pre_single_qubit.extend(pending[b])
            pending[a].clear()
            pending[b].clear()
            avail[a] = avail[b] = level + 1
        else:
            pending[gate.qubits[0]].append(gate)
    leftovers = [g for per_qubit in pending for g in per_qubit]
    if leftovers:
        layers.append(Layer(pre_single_qubit=leftovers))
    return layers


def reuse_analysis(layers: list[Layer]) -> ReusePlan:
    """Which qubits may stay in the entanglement zone between layers.

    A qubit qualifies at layer i when it interacts in layers i and i+1;
    it then keeps its trap and its next partner is brought to the other
    slot of the same pair. Two adjudication rules keep that realizable:
    at most one atom of a layer-i pair stays (unless the identical pair
    repeats), and at most one member of each layer-i+1 pair stays.
    """
    plan: ReusePlan = [set() for _ in layers]
    for i in range(len(layers) - 1):
        here, there = layers[i], layers[i + 1]
        here_qubits = here.qubits()
        candidates = here_qubits & there.qubits()
        next_pair_of = {q: pair for pair in there.cz_pairs for q in pair}
        flagged: set[int] = set()
        for a, b in here.cz_pairs:
            repeat = next_pair_of.get(a) == (min(a, b), max(a, b))
            if repeat:
                flagged.update((a, b))
            elif a in candidates and b in candidates:
                flagged.add(min(a, b))
            elif a in candidates:
                flagged.add(a)
            elif b in candidates:
                flagged.add(b)
        for a, b in there.cz_pairs:
            if a in flagged and b in flagged and next_pair_of.get(a) == next_pair_of.get(b):
                if (min(a, b), max(a, b)) not in here.cz_pairs:
                    flagged.discard(max(a, b))
        plan[i] = flagged
    return plan
