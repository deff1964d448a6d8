"""zonedc: a compiler from gate-level circuits to timed atom-rearrangement
instructions for zoned neutral-atom machines."""

from .arch import (
    Architecture,
    PairSlot,
    Position,
    TrapId,
    Zone,
    ZoneKind,
    default_architecture,
    load_architecture,
    load_architecture_file,
)
from .circuit import Circuit, Gate, Layer, parse_circuit, reuse_analysis, schedule
from .codegen import (
    Instruction,
    ValidationReport,
    default_initial_assignment,
    emit,
    format_instructions,
    parse_instructions,
    validate,
)
from .errors import (
    BudgetError,
    CapacityError,
    EmitError,
    MalformedSequenceError,
    ParseError,
    SchemaError,
    ZonedcError,
)
from .pipeline import CompileResult, CompileStats, compile_circuit
from .placement import HeuristicParams, PlacementTask, SearchNode, build_task, expand
from .routing import (
    Move,
    RearrangementStep,
    RoutingResult,
    choose_mode,
    compatible,
    group_moves,
)
from .search import SearchConfig, SearchOutcome, astar, ids
from .timing import MotionParams, move_time, step_time, total_time

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "BudgetError",
    "CapacityError",
    "Circuit",
    "CompileResult",
    "CompileStats",
    "EmitError",
    "Gate",
    "HeuristicParams",
    "Instruction",
    "Layer",
    "MalformedSequenceError",
    "MotionParams",
    "Move",
    "PairSlot",
    "ParseError",
    "PlacementTask",
    "Position",
    "RearrangementStep",
    "RoutingResult",
    "SchemaError",
    "SearchConfig",
    "SearchNode",
    "SearchOutcome",
    "TrapId",
    "ValidationReport",
    "Zone",
    "ZoneKind",
    "ZonedcError",
    "astar",
    "build_task",
    "choose_mode",
    "compatible",
    "compile_circuit",
    "default_architecture",
    "default_initial_assignment",
    "emit",
    "expand",
    "format_instructions",
    "group_moves",
    "ids",
    "load_architecture",
    "load_architecture_file",
    "move_time",
    "parse_circuit",
    "parse_instructions",
    "reuse_analysis",
    "schedule",
    "step_time",
    "total_time",
    "validate",
]
