"""Zoned architecture geometry: trap grids, zones, and spatial queries.

An architecture is a list of rectangular zones. Storage zones hold one
trap per grid point; entanglement zones hold a horizontal pair of traps
per grid point (left and right slot, pair_offset apart), and only the
two traps of one pair are close enough to interact.

Coordinates: x grows rightward, y grows downward. The conventional
layout puts the entanglement zone on top (small y) and the storage zone
below it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterator, Mapping

from .errors import SchemaError
from .timing import MotionParams


class ZoneKind(str, Enum):
    STORAGE = "storage"
    ENTANGLEMENT = "entanglement"


class PairSlot(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    NONE = "none"


@dataclass(frozen=True, order=True)
class Position:
    """A point in the plane, micrometers."""

    x: float
    y: float

    def distance(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class TrapId:
    """Index of one trap: zone, grid row/col, and pair slot.

    pair_slot is NONE exactly for storage zones.
    """

    zone_index: int
    row: int
    col: int
    pair_slot: PairSlot = PairSlot.NONE


@dataclass(frozen=True)
class Zone:
    kind: ZoneKind
    origin: Position
    rows: int
    cols: int
    row_pitch: float
    col_pitch: float
    pair_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise SchemaError(f"zone must have at least one row and column, got {self.rows}x{self.cols}")
        if self.row_pitch <= 0 or self.col_pitch <= 0:
            raise SchemaError("zone pitches must be positive")
        if self.kind is ZoneKind.ENTANGLEMENT:
            if not 0 < self.pair_offset < self.col_pitch:
                raise SchemaError(
                    f"pair_offset must lie in (0, col_pitch), got {self.pair_offset} with col_pitch {self.col_pitch}"
                )
        elif self.pair_offset:
            raise SchemaError("storage zones have no pair_offset")

    @property
    def width(self) -> float:
        base = (self.cols - 1) * self.col_pitch
        return base + self.pair_offset if self.kind is ZoneKind.ENTANGLEMENT else base

    @property
    def height(self) -> float:
        return (self.rows - 1) * self.row_pitch

    @property
    def x_max(self) -> float:
        return self.origin.x + self.width

    @property
    def y_max(self) -> float:
        return self.origin.y + self.height


@dataclass(frozen=True)
class Architecture:
    """Immutable geometric model of one machine. Safe to share."""

    name: str
    zones: tuple[Zone, ...]
    interaction_radius: float = 2.5
    min_zone_separation: float = 21.0
    min_pair_gap: float = 10.0
    motion: MotionParams = field(default_factory=MotionParams)

    def __post_init__(self) -> None:
        if not self.zones:
            raise SchemaError("architecture needs at least one zone")
        if self.interaction_radius <= 0:
            raise SchemaError("interaction_radius must be positive")
        self._validate_zones()

    def _validate_zones(self) -> None:
        for i, zone in enumerate(self.zones):
            if zone.kind is ZoneKind.ENTANGLEMENT:
                gap = zone.col_pitch - zone.pair_offset
                if gap < self.min_pair_gap or zone.row_pitch < self.min_pair_gap:
                    raise SchemaError(
                        f"zone {i}: traps of adjacent pairs come closer than {self.min_pair_gap} um"
                    )
                if zone.pair_offset > self.interaction_radius:
                    raise SchemaError(
                        f"zone {i}: pair_offset {zone.pair_offset} exceeds interaction radius"
                    )
        for i, a in enumerate(self.zones):
            for j in range(i + 1, len(self.zones)):
                b = self.zones[j]
                x_overlap = a.origin.x <= b.x_max and b.origin.x <= a.x_max
                y_overlap = a.origin.y <= b.y_max and b.origin.y <= a.y_max
                if x_overlap and y_overlap:
                    raise SchemaError(f"zones {i} and {j} overlap")
                if {a.kind, b.kind} == {ZoneKind.STORAGE, ZoneKind.ENTANGLEMENT} and x_overlap:
                    gap = max(a.origin.y, b.origin.y) - min(a.y_max, b.y_max)
                    if gap < self.min_zone_separation:
                        raise SchemaError(
                            f"zones {i} and {j} are {gap} um apart, need {self.min_zone_separation}"
                        )

    # -- spatial queries ---------------------------------------------------

    def zone(self, trap: TrapId) -> Zone:
        if not 0 <= trap.zone_index < len(self.zones):
            raise IndexError(f"zone index {trap.zone_index} out of range")
        return self.zones[trap.zone_index]

    def trap_position(self, trap: TrapId) -> Position:
        """Coordinates of a trap. Left and right slots differ by pair_offset in x."""
        zone = self.zone(trap)
        if not (0 <= trap.row < zone.rows and 0 <= trap.col < zone.cols):
            raise IndexError(f"trap {trap} outside zone grid {zone.rows}x{zone.cols}")
        x = zone.origin.x + trap.col * zone.col_pitch
        y = zone.origin.y + trap.row * zone.row_pitch
        if zone.kind is ZoneKind.ENTANGLEMENT:
            if trap.pair_slot is PairSlot.NONE:
                raise IndexError("entanglement traps need a pair slot")
            if trap.pair_slot is PairSlot.RIGHT:
                x += zone.pair_offset
        elif trap.pair_slot is not PairSlot.NONE:
            raise IndexError("storage traps have no pair slot")
        return Position(x, y)

    def pair_partner(self, trap: TrapId) -> TrapId:
        """The opposite slot of the same entanglement pair."""
        if self.zone(trap).kind is not ZoneKind.ENTANGLEMENT:
            raise ValueError(f"trap {trap} is not in an entanglement zone")
        flipped = PairSlot.RIGHT if trap.pair_slot is PairSlot.LEFT else PairSlot.LEFT
        return TrapId(trap.zone_index, trap.row, trap.col, flipped)

    def traps(self) -> Iterator[TrapId]:
        for zi, zone in enumerate(self.zones):
            for row in range(zone.rows):
                for col in range(zone.cols):
                    if zone.kind is ZoneKind.ENTANGLEMENT:
                        yield TrapId(zi, row, col, PairSlot.LEFT)
                        yield TrapId(zi, row, col, PairSlot.RIGHT)
                    else:
                        yield TrapId(zi, row, col)

    def storage_traps(self) -> Iterator[TrapId]:
        for trap in self.traps():
            if self.zones[trap.zone_index].kind is ZoneKind.STORAGE:
                yield trap

    @property
    def entanglement_zone_index(self) -> int:
        """Index of the first entanglement zone (routing targets only this one)."""
        for i, zone in enumerate(self.zones):
            if zone.kind is ZoneKind.ENTANGLEMENT:
                return i
        raise SchemaError("architecture has no entanglement zone")

    def entanglement_pairs(self) -> Iterator[tuple[TrapId, TrapId]]:
        zi = self.entanglement_zone_index
        zone = self.zones[zi]
        for row in range(zone.rows):
            for col in range(zone.cols):
                left = TrapId(zi, row, col, PairSlot.LEFT)
                yield left, self.pair_partner(left)

    def num_entanglement_pairs(self) -> int:
        zone = self.zones[self.entanglement_zone_index]
        return zone.rows * zone.cols

    def zone_label(self, zone_index: int) -> str:
        """Stable human-readable name for a zone, used in emitted instructions."""
        kind = self.zones[zone_index].kind.value
        same_kind = [i for i, z in enumerate(self.zones) if z.kind == self.zones[zone_index].kind]
        if len(same_kind) == 1:
            return kind
        return f"{kind}{same_kind.index(zone_index)}"

    @property
    def min_trap_spacing(self) -> float:
        """Finest distance between two traps anywhere on the machine.

        Doubles as the minimal separation that parallel transport lines must
        keep from one another.
        """
        spacing = math.inf
        for zone in self.zones:
            spacing = min(spacing, zone.row_pitch)
            if zone.kind is ZoneKind.ENTANGLEMENT:
                spacing = min(spacing, zone.pair_offset, zone.col_pitch - zone.pair_offset)
            else:
                spacing = min(spacing, zone.col_pitch)
        return spacing

    @property
    def bounding_box(self) -> tuple[Position, Position]:
        x0 = min(z.origin.x for z in self.zones)
        y0 = min(z.origin.y for z in self.zones)
        x1 = max(z.x_max for z in self.zones)
        y1 = max(z.y_max for z in self.zones)
        return Position(x0, y0), Position(x1, y1)

    def trap_rows(self) -> list[float]:
        """Sorted y coordinates that carry at least one trap."""
        ys = {zone.origin.y + r * zone.row_pitch for zone in self.zones for r in range(zone.rows)}
        return sorted(ys)

    def trap_cols(self) -> list[float]:
        """Sorted x coordinates that carry at least one trap."""
        xs: set[float] = set()
        for zone in self.zones:
            for c in range(zone.cols):
                x = zone.origin.x + c * zone.col_pitch
                xs.add(x)
                if zone.kind is ZoneKind.ENTANGLEMENT:
                    xs.add(x + zone.pair_offset)
        return sorted(xs)

    def trap_at(self, position: Position, tol: float = 1e-6) -> TrapId | None:
        """The trap at a position, or None. Grid arithmetic, no table."""
        for zi, zone in enumerate(self.zones):
            dy = position.y - zone.origin.y
            row = round(dy / zone.row_pitch)
            if not (0 <= row < zone.rows and abs(dy - row * zone.row_pitch) <= tol):
                continue
            dx = position.x - zone.origin.x
            if zone.kind is ZoneKind.STORAGE:
                col = round(dx / zone.col_pitch)
                if 0 <= col < zone.cols and abs(dx - col * zone.col_pitch) <= tol:
                    return TrapId(zi, row, col)
            else:
                for slot, off in ((PairSlot.LEFT, 0.0), (PairSlot.RIGHT, zone.pair_offset)):
                    col = round((dx - off) / zone.col_pitch)
                    if 0 <= col < zone.cols and abs(dx - off - col * zone.col_pitch) <= tol:
                        return TrapId(zi, row, col, slot)
        return None


# -- spec documents --------------------------------------------------------

_ZONE_KEYS = {"kind", "origin_x", "origin_y", "rows", "cols", "row_pitch", "col_pitch", "pair_offset"}


def load_architecture(spec: Mapping | str) -> Architecture:
    """Build a validated Architecture from a spec document.

    Accepts an already-parsed mapping or a JSON string. See the README
    for the schema; all lengths are micrometers as decimal numbers.
    """
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"architecture spec is not valid JSON: {exc}") from exc
    if not isinstance(spec, Mapping):
        raise SchemaError(f"architecture spec must be a mapping, got {type(spec).__name__}")
    if "zones" not in spec or not isinstance(spec["zones"], list) or not spec["zones"]:
        raise SchemaError("architecture spec needs a non-empty 'zones' list")

    zones = []
    for i, zspec in enumerate(spec["zones"]):
        if not isinstance(zspec, Mapping):
            raise SchemaError(f"zone {i} must be a mapping")
        unknown = set(zspec) - _ZONE_KEYS
        if unknown:
            raise SchemaError(f"zone {i} has unknown fields {sorted(unknown)}")
        try:
            kind = ZoneKind(zspec["kind"])
        except (KeyError, ValueError):
            raise SchemaError(f"zone {i}: kind must be 'storage' or 'entanglement'") from None
        try:
            zones.append(
                Zone(
                    kind=kind,
                    origin=Position(float(zspec.get("origin_x", 0.0)), float(zspec.get("origin_y", 0.0))),
                    rows=int(zspec["rows"]),
                    cols=int(zspec["cols"]),
                    row_pitch=float(zspec["row_pitch"]),
                    col_pitch=float(zspec["col_pitch"]),
                    pair_offset=float(zspec.get("pair_offset", 0.0)),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"zone {i} is missing field {exc}") from None

    motion_spec = spec.get("motion", {})
    if not isinstance(motion_spec, Mapping):
        raise SchemaError("'motion' must be a mapping")
    motion = MotionParams(
        jerk=float(motion_spec.get("jerk_um_per_us3", MotionParams.jerk)),
        v_max=float(motion_spec.get("max_speed_um_per_us", MotionParams.v_max)),
        transfer_time=float(motion_spec.get("transfer_time_us", MotionParams.transfer_time)),
    )
    return Architecture(
        name=str(spec.get("name", "unnamed")),
        zones=tuple(zones),
        interaction_radius=float(spec.get("interaction_radius", 2.5)),
        min_zone_separation=float(spec.get("min_zone_separation", 21.0)),
        min_pair_gap=float(spec.get("min_pair_gap", 10.0)),
        motion=motion,
    )


def load_architecture_file(path: str) -> Architecture:
    with open(path, encoding="utf-8") as fh:
        return load_architecture(fh.read())


def default_architecture() -> Architecture:
    """The bundled 400 x 400 um machine: 73x101 storage grid above-described,
    10x34 entanglement pair grid, 21 um zone separation."""
    text = resources.files("zonedc.data").joinpath("default_arch.json").read_text(encoding="utf-8")
    return load_architecture(text)
