"""Static wireless world: geometry, roles, directed link schedules, NLOS delays, clocks.

All times are integer picoseconds. Distances and speeds are floats; a delay is
rounded half-even to the picosecond exactly once, when it is computed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

PS_PER_S = 10**12
SPEED_OF_LIGHT = 299_792_458.0
T_MAX = 2**63 - 1  # "forever" as an interval end

NodeId = str
Pair = tuple[NodeId, NodeId]
Interval = tuple[int, int]


class WorldError(ValueError):
    """Raised for malformed or inconsistent world descriptions."""


def to_ps(seconds: float) -> int:
    """Round a duration in seconds to integer picoseconds (half-even)."""
    return round(seconds * PS_PER_S)


def flight_ps(distance_m: float, speed_mps: float) -> int:
    return round(distance_m / speed_mps * PS_PER_S)


class Role(str, enum.Enum):
    CORRECT = "correct"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise WorldError(f"non-finite position ({self.x}, {self.y})")


@dataclass(frozen=True)
class NodeSpec:
    id: NodeId
    pos: Position
    role: Role = Role.CORRECT
    clock_offset: int = 0

    @property
    def is_correct(self) -> bool:
        return self.role is Role.CORRECT


@dataclass(frozen=True)
class ChannelParams:
    v: float = SPEED_OF_LIGHT
    v_adv: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not (self.v > 0 and self.v_adv > 0):
            raise WorldError("channel speeds must be > 0")


def _check_intervals(pair: Pair, intervals: Sequence[Interval]) -> tuple[Interval, ...]:
    out = tuple((int(s), int(e)) for s, e in intervals)
    prev_end = None
    for s, e in out:
        if s >= e:
            raise WorldError(f"link {pair[0]}->{pair[1]}: empty interval [{s}, {e})")
        if prev_end is not None and s < prev_end:
            raise WorldError(f"link {pair[0]}->{pair[1]}: intervals overlap or are unsorted")
        prev_end = e
    return out


@dataclass(frozen=True)
class LinkSchedule:
    """Directed up-intervals ``[start, end)`` per ordered pair.

    Pairs without an entry take ``default_up`` (always up or always down).
    """

    intervals: Mapping[Pair, tuple[Interval, ...]] = field(default_factory=dict)
    default_up: bool = False

    def __post_init__(self):
        checked = {pair: _check_intervals(pair, iv) for pair, iv in self.intervals.items()}
        object.__setattr__(self, "intervals", checked)

    def up_intervals(self, src: NodeId, dst: NodeId) -> tuple[Interval, ...]:
        iv = self.intervals.get((src, dst))
        if iv is None:
            return ((0, T_MAX),) if self.default_up else ()
        return iv

    def with_overrides(self, overrides: Mapping[Pair, Sequence[Interval]]) -> "LinkSchedule":
        merged = dict(self.intervals)
        merged.update({p: tuple(map(tuple, iv)) for p, iv in overrides.items()})
        return LinkSchedule(merged, self.default_up)


def link_up_over(sched: LinkSchedule, src: NodeId, dst: NodeId, interval: Interval) -> bool:
    """True iff ``src -> dst`` is up at every instant of the closed interval."""
    t0, t1 = interval
    if t0 > t1:
        raise ValueError("interval start after end")
    for s, e in sched.up_intervals(src, dst):
        if s <= t0 and t1 < e:
            return True
    return False


@dataclass(frozen=True)
class NlosMap:
    delays: Mapping[Pair, int] = field(default_factory=dict)

    def __post_init__(self):
        for pair, d in self.delays.items():
            if int(d) != d or d < 0:
                raise WorldError(f"nlos {pair[0]}->{pair[1]} must be a non-negative integer ps")
        object.__setattr__(self, "delays", {p: int(d) for p, d in self.delays.items() if d})

    def get(self, src: NodeId, dst: NodeId) -> int:
        return int(self.delays.get((src, dst), 0))


@dataclass(frozen=True)
class WorldConfig:
    nodes: tuple[NodeSpec, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)
    links: LinkSchedule = field(default_factory=LinkSchedule)
    nlos: NlosMap = field(default_factory=NlosMap)
    radio_range: float = 1000.0
    sync_error: Optional[int] = None
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "_index", {n.id: n for n in self.nodes})
        validate_world(self)

    def node(self, node_id: NodeId) -> NodeSpec:
        try:
            return self._index[node_id]
        except KeyError:
            raise WorldError(f"unknown node id {node_id!r}") from None

    def __contains__(self, node_id: NodeId) -> bool:
        return node_id in self._index

    @property
    def ids(self) -> list[NodeId]:
        return [n.id for n in self.nodes]


def validate_world(world: WorldConfig) -> None:
    if len(world.nodes) < 2:
        raise WorldError("world needs at least 2 nodes")
    if len(world._index) != len(world.nodes):
        raise WorldError("node ids must be unique")
    if not world.radio_range > 0:
        raise WorldError("world.radio_range_m must be > 0")
    known = world._index
    for src, dst in list(world.links.intervals) + list(world.nlos.delays):
        for nid in (src, dst):
            if nid not in known:
                raise WorldError(f"link/nlos entry references unknown node {nid!r}")
    if world.sync_error is not None:
        for n in world.nodes:
            if n.is_correct and abs(n.clock_offset) > world.sync_error:
                raise WorldError(
                    f"node {n.id!r}: clock offset {n.clock_offset} ps exceeds declared sync error"
                )


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def propagation_delay(a: NodeId, b: NodeId, world: WorldConfig) -> int:
    """Over-the-air delay ``a -> b`` in ps: rounded LOS flight plus the pair's NLOS term."""
    if a == b:
        raise WorldError("propagation delay needs two distinct nodes")
    na, nb = world.node(a), world.node(b)
    return flight_ps(distance(na.pos, nb.pos), world.channel.v) + world.nlos.get(a, b)


# -- obstacles -------------------------------------------------------------


@dataclass(frozen=True)
class Obstacle:
    """A wall segment. ``nlos_delay`` None blocks; otherwise the link stays up, delayed."""

    a: Position
    b: Position
    nlos_delay: Optional[int] = None

    def __post_init__(self):
        if self.a == self.b:
            raise WorldError("degenerate (zero-length) obstacle segment")
        if self.nlos_delay is not None and self.nlos_delay < 0:
            raise WorldError("obstacle nlos delay must be >= 0")


def _orient(p: Position, q: Position, r: Position) -> float:
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)


def _on_segment(p: Position, q: Position, r: Position) -> bool:
    return min(p.x, q.x) <= r.x <= max(p.x, q.x) and min(p.y, q.y) <= r.y <= max(p.y, q.y)


def segments_intersect(p1: Position, p2: Position, q1: Position, q2: Position) -> bool:
    """Closed-segment intersection, touching and collinear overlap included."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def build_schedule_from_geometry(
    nodes: Iterable[NodeSpec], radio_range: float, obstacles: Sequence[Obstacle] = ()
) -> tuple[LinkSchedule, NlosMap]:
    """Derive always-up / always-down links and NLOS delays from line of sight.

    A blocking obstacle on the segment wins over any delaying one; among
    delaying obstacles the largest delay applies.
    """
    nodes = list(nodes)
    intervals: dict[Pair, tuple[Interval, ...]] = {}
    nlos: dict[Pair, int] = {}
    for a in nodes:
        for b in nodes:
            if a.id == b.id:
                continue
            pair = (a.id, b.id)
            if distance(a.pos, b.pos) > radio_range:
                intervals[pair] = ()
                continue
            blocked = False
            delay = 0
            for ob in obstacles:
                if segments_intersect(a.pos, b.pos, ob.a, ob.b):
                    if ob.nlos_delay is None:
                        blocked = True
                    else:
                        delay = max(delay, ob.nlos_delay)
            intervals[pair] = () if blocked else ((0, T_MAX),)
            if delay and not blocked:
                nlos[pair] = delay
    return LinkSchedule(intervals, default_up=False), NlosMap(nlos)
