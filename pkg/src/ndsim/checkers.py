"""Post-hoc trace checks for ND correctness and availability.

Correctness is reported as two properties. Distance-correctness: a T-protocol
never accepts a correct node beyond its range (plus tolerance). Link-correctness:
an accepted neighbor is backed by at least one direct delivery. Availability:
an intended pair whose preconditions hold, judged from ground truth and never
from the trace, gets an Accept by the end of its window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .engine import Session, Trace, causal_chain
from .model import PS_PER_S, WorldConfig, distance, link_up_over, propagation_delay
from .protocols import Decision, Protocol, ProtocolConfig


class CheckError(ValueError):
    pass


class ViolationKind(str, enum.Enum):
    DISTANCE = "distance_correctness"
    LINK = "link_correctness"
    AVAILABILITY = "availability"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    decision: Optional[Decision]
    actual_distance_m: float
    chain_length: Optional[int] = None
    window: Optional[tuple[int, int]] = None
    session: Optional[int] = None

    def key(self) -> tuple:
        d = self.decision
        return (
            self.kind.value,
            None if d is None else (d.decider, d.subject, d.verdict.value, d.t_decided, d.evidence),
            round(self.actual_distance_m, 9),
            self.chain_length,
            self.window,
            self.session,
        )


@dataclass
class PropertyVerdict:
    property: str
    holds: bool
    violations: list[Violation] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    applicable: bool = True
    unmet: list[int] = field(default_factory=list)  # sessions whose preconditions failed


def _check_world(trace: Trace, world: WorldConfig) -> None:
    for dv in trace.deliveries:
        if dv.receiver not in world:
            raise CheckError(f"trace mentions node {dv.receiver!r} missing from world")
    for tx in trace.transmissions:
        if tx.sender not in world:
            raise CheckError(f"trace mentions node {tx.sender!r} missing from world")


def _correct_accepts(trace: Trace, world: WorldConfig) -> list[Decision]:
    out = []
    for d in trace.decisions:
        if d.accepted and world.node(d.decider).is_correct and world.node(d.subject).is_correct:
            out.append(d)
    return out


def distance_bound_m(cfg: ProtocolConfig) -> float:
    slack_ps = cfg.eps_t + 1  # +1 ps absorbs per-hop rounding
    if cfg.protocol is Protocol.BT:
        slack_ps += cfg.eps_sync  # a legitimately skewed clock may already look this much closer
    return cfg.R + cfg.v * slack_ps / PS_PER_S


def check_distance_correctness(trace: Trace, world: WorldConfig, cfg: ProtocolConfig) -> PropertyVerdict:
    _check_world(trace, world)
    if cfg.protocol.uses_location:
        return PropertyVerdict(ViolationKind.DISTANCE.value, True, applicable=False,
                               stats={"note": "not-applicable: TL protocols have no range"})
    bound = distance_bound_m(cfg)
    accepts = _correct_accepts(trace, world)
    violations = []
    for d in accepts:
        actual = distance(world.node(d.decider).pos, world.node(d.subject).pos)
        if actual > bound:
            chain = max(len(causal_chain(trace, e)) for e in d.evidence)
            violations.append(Violation(ViolationKind.DISTANCE, d, actual, chain))
    return PropertyVerdict(ViolationKind.DISTANCE.value, not violations, violations,
                           {"accepts": len(accepts), "bound_m": bound})


def check_link_correctness(trace: Trace, world: WorldConfig, cfg: ProtocolConfig) -> PropertyVerdict:
    _check_world(trace, world)
    accepts = _correct_accepts(trace, world)
    violations = []
    for d in accepts:
        lengths = [len(causal_chain(trace, e)) for e in d.evidence]
        if lengths and min(lengths) > 1:
            actual = distance(world.node(d.decider).pos, world.node(d.subject).pos)
            violations.append(Violation(ViolationKind.LINK, d, actual, min(lengths)))
    return PropertyVerdict(ViolationKind.LINK.value, not violations, violations,
                           {"accepts": len(accepts)})


def session_windows(s: Session, world: WorldConfig, cfg: ProtocolConfig) -> list[tuple[str, str, int, int]]:
    """Directed link windows a session needs: ``(src, dst, t0, t1)``."""
    a, b = s.initiator, s.responder
    f_ab = propagation_delay(a, b, world)
    if cfg.protocol.is_beacon:
        return [(a, b, s.t_start, s.t_start + f_ab)]
    t_resp = s.t_start + f_ab + cfg.proc_delay
    f_ba = propagation_delay(b, a, world)
    return [(a, b, s.t_start, s.t_start + f_ab), (b, a, t_resp, t_resp + f_ba)]


def availability_preconditions(s: Session, world: WorldConfig, cfg: ProtocolConfig) -> list[str]:
    """Reasons the session is not owed an Accept; empty when all preconditions hold."""
    na, nb = world.node(s.initiator), world.node(s.responder)
    unmet = []
    if not (na.is_correct and nb.is_correct):
        unmet.append("non-correct participant")
    if not cfg.protocol.uses_location and distance(na.pos, nb.pos) > cfg.R:
        unmet.append("beyond range")
    for src, dst, t0, t1 in session_windows(s, world, cfg):
        if not link_up_over(world.links, src, dst, (t0, t1)):
            unmet.append(f"link {src}->{dst} down in window")
    if cfg.protocol.is_beacon and abs(na.clock_offset - nb.clock_offset) > cfg.eps_sync:
        unmet.append("clocks not synchronized")
    return unmet


def check_availability(trace: Trace, world: WorldConfig, sessions: Sequence[Session],
                       cfg: ProtocolConfig, intended: Optional[Sequence[int]] = None) -> PropertyVerdict:
    """``intended`` lists the session indexes declared as legitimate pairs (default: all)."""
    _check_world(trace, world)
    idxs = range(len(sessions)) if intended is None else intended
    violations, unmet = [], []
    met = 0
    for i in idxs:
        if not 0 <= i < len(sessions):
            raise CheckError(f"intended session {i} not in scenario")
        s = sessions[i]
        if availability_preconditions(s, world, cfg):
            unmet.append(i)
            continue
        met += 1
        windows = session_windows(s, world, cfg)
        w_end = windows[-1][3]
        decider, subject = (s.responder, s.initiator) if cfg.protocol.is_beacon else (s.initiator, s.responder)
        ok = any(
            d.accepted and d.decider == decider and d.subject == subject and s.t_start <= d.t_decided <= w_end
            for d in trace.decisions
        )
        if not ok:
            actual = distance(world.node(decider).pos, world.node(subject).pos)
            violations.append(Violation(ViolationKind.AVAILABILITY, _decision_for(trace, decider, subject),
                                        actual, window=(s.t_start, w_end), session=i))
    return PropertyVerdict(ViolationKind.AVAILABILITY.value, not violations, violations,
                           {"intended": len(list(idxs)), "preconditions_met": met,
                            "precondition_unmet": len(unmet)}, unmet=unmet)


def _decision_for(trace: Trace, decider, subject) -> Optional[Decision]:
    for d in trace.decisions:
        if d.decider == decider and d.subject == subject:
            return d
    return None
