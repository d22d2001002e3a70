"""The four neighbor-discovery protocols: BT, BTL, CRT, CRTL.

B = one-way beacon against synchronized clocks, CR = challenge-response on the
challenger's single clock. T = decide on time of flight against the range R,
TL = compare time-of-flight distance with the distance between the
authenticated locations.

Location checks run in the picosecond domain: the location distance is turned
into an expected flight time with the same rounding the channel uses, so a
direct line-of-sight exchange matches exactly even at zero tolerance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

from .messages import (
    AuthenticatedMessage,
    Beacon,
    Challenge,
    Nonce,
    Response,
    seal,
    verify,
)
from .model import PS_PER_S, SPEED_OF_LIGHT, NodeId, Position, distance, flight_ps


class Protocol(str, enum.Enum):
    BT = "BT"
    BTL = "BTL"
    CRT = "CRT"
    CRTL = "CRTL"

    @property
    def is_beacon(self) -> bool:
        return self in (Protocol.BT, Protocol.BTL)

    @property
    def uses_location(self) -> bool:
        return self in (Protocol.BTL, Protocol.CRTL)


class ConfigError(ValueError):
    pass


# Default wait for TL protocols, which have no range to derive one from.
TL_DEFAULT_WAIT_PS = 1_000_000_000


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: Protocol
    R: Optional[float] = None
    v: float = SPEED_OF_LIGHT
    eps_t: int = 1_000
    eps_d: float = 0.10
    eps_sync: int = 1_000
    proc_delay: int = 1_000_000
    timeout: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if not self.protocol.uses_location:
            if self.R is None or not self.R > 0:
                raise ConfigError("protocol.range_m must be > 0")
        elif self.R is not None and not self.R > 0:
            raise ConfigError("protocol.range_m must be > 0")
        if not self.v > 0:
            raise ConfigError("protocol.v_mps must be > 0")
        for name in ("eps_t", "eps_sync", "proc_delay"):
            if getattr(self, name) < 0:
                raise ConfigError(f"protocol.{name}_ps must be >= 0")
        if self.eps_d < 0:
            raise ConfigError("protocol.eps_d_m must be >= 0")
        if self.timeout is not None and self.timeout <= 0:
            raise ConfigError("protocol.timeout_ps must be > 0")

    @property
    def range_ps(self) -> int:
        return flight_ps(self.R, self.v)

    @property
    def dist_budget_ps(self) -> int:
        """eps_d expressed as one-way flight time, floored to whole ps."""
        return math.floor(self.eps_d / self.v * PS_PER_S + 1e-9)

    def wait_ps(self) -> int:
        """How long a decider waits, from session start, before giving up."""
        if self.timeout is not None:
            return self.timeout
        if self.protocol is Protocol.BT:
            return self.range_ps + self.eps_t + self.eps_sync
        if self.protocol is Protocol.CRT:
            return 2 * self.range_ps + self.proc_delay + self.eps_t
        extra = self.proc_delay if self.protocol is Protocol.CRTL else 0
        return TL_DEFAULT_WAIT_PS + extra


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class Measurement:
    verdict: Verdict
    reason: str
    elapsed_ps: Optional[int] = None
    bound_ps: Optional[int] = None
    d_tof_m: Optional[float] = None
    d_loc_m: Optional[float] = None


@dataclass(frozen=True)
class Decision:
    decider: NodeId
    subject: NodeId
    verdict: Verdict
    t_decided: int
    evidence: tuple[int, ...]
    measured: Measurement

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT


def _verdict(ok: bool) -> Verdict:
    return Verdict.ACCEPT if ok else Verdict.REJECT


def bt_decide(t_send_claimed: int, t_recv_local: int, cfg: ProtocolConfig) -> Measurement:
    elapsed = t_recv_local - t_send_claimed
    bound = cfg.range_ps + cfg.eps_t
    if elapsed < -cfg.eps_t:
        return Measurement(Verdict.REJECT, "anachronistic", elapsed, bound)
    ok = elapsed <= bound
    return Measurement(_verdict(ok), "ok" if ok else "too_far", elapsed, bound)


def btl_decide(
    t_send_claimed: int,
    loc_claimed: Position,
    t_recv_local: int,
    loc_self: Position,
    cfg: ProtocolConfig,
) -> Measurement:
    elapsed = t_recv_local - t_send_claimed
    d_loc = distance(loc_claimed, loc_self)
    d_tof = cfg.v * elapsed / PS_PER_S
    budget = cfg.dist_budget_ps
    if elapsed < -budget:
        return Measurement(Verdict.REJECT, "anachronistic", elapsed, budget, d_tof, d_loc)
    expected = flight_ps(d_loc, cfg.v)
    ok = abs(elapsed - expected) <= budget
    return Measurement(_verdict(ok), "ok" if ok else "mismatch", elapsed, expected, d_tof, d_loc)


def crt_decide(t_challenge: int, t_response_recv: int, cfg: ProtocolConfig) -> Measurement:
    rtt_net = t_response_recv - t_challenge - cfg.proc_delay
    bound = 2 * cfg.range_ps + cfg.eps_t
    if rtt_net < -cfg.eps_t:
        return Measurement(Verdict.REJECT, "anachronistic", rtt_net, bound)
    ok = rtt_net <= bound
    return Measurement(_verdict(ok), "ok" if ok else "too_far", rtt_net, bound)


def crtl_decide(
    t_challenge: int,
    t_response_recv: int,
    loc_claimed: Position,
    loc_self: Position,
    cfg: ProtocolConfig,
) -> Measurement:
    rtt_net = t_response_recv - t_challenge - cfg.proc_delay
    d_loc = distance(loc_claimed, loc_self)
    d_tof = cfg.v * rtt_net / 2 / PS_PER_S
    # round trip: tolerate twice the one-way budget so the distance error stays <= eps_d
    budget = math.floor(2 * cfg.eps_d / cfg.v * PS_PER_S + 1e-9)
    if rtt_net < -budget:
        return Measurement(Verdict.REJECT, "anachronistic", rtt_net, budget, d_tof, d_loc)
    expected = 2 * flight_ps(d_loc, cfg.v)
    ok = abs(rtt_net - expected) <= budget
    return Measurement(_verdict(ok), "ok" if ok else "mismatch", rtt_net, expected, d_tof, d_loc)


# -- session state machine ---------------------------------------------------


@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class AwaitingBeacon:
    t_start: int


@dataclass(frozen=True)
class AwaitingResponse:
    nonce: Nonce
    t_challenge: int  # challenger's local clock


@dataclass(frozen=True)
class Done:
    decision: Decision


SessionState = Union[Idle, AwaitingBeacon, AwaitingResponse, Done]


@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class Received:
    dv_id: int
    msg: AuthenticatedMessage


@dataclass(frozen=True)
class Timeout:
    pass


@dataclass(frozen=True)
class Send:
    sender: NodeId
    msg: AuthenticatedMessage
    t_send: int


@dataclass(frozen=True)
class SetTimer:
    t: int


@dataclass(frozen=True)
class Decide:
    decision: Decision


@dataclass
class NodeContext:
    """What a correct node knows when its state machine runs."""

    node: NodeId
    pos: Position
    clock_offset: int
    now: int
    nonces: object = field(repr=False, default=None)

    @property
    def local_now(self) -> int:
        return self.now + self.clock_offset


def drive(state: SessionState, event, cfg: ProtocolConfig, ctx: NodeContext,
          initiator: NodeId, responder: NodeId):
    """Advance one session's state machine.

    For beacon protocols the responder decides about the initiator; for
    challenge-response protocols the initiator (challenger) decides about the
    responder. Returns ``(new_state, actions)``.
    """
    if isinstance(state, Done):
        return state, []
    proto = cfg.protocol
    loc = ctx.pos if proto.uses_location else None

    if isinstance(event, Start):
        if proto.is_beacon:
            if ctx.node == initiator:
                body = Beacon(initiator, ctx.local_now, loc)
                return state, [Send(initiator, seal(initiator, body), ctx.now)]
            return AwaitingBeacon(ctx.now), [SetTimer(ctx.now + cfg.wait_ps() + 1)]
        nonce = ctx.nonces.fresh(initiator)
        msg = seal(initiator, Challenge(initiator, nonce))
        return (
            AwaitingResponse(nonce, ctx.local_now),
            [Send(initiator, msg, ctx.now), SetTimer(ctx.now + cfg.wait_ps() + 1)],
        )

    if isinstance(event, Timeout):
        subject = initiator if proto.is_beacon else responder
        m = Measurement(Verdict.REJECT, "timeout")
        d = Decision(ctx.node, subject, Verdict.REJECT, ctx.now, (), m)
        return Done(d), [Decide(d)]

    if isinstance(event, Received):
        body = event.msg.body
        if isinstance(state, AwaitingBeacon) and isinstance(body, Beacon):
            if body.sender != initiator or not verify(event.msg, initiator):
                return state, []
            if proto is Protocol.BT:
                m = bt_decide(body.t_send_claimed, ctx.local_now, cfg)
            else:
                if body.loc_claimed is None:
                    return state, []
                m = btl_decide(body.t_send_claimed, body.loc_claimed, ctx.local_now, ctx.pos, cfg)
            d = Decision(ctx.node, initiator, m.verdict, ctx.now, (event.dv_id,), m)
            return Done(d), [Decide(d)]
        if isinstance(state, AwaitingResponse) and isinstance(body, Response):
            if (body.responder != responder or body.echoed_nonce != state.nonce
                    or not verify(event.msg, responder)):
                return state, []
            if proto is Protocol.CRT:
                m = crt_decide(state.t_challenge, ctx.local_now, cfg)
            else:
                if body.loc_claimed is None:
                    return state, []
                m = crtl_decide(state.t_challenge, ctx.local_now, body.loc_claimed, ctx.pos, cfg)
            d = Decision(ctx.node, responder, m.verdict, ctx.now, (event.dv_id,), m)
            return Done(d), [Decide(d)]
    return state, []


def respond(msg: AuthenticatedMessage, cfg: ProtocolConfig, ctx: NodeContext) -> list[Send]:
    """Responder side of CR: answer every verified challenge after proc_delay."""
    body = msg.body
    if cfg.protocol.is_beacon or not isinstance(body, Challenge):
        return []
    if body.challenger == ctx.node or not verify(msg, body.challenger):
        return []
    loc = ctx.pos if cfg.protocol.uses_location else None
    reply = seal(ctx.node, Response(ctx.node, body.nonce, loc))
    return [Send(ctx.node, reply, ctx.now + cfg.proc_delay)]
