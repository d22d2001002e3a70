"""External relay adversary.

Adversarial nodes hold no keys. They overhear what their links deliver and
retransmit it verbatim, never sooner than ``delta_r`` after the overheard
arrival. A wormhole counts as one relay action: the entry node pays the relay
delay, the tunnel adds its own flight time, and the exit retransmits on arrival.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Union

from .messages import MESSAGE_KINDS, AuthenticatedMessage
from .model import NodeId, WorldConfig, WorldError, distance, flight_ps


@dataclass(frozen=True)
class RelayAll:
    """Rebroadcast everything overheard, relays included (can echo forever)."""

    label = "relay_all"


@dataclass(frozen=True)
class MinDelay:
    """Rebroadcast every first-hop message at exactly ``t_arrival + delta_r``."""

    label = "min_delay"


@dataclass(frozen=True)
class OneDirection:
    src: NodeId
    dst: NodeId

    @property
    def label(self) -> str:
        return f"one_direction({self.src}->{self.dst})"


@dataclass(frozen=True)
class Selective:
    kinds: FrozenSet[str]

    def __post_init__(self):
        object.__setattr__(self, "kinds", frozenset(self.kinds))
        bad = self.kinds - set(MESSAGE_KINDS)
        if bad:
            raise ValueError(f"unknown message kinds {sorted(bad)}")

    @property
    def label(self) -> str:
        return "selective(" + ",".join(sorted(self.kinds)) + ")"


@dataclass(frozen=True)
class Wormhole:
    entry: NodeId
    exit: NodeId
    bidirectional: bool = False

    def __post_init__(self):
        if self.entry == self.exit:
            raise ValueError("wormhole entry and exit must differ")

    @property
    def label(self) -> str:
        arrow = "<->" if self.bidirectional else "->"
        return f"wormhole({self.entry}{arrow}{self.exit})"


RelayStrategy = Union[RelayAll, MinDelay, OneDirection, Selective, Wormhole]


@dataclass(frozen=True)
class AdversaryConfig:
    """``delta_r`` None means an infinitely slow adversary: it never relays.

    ``hold`` is the delay the adversary actually applies (>= delta_r); it
    defaults to delta_r. MinDelay ignores it.
    """

    members: FrozenSet[NodeId]
    delta_r: Optional[int]
    strategy: RelayStrategy = field(default_factory=MinDelay)
    tunnel_extra: int = 0
    hold: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        if self.tunnel_extra < 0:
            raise ValueError("adversary.tunnel_extra_ps must be >= 0")
        if self.hold is not None and self.delta_r is not None and self.hold < self.delta_r:
            raise ValueError("adversary.hold_ps must be >= delta_r_ps")
        if isinstance(self.strategy, Wormhole):
            for n in (self.strategy.entry, self.strategy.exit):
                if n not in self.members:
                    raise ValueError(f"wormhole endpoint {n!r} is not an adversary member")

    @property
    def active(self) -> bool:
        return self.delta_r is not None

    def relay_delay(self) -> int:
        if isinstance(self.strategy, MinDelay) or self.hold is None:
            return self.delta_r
        return self.hold

    def reaction_offset(self) -> int:
        """How far before an arrival the adversary may already act (<= 0)."""
        return min(0, self.delta_r) if self.active else 0


def check_adversary(cfg: AdversaryConfig, world: WorldConfig) -> None:
    for m in cfg.members:
        if world.node(m).is_correct:
            raise WorldError(f"adversary member {m!r} is not an adversarial node")


def tunnel_delay(entry: NodeId, exit: NodeId, world: WorldConfig, cfg: AdversaryConfig) -> int:
    if entry == exit:
        raise ValueError("tunnel entry and exit must differ")
    a, b = world.node(entry), world.node(exit)
    if a.is_correct or b.is_correct:
        raise WorldError("tunnel endpoints must be adversarial nodes")
    return flight_ps(distance(a.pos, b.pos), world.channel.v_adv) + cfg.tunnel_extra


@dataclass(frozen=True)
class RelayRequest:
    sender: NodeId
    msg: AuthenticatedMessage
    t_send: int
    parent: int
    tunnel_to: Optional[NodeId] = None


@dataclass(frozen=True)
class Overheard:
    """One delivery as the adversary sees it."""

    dv_id: int
    receiver: NodeId
    t_arrival: int
    msg: AuthenticatedMessage
    first_hop: bool  # the carrying transmission came from a correct node
    via_tunnel: bool
    origin_t_send: int  # send instant of the carrying transmission


def on_delivery(adv_state, ov: Overheard, cfg: AdversaryConfig, world: WorldConfig) -> list[RelayRequest]:
    """Decide retransmissions for one overheard delivery.

    ``adv_state`` is unused by the stateless strategies here; it is accepted so
    stateful strategies can share the call shape.
    """
    if not cfg.active or ov.receiver not in cfg.members:
        return []
    strat = cfg.strategy
    floor = ov.origin_t_send  # no retransmission before its original left the sender

    def air(delay: int) -> RelayRequest:
        return RelayRequest(ov.receiver, ov.msg, max(ov.t_arrival + delay, floor), ov.dv_id)

    if isinstance(strat, Wormhole):
        ends = {strat.entry: strat.exit}
        if strat.bidirectional:
            ends[strat.exit] = strat.entry
        if ov.via_tunnel:
            return [RelayRequest(ov.receiver, ov.msg, ov.t_arrival, ov.dv_id)]
        if ov.first_hop and ov.receiver in ends:
            t = max(ov.t_arrival + cfg.relay_delay(), floor)
            return [RelayRequest(ov.receiver, ov.msg, t, ov.dv_id, tunnel_to=ends[ov.receiver])]
        return []
    if isinstance(strat, RelayAll):
        return [air(cfg.relay_delay())]
    if not ov.first_hop:
        return []
    if isinstance(strat, MinDelay):
        return [air(cfg.delta_r)]
    if isinstance(strat, OneDirection):
        if ov.msg.auth_tag.claimed_principal != strat.src:
            return []
        return [air(cfg.relay_delay())]
    if isinstance(strat, Selective):
        if ov.msg.kind not in strat.kinds:
            return []
        return [air(cfg.relay_delay())]
    raise TypeError(f"unknown strategy {strat!r}")
