"""Atomic message terms with ideal authentication.

Crypto is symbolic: a tag records who sealed a body and whether the seal is
genuine. Relaying copies the message object untouched, so a relayed copy
verifies exactly like the original.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Union

from .model import NodeId, Position


@dataclass(frozen=True, order=True)
class Nonce:
    origin: NodeId
    counter: int


@dataclass(frozen=True)
class Beacon:
    sender: NodeId
    t_send_claimed: int
    loc_claimed: Optional[Position] = None
    kind = "beacon"


@dataclass(frozen=True)
class Challenge:
    challenger: NodeId
    nonce: Nonce
    kind = "challenge"


@dataclass(frozen=True)
class Response:
    responder: NodeId
    echoed_nonce: Nonce
    loc_claimed: Optional[Position] = None
    kind = "response"


MessageBody = Union[Beacon, Challenge, Response]
MESSAGE_KINDS = ("beacon", "challenge", "response")


@dataclass(frozen=True)
class AuthTag:
    claimed_principal: NodeId
    genuine: bool


@dataclass(frozen=True)
class AuthenticatedMessage:
    body: MessageBody
    auth_tag: AuthTag

    @property
    def kind(self) -> str:
        return self.body.kind

    def to_dict(self) -> dict:
        body = self.body
        d: dict = {"kind": body.kind}
        if isinstance(body, Beacon):
            d["sender"] = body.sender
            d["t_send_claimed"] = body.t_send_claimed
            d["loc_claimed"] = _loc(body.loc_claimed)
        elif isinstance(body, Challenge):
            d["challenger"] = body.challenger
            d["nonce"] = [body.nonce.origin, body.nonce.counter]
        else:
            d["responder"] = body.responder
            d["echoed_nonce"] = [body.echoed_nonce.origin, body.echoed_nonce.counter]
            d["loc_claimed"] = _loc(body.loc_claimed)
        d["principal"] = self.auth_tag.claimed_principal
        d["genuine"] = self.auth_tag.genuine
        return d


def _loc(p: Optional[Position]):
    return None if p is None else [p.x, p.y]


@dataclass
class NonceSource:
    """Per-node monotone counters; correct nodes never reuse a counter."""

    counters: dict = field(default_factory=lambda: defaultdict(int))

    def fresh(self, node: NodeId) -> Nonce:
        n = Nonce(node, self.counters[node])
        self.counters[node] += 1
        return n


def fresh_nonce(node: NodeId, state: NonceSource) -> Nonce:
    return state.fresh(node)


def seal(principal: NodeId, body: MessageBody) -> AuthenticatedMessage:
    return AuthenticatedMessage(body, AuthTag(principal, True))


def forge(claimed_principal: NodeId, body: MessageBody) -> AuthenticatedMessage:
    """What an external adversary gets when it tries to speak for someone else."""
    return AuthenticatedMessage(body, AuthTag(claimed_principal, False))


def verify(msg: AuthenticatedMessage, expected: NodeId) -> bool:
    return msg.auth_tag.genuine and msg.auth_tag.claimed_principal == expected
