"""Deterministic discrete-event simulation of broadcast, relays and ND sessions.

Events are ordered by ``(time, seq)`` where ``seq`` is a global counter taken
when the event is enqueued. There is no MAC layer: a node receives every
delivery its up-links allow, simultaneous ones included.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .adversary import AdversaryConfig, Overheard, check_adversary, on_delivery, tunnel_delay
from .messages import AuthenticatedMessage, NonceSource
from .model import NodeId, WorldConfig, link_up_over, propagation_delay
from .protocols import (
    Decide,
    Decision,
    Idle,
    NodeContext,
    ProtocolConfig,
    Received,
    Send,
    SetTimer,
    Start,
    Timeout,
    drive,
    respond,
)

DEFAULT_EVENT_CAP = 1_000_000


class SimulationError(RuntimeError):
    pass


class EventCapExceeded(SimulationError):
    pass


class TraceCorruption(SimulationError):
    pass


@dataclass(frozen=True)
class Session:
    initiator: NodeId
    responder: NodeId
    t_start: int = 0


@dataclass(frozen=True)
class Transmission:
    tx_id: int
    sender: NodeId
    msg: AuthenticatedMessage
    t_send: int
    parent: Optional[int] = None
    tunnel_to: Optional[NodeId] = None


@dataclass(frozen=True)
class Delivery:
    dv_id: int
    tx_id: int
    receiver: NodeId
    t_arrival: int


@dataclass(frozen=True)
class DecisionEvent:
    decision: Decision
    session: int


Event = Union[Transmission, Delivery, DecisionEvent]


class Trace:
    """Immutable, totally ordered event log with lookup by tx / delivery id."""

    def __init__(self, entries: Iterable[tuple[int, int, Event]]):
        self.entries: tuple[tuple[int, int, Event], ...] = tuple(entries)
        self.tx: dict[int, Transmission] = {}
        self.dv: dict[int, Delivery] = {}
        for _, _, ev in self.entries:
            if isinstance(ev, Transmission):
                self.tx[ev.tx_id] = ev
            elif isinstance(ev, Delivery):
                self.dv[ev.dv_id] = ev

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return (ev for _, _, ev in self.entries)

    @property
    def transmissions(self) -> list[Transmission]:
        return [ev for ev in self if isinstance(ev, Transmission)]

    @property
    def deliveries(self) -> list[Delivery]:
        return [ev for ev in self if isinstance(ev, Delivery)]

    @property
    def decisions(self) -> list[Decision]:
        return [ev.decision for ev in self if isinstance(ev, DecisionEvent)]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(_event_record(t, seq, ev)) + "\n" for t, seq, ev in self.entries)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()


def _event_record(t: int, seq: int, ev: Event) -> dict:
    if isinstance(ev, Transmission):
        return {
            "t": t, "seq": seq, "kind": "tx", "tx_id": ev.tx_id, "sender": ev.sender,
            "channel": "tunnel" if ev.tunnel_to else "air", "to": ev.tunnel_to,
            "msg": ev.msg.to_dict(), "parent": ev.parent,
        }
    if isinstance(ev, Delivery):
        return {
            "t": t, "seq": seq, "kind": "dv", "dv_id": ev.dv_id, "tx_id": ev.tx_id,
            "receiver": ev.receiver, "parent": ev.tx_id,
        }
    d = ev.decision
    m = d.measured
    return {
        "t": t, "seq": seq, "kind": "decision", "session": ev.session,
        "decider": d.decider, "subject": d.subject, "verdict": d.verdict.value,
        "reason": m.reason, "elapsed_ps": m.elapsed_ps, "bound_ps": m.bound_ps,
        "d_tof_m": m.d_tof_m, "d_loc_m": m.d_loc_m, "evidence": list(d.evidence),
        "parent": d.evidence[-1] if d.evidence else None,
    }


def causal_chain(trace: Trace, dv_id: int) -> list[tuple[Transmission, Delivery]]:
    """Relay hops behind a delivery, oldest first. Length 1 means direct."""
    try:
        dv = trace.dv[dv_id]
    except KeyError:
        raise KeyError(f"delivery {dv_id} not in trace") from None
    hops = []
    seen = set()
    while True:
        tx = trace.tx.get(dv.tx_id)
        if tx is None:
            raise TraceCorruption(f"delivery {dv.dv_id} references missing tx {dv.tx_id}")
        hops.append((tx, dv))
        if tx.parent is None:
            break
        if tx.parent in seen:
            raise TraceCorruption(f"parent cycle at delivery {tx.parent}")
        seen.add(tx.parent)
        dv = trace.dv.get(tx.parent)
        if dv is None:
            raise TraceCorruption(f"tx {tx.tx_id} has dangling parent {tx.parent}")
    hops.reverse()
    return hops


# queue entry kinds; the last two never reach the trace
_TX, _DV, _DECISION, _OVERHEAR, _START, _TIMER = range(6)


class Simulator:
    def __init__(
        self,
        world: WorldConfig,
        protocol: ProtocolConfig,
        sessions: Iterable[Session] = (),
        adversary: Optional[AdversaryConfig] = None,
        seed: int = 0,
        event_cap: int = DEFAULT_EVENT_CAP,
    ):
        self.world = world
        self.cfg = protocol
        self.adversary = adversary
        self.seed = seed
        self.event_cap = event_cap
        if adversary is not None:
            check_adversary(adversary, world)
        self.now = 0
        self._seq = 0
        self._next_tx = 0
        self._next_dv = 0
        self._queue: list = []
        self._log: list[tuple[int, int, Event]] = []
        self._tx: dict[int, Transmission] = {}
        self._processed = 0
        self.nonces = NonceSource()
        self.sessions = list(sessions)
        self._state: dict[tuple[int, NodeId], object] = {}
        # (decider, subject) -> session index, the live session for that pair
        self._live: dict[tuple[NodeId, NodeId], int] = {}
        for i, s in enumerate(self.sessions):
            for nid in (s.initiator, s.responder):
                world.node(nid)
            if s.initiator == s.responder:
                raise ValueError("session initiator and responder must differ")
            self._push(s.t_start, _START, i)

    # -- queue ----------------------------------------------------------------

    def _push(self, t: int, kind: int, payload) -> int:
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (t, seq, kind, payload))
        return seq

    def schedule_transmission(
        self,
        sender: NodeId,
        msg: AuthenticatedMessage,
        t_send: int,
        parent: Optional[int] = None,
        tunnel_to: Optional[NodeId] = None,
    ) -> int:
        """Enqueue a transmission and every delivery it will produce."""
        if t_send < self.now:
            raise SimulationError(f"transmission at {t_send} ps is before now ({self.now} ps)")
        node = self.world.node(sender)
        if parent is not None and node.is_correct:
            raise SimulationError("only adversarial nodes retransmit with a parent")
        if tunnel_to is not None and (self.adversary is None or node.is_correct):
            raise SimulationError("tunnel transmissions are adversary-only")
        tx = Transmission(self._next_tx, sender, msg, t_send, parent, tunnel_to)
        self._next_tx += 1
        self._tx[tx.tx_id] = tx
        self._push(t_send, _TX, tx)
        if tunnel_to is not None:
            self._enqueue_delivery(tx, tunnel_to, t_send + tunnel_delay(sender, tunnel_to, self.world, self.adversary))
            return tx.tx_id
        for r in self.world.ids:
            if r == sender:
                continue
            t_arr = t_send + propagation_delay(sender, r, self.world)
            if link_up_over(self.world.links, sender, r, (t_send, t_arr)):
                self._enqueue_delivery(tx, r, t_arr)
        return tx.tx_id

    def _enqueue_delivery(self, tx: Transmission, receiver: NodeId, t_arr: int) -> None:
        dv = Delivery(self._next_dv, tx.tx_id, receiver, t_arr)
        self._next_dv += 1
        self._push(t_arr, _DV, dv)
        adv = self.adversary
        if adv is not None and adv.active and receiver in adv.members:
            t_react = max(t_arr + adv.reaction_offset(), tx.t_send, self.now)
            self._push(t_react, _OVERHEAR, dv)

    # -- stepping ---------------------------------------------------------------

    def peek_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    def step(self) -> Optional[Event]:
        """Process the least ``(time, seq)`` queue entry; return it if it is a trace event."""
        while self._queue:
            t, seq, kind, payload = heapq.heappop(self._queue)
            self._processed += 1
            if self._processed > self.event_cap:
                raise EventCapExceeded(
                    f"event cap {self.event_cap} exceeded at t={t} ps; "
                    f"{len(self._queue)} events pending - likely a relay loop"
                )
            self.now = t
            if kind == _TX:
                self._log.append((t, seq, payload))
                return payload
            if kind == _DV:
                self._log.append((t, seq, payload))
                self._dispatch_delivery(payload)
                return payload
            if kind == _OVERHEAR:
                self._overhear(payload)
            elif kind == _START:
                self._run_session(payload, Start())
            elif kind == _TIMER:
                self._run_session(payload, Timeout())
            elif kind == _DECISION:
                self._log.append((t, seq, payload))
                return payload
        return None

    def run_until(self, t_end: int) -> Trace:
        if t_end < self.now:
            raise ValueError("t_end is before the current simulation time")
        while self._queue and self._queue[0][0] <= t_end:
            self.step()
        return self.trace()

    def trace(self) -> Trace:
        return Trace(self._log)

    # -- dispatch -------------------------------------------------------------

    def _ctx(self, node_id: NodeId) -> NodeContext:
        n = self.world.node(node_id)
        return NodeContext(n.id, n.pos, n.clock_offset, self.now, self.nonces)

    def _dispatch_delivery(self, dv: Delivery) -> None:
        node = self.world.node(dv.receiver)
        if not node.is_correct:
            return
        tx = self._tx[dv.tx_id]
        ctx = self._ctx(dv.receiver)
        for send in respond(tx.msg, self.cfg, ctx):
            self._apply_send(send)
        principal = tx.msg.auth_tag.claimed_principal
        idx = self._live.get((dv.receiver, principal))
        if idx is not None:
            self._run_session(idx, Received(dv.dv_id, tx.msg), dv.receiver)

    def _overhear(self, dv: Delivery) -> None:
        tx = self._tx[dv.tx_id]
        ov = Overheard(
            dv_id=dv.dv_id,
            receiver=dv.receiver,
            t_arrival=dv.t_arrival,
            msg=tx.msg,
            first_hop=self.world.node(tx.sender).is_correct,
            via_tunnel=tx.tunnel_to is not None,
            origin_t_send=tx.t_send,
        )
        for req in on_delivery(None, ov, self.adversary, self.world):
            self.schedule_transmission(req.sender, req.msg, req.t_send, req.parent, req.tunnel_to)

    def _decider(self, s: Session) -> NodeId:
        return s.responder if self.cfg.protocol.is_beacon else s.initiator

    def _run_session(self, idx: int, event, node_id: Optional[NodeId] = None):
        s = self.sessions[idx]
        beacon = self.cfg.protocol.is_beacon
        if isinstance(event, Start):
            decider = self._decider(s)
            subject = s.initiator if beacon else s.responder
            key = (decider, subject)
            if key in self._live:
                raise SimulationError(f"overlapping sessions for {decider}->{subject}")
            self._live[key] = idx
            # beacon sessions start at both ends; the sender needs no state
            actors = [s.initiator, s.responder] if beacon else [s.initiator]
            for actor in actors:
                if self.world.node(actor).is_correct:
                    self._step_machine(idx, actor, event)
            return
        actor = node_id if node_id is not None else self._decider(s)
        self._step_machine(idx, actor, event)

    def _step_machine(self, idx: int, actor: NodeId, event):
        s = self.sessions[idx]
        state = self._state.get((idx, actor), Idle())
        new_state, actions = drive(state, event, self.cfg, self._ctx(actor), s.initiator, s.responder)
        self._state[(idx, actor)] = new_state
        for act in actions:
            if isinstance(act, Send):
                self._apply_send(act)
            elif isinstance(act, SetTimer):
                self._push(act.t, _TIMER, idx)
            elif isinstance(act, Decide):
                d = act.decision
                self._live.pop((d.decider, d.subject), None)
                self._push(self.now, _DECISION, DecisionEvent(d, idx))

    def _apply_send(self, send: Send) -> None:
        self.schedule_transmission(send.sender, send.msg, send.t_send)


def simulate(
    world: WorldConfig,
    protocol: ProtocolConfig,
    sessions: Iterable[Session],
    t_end: int,
    adversary: Optional[AdversaryConfig] = None,
    seed: int = 0,
    event_cap: int = DEFAULT_EVENT_CAP,
) -> Trace:
    sim = Simulator(world, protocol, sessions, adversary, seed, event_cap)
    return sim.run_until(t_end)
