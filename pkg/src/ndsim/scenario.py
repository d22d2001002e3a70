"""Scenario files (TOML) and single-scenario runs.

Units are part of every key name (``_m``, ``_ps``, ``_mps``). Unknown keys are
errors, so a typo can never silently fall back to a default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional

import tomli
import tomli_w

from .adversary import (
    AdversaryConfig,
    MinDelay,
    OneDirection,
    RelayAll,
    RelayStrategy,
    Selective,
    Wormhole,
)
from .checkers import (
    check_availability,
    check_distance_correctness,
    check_link_correctness,
)
from .engine import DEFAULT_EVENT_CAP, EventCapExceeded, Session, Simulator, Trace
from .model import (
    SPEED_OF_LIGHT,
    ChannelParams,
    NlosMap,
    NodeSpec,
    Obstacle,
    Position,
    Role,
    WorldConfig,
    WorldError,
    build_schedule_from_geometry,
)
from .protocols import ConfigError, Protocol, ProtocolConfig
from .report import Report


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    world: WorldConfig
    protocol: ProtocolConfig
    sessions: tuple[Session, ...]
    t_end: int
    adversary: Optional[AdversaryConfig] = None
    seed: int = 0
    intended: Optional[tuple[int, ...]] = None  # None: every session is a legitimate pair
    event_cap: int = DEFAULT_EVENT_CAP
    obstacles: tuple[Obstacle, ...] = ()
    name: str = "scenario"

    def __post_init__(self):
        for s in self.sessions:
            for nid in (s.initiator, s.responder):
                if nid not in self.world:
                    raise ScenarioError(f"sessions: unknown node {nid!r}")
            if s.t_start > self.t_end:
                raise ScenarioError("sessions: t_start_ps beyond run.t_end_ps")
        if self.intended is not None:
            for i in self.intended:
                if not 0 <= i < len(self.sessions):
                    raise ScenarioError(f"intended session {i} does not exist")


# -- strict table reading -------------------------------------------------------

_MISSING = object()


class _Table:
    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ScenarioError(f"{path or 'root'} must be a table")
        self.data = data
        self.path = path
        self.used: set[str] = set()

    def _name(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, kind, default: Any = _MISSING):
        self.used.add(key)
        if key not in self.data:
            if default is _MISSING:
                raise ScenarioError(f"missing required key {self._name(key)}")
            return default
        val = self.data[key]
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
            raise ScenarioError(f"{self._name(key)} has the wrong type ({type(val).__name__})")
        return val

    def sub(self, key: str, required: bool = False) -> Optional["_Table"]:
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ScenarioError(f"missing required section [{self._name(key)}]")
            return None
        return _Table(self.data[key], self._name(key))

    def items(self, key: str) -> list["_Table"]:
        self.used.add(key)
        vals = self.data.get(key, [])
        if not isinstance(vals, list):
            raise ScenarioError(f"{self._name(key)} must be an array of tables")
        return [_Table(v, f"{self._name(key)}[{i}]") for i, v in enumerate(vals)]

    def done(self) -> None:
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ScenarioError(f"unknown key {self._name(extra[0])!r}")


def _pair(key: str, section: str) -> tuple[str, str]:
    parts = key.split("->")
    if len(parts) != 2 or not all(parts):
        raise ScenarioError(f"{section}: key {key!r} must look like \"A->B\"")
    return parts[0].strip(), parts[1].strip()


def _parse_strategy(adv: _Table) -> RelayStrategy:
    adv.used.add("strategy")
    raw = adv.data.get("strategy", "min_delay")
    if isinstance(raw, str):
        t = _Table({"kind": raw}, "adversary.strategy")
    else:
        t = _Table(raw, "adversary.strategy")
    kind = t.get("kind", str)
    if kind == "min_delay":
        strat: RelayStrategy = MinDelay()
    elif kind == "relay_all":
        strat = RelayAll()
    elif kind == "one_direction":
        strat = OneDirection(t.get("src", str), t.get("dst", str))
    elif kind == "selective":
        strat = Selective(frozenset(t.get("kinds", list)))
    elif kind == "wormhole":
        strat = Wormhole(t.get("entry", str), t.get("exit", str), t.get("bidirectional", bool, False))
    else:
        raise ScenarioError(f"adversary.strategy.kind: unknown strategy {kind!r}")
    t.done()
    return strat


_TOP_KEYS = {"name", "world", "links", "nlos", "protocol", "adversary", "sessions", "run"}


def scenario_from_dict(data: dict) -> Scenario:
    root = _Table(data, "")
    extra = sorted(set(data) - _TOP_KEYS)
    if extra:
        raise ScenarioError(f"unknown key {extra[0]!r}")
    try:
        name = root.get("name", str, "scenario")
        w = root.sub("world", required=True)
        radio_range = w.get("radio_range_m", float, 1000.0)
        v = w.get("v_mps", float, SPEED_OF_LIGHT)
        v_adv = w.get("v_adv_mps", float, v)
        sync_error = w.get("sync_error_ps", int, None)
        nodes = []
        for n in w.items("nodes"):
            role = n.get("role", str, "correct")
            try:
                role_v = Role(role)
            except ValueError:
                raise ScenarioError(f"{n.path}.role must be 'correct' or 'adversarial'") from None
            nodes.append(NodeSpec(n.get("id", str), Position(n.get("x_m", float), n.get("y_m", float)),
                                  role_v, n.get("clock_offset_ps", int, 0)))
            n.done()
        obstacles = []
        for o in w.items("obstacles"):
            obstacles.append(Obstacle(Position(o.get("x1_m", float), o.get("y1_m", float)),
                                      Position(o.get("x2_m", float), o.get("y2_m", float)),
                                      o.get("nlos_ps", int, None)))
            o.done()
        w.done()

        links, nlos = build_schedule_from_geometry(nodes, radio_range, obstacles)
        link_tab = root.sub("links")
        if link_tab is not None:
            overrides = {}
            for key, iv in link_tab.data.items():
                link_tab.used.add(key)
                if not isinstance(iv, list) or not all(isinstance(x, list) and len(x) == 2 for x in iv):
                    raise ScenarioError(f"links.{key} must be a list of [start_ps, end_ps] pairs")
                overrides[_pair(key, "links")] = [tuple(x) for x in iv]
            links = links.with_overrides(overrides)
        nlos_tab = root.sub("nlos")
        if nlos_tab is not None:
            delays = dict(nlos.delays)
            for key in list(nlos_tab.data):
                delays[_pair(key, "nlos")] = nlos_tab.get(key, int)
            nlos = NlosMap(delays)
        world = WorldConfig(tuple(nodes), ChannelParams(v, v_adv), links, nlos, radio_range, sync_error)

        p = root.sub("protocol", required=True)
        kind = p.get("kind", str)
        try:
            proto = Protocol(kind)
        except ValueError:
            raise ScenarioError(f"protocol.kind must be one of BT, BTL, CRT, CRTL (got {kind!r})") from None
        protocol = ProtocolConfig(
            proto,
            R=p.get("range_m", float, None),
            v=p.get("v_mps", float, v),
            eps_t=p.get("eps_t_ps", int, 1_000),
            eps_d=p.get("eps_d_m", float, 0.10),
            eps_sync=p.get("eps_sync_ps", int, 1_000),
            proc_delay=p.get("proc_delay_ps", int, 1_000_000),
            timeout=p.get("timeout_ps", int, None),
        )
        p.done()

        adversary = None
        a = root.sub("adversary")
        if a is not None:
            raw_dr = a.get("delta_r_ps", (int, str))
            if isinstance(raw_dr, str):
                if raw_dr != "inf":
                    raise ScenarioError("adversary.delta_r_ps must be an integer or \"inf\"")
                delta_r = None
            else:
                delta_r = raw_dr
            adversary = AdversaryConfig(
                frozenset(a.get("members", list)),
                delta_r,
                _parse_strategy(a),
                a.get("tunnel_extra_ps", int, 0),
                a.get("hold_ps", int, None),
            )
            a.done()

        sessions, intended = [], []
        for i, s in enumerate(root.items("sessions")):
            sessions.append(Session(s.get("initiator", str), s.get("responder", str), s.get("t_start_ps", int, 0)))
            if s.get("intended", bool, True):
                intended.append(i)
            s.done()
        if not sessions:
            raise ScenarioError("at least one [[sessions]] entry is required")

        r = root.sub("run") or _Table({}, "run")
        last_start = max(x.t_start for x in sessions)
        t_end = r.get("t_end_ps", int, default_t_end(protocol, last_start))
        seed = r.get("seed", int, 0)
        cap = r.get("event_cap", int, DEFAULT_EVENT_CAP)
        r.done()
        root.done()
    except (WorldError, ConfigError) as e:
        raise ScenarioError(str(e)) from None
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(str(e)) from None

    return Scenario(
        world, protocol, tuple(sessions), t_end, adversary, seed,
        None if len(intended) == len(sessions) else tuple(intended),
        cap, tuple(obstacles), name,
    )


def loads_scenario(text: str) -> Scenario:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ScenarioError(f"TOML parse error: {e}") from None
    return scenario_from_dict(data)


def load_scenario(path, seed_env: bool = True) -> Scenario:
    """Read a scenario file; ``ND_SEED`` in the environment overrides the seed."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from None
    try:
        s = loads_scenario(text)
    except ScenarioError as e:
        raise ScenarioError(f"{path}: {e}") from None
    if seed_env and os.environ.get("ND_SEED"):
        s = replace(s, seed=int(os.environ["ND_SEED"]))
    return s


def _strategy_dict(strat: RelayStrategy):
    if isinstance(strat, MinDelay):
        return "min_delay"
    if isinstance(strat, RelayAll):
        return "relay_all"
    if isinstance(strat, OneDirection):
        return {"kind": "one_direction", "src": strat.src, "dst": strat.dst}
    if isinstance(strat, Selective):
        return {"kind": "selective", "kinds": sorted(strat.kinds)}
    return {"kind": "wormhole", "entry": strat.entry, "exit": strat.exit, "bidirectional": strat.bidirectional}


def scenario_to_dict(s: Scenario) -> dict:
    w = s.world
    world: dict = {"radio_range_m": w.radio_range, "v_mps": w.channel.v, "v_adv_mps": w.channel.v_adv}
    if w.sync_error is not None:
        world["sync_error_ps"] = w.sync_error
    world["nodes"] = [
        {"id": n.id, "x_m": n.pos.x, "y_m": n.pos.y, "role": n.role.value, "clock_offset_ps": n.clock_offset}
        for n in w.nodes
    ]
    if s.obstacles:
        obs = []
        for o in s.obstacles:
            d = {"x1_m": o.a.x, "y1_m": o.a.y, "x2_m": o.b.x, "y2_m": o.b.y}
            if o.nlos_delay is not None:
                d["nlos_ps"] = o.nlos_delay
            obs.append(d)
        world["obstacles"] = obs
    out: dict = {"name": s.name, "world": world}
    out["links"] = {f"{a}->{b}": [list(iv) for iv in ivs] for (a, b), ivs in sorted(w.links.intervals.items())}
    if w.nlos.delays:
        out["nlos"] = {f"{a}->{b}": d for (a, b), d in sorted(w.nlos.delays.items())}
    p = s.protocol
    proto: dict = {"kind": p.protocol.value}
    if p.R is not None:
        proto["range_m"] = p.R
    proto.update({"v_mps": p.v, "eps_t_ps": p.eps_t, "eps_d_m": p.eps_d, "eps_sync_ps": p.eps_sync,
                  "proc_delay_ps": p.proc_delay})
    if p.timeout is not None:
        proto["timeout_ps"] = p.timeout
    out["protocol"] = proto
    if s.adversary is not None:
        a = s.adversary
        adv: dict = {
            "members": sorted(a.members),
            "delta_r_ps": "inf" if a.delta_r is None else a.delta_r,
            "tunnel_extra_ps": a.tunnel_extra,
        }
        if a.hold is not None:
            adv["hold_ps"] = a.hold
        adv["strategy"] = _strategy_dict(a.strategy)
        out["adversary"] = adv
    intended = set(range(len(s.sessions))) if s.intended is None else set(s.intended)
    out["sessions"] = [
        {"initiator": x.initiator, "responder": x.responder, "t_start_ps": x.t_start, "intended": i in intended}
        for i, x in enumerate(s.sessions)
    ]
    out["run"] = {"t_end_ps": s.t_end, "seed": s.seed, "event_cap": s.event_cap}
    return out


def dumps_scenario(s: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(s))


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s))


# -- running ------------------------------------------------------------------------


def simulate_scenario(s: Scenario) -> Trace:
    sim = Simulator(s.world, s.protocol, s.sessions, s.adversary, s.seed, s.event_cap)
    try:
        return sim.run_until(s.t_end)
    except EventCapExceeded as e:
        raise EventCapExceeded(f"scenario {s.name!r}: {e}") from None


def check_scenario(s: Scenario, trace: Trace) -> dict:
    return {
        "distance_correctness": check_distance_correctness(trace, s.world, s.protocol),
        "link_correctness": check_link_correctness(trace, s.world, s.protocol),
        "availability": check_availability(trace, s.world, s.sessions, s.protocol, s.intended),
    }


def run_scenario(s: Scenario) -> tuple[Trace, Report]:
    trace = simulate_scenario(s)
    verdicts = check_scenario(s, trace)
    return trace, Report.from_run(s, trace, verdicts)


def default_t_end(cfg: ProtocolConfig, t_start: int = 0, extra: int = 0) -> int:
    return t_start + cfg.wait_ps() + 1 + max(extra, 0)


__all__ = [
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "loads_scenario",
    "dumps_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "run_scenario",
    "simulate_scenario",
    "check_scenario",
    "default_t_end",
]
