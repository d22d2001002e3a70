"""Attack search: find correctness violations and recover minimal safe relay delays.

Every candidate attack is a concrete scenario: victims A at (0, 0) and B at
(d, 0) with their direct link blocked (both directions, or one direction when
asymmetric configurations are enabled), plus adversarial relays placed
co-located with A, with B, off-axis at the midpoint, or as a two-ended wormhole.
Candidates are simulated and judged by the same checkers as any other run.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import tomli

from .adversary import AdversaryConfig, MinDelay, OneDirection, Wormhole
from .checkers import Violation, check_distance_correctness, check_link_correctness
from .engine import Session, Trace
from .model import (
    SPEED_OF_LIGHT,
    ChannelParams,
    NodeSpec,
    Position,
    Role,
    WorldConfig,
    build_schedule_from_geometry,
    flight_ps,
)
from .protocols import Protocol, ProtocolConfig
from .scenario import Scenario, ScenarioError, _Table, default_t_end, simulate_scenario

SCAN_CAP = 1_000_000
SEARCH_EVENT_CAP = 10_000


class SearchError(RuntimeError):
    pass


class NonMonotoneError(SearchError):
    pass


class Placement(str, enum.Enum):
    NEAR_A = "near_a"
    NEAR_B = "near_b"
    MIDPOINT = "midpoint"
    WORMHOLE = "wormhole"


class LinkConfig(str, enum.Enum):
    BOTH_DOWN = "both_down"
    A_TO_B_DOWN = "a_to_b_down"
    B_TO_A_DOWN = "b_to_a_down"


STRATEGY_NAMES = ("min_delay", "one_direction", "wormhole")


@dataclass(frozen=True)
class SearchSpace:
    protocol: ProtocolConfig
    distances: tuple[float, ...]
    deltas: tuple[int, ...]
    v: float = SPEED_OF_LIGHT
    v_adv: float = SPEED_OF_LIGHT
    placements: tuple[Placement, ...] = (Placement.NEAR_A, Placement.NEAR_B, Placement.MIDPOINT)
    strategies: tuple[str, ...] = ("min_delay", "one_direction")
    asymmetric_links: bool = False
    lateral_m: float = 1.0
    tunnel_extra: int = 0
    radio_range: Optional[float] = None
    tune_hold: bool = True
    budget: int = 1000
    seed: int = 0
    name: str = "space"

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        object.__setattr__(self, "deltas", tuple(int(x) for x in self.deltas))
        object.__setattr__(self, "placements", tuple(Placement(p) for p in self.placements))
        if not self.distances or not self.placements or not self.strategies:
            raise SearchError("search space must be non-empty")
        if min(self.distances) <= 0:
            raise SearchError("victim distances must be > 0")
        bad = set(self.strategies) - set(STRATEGY_NAMES)
        if bad:
            raise SearchError(f"unknown strategies {sorted(bad)}")
        if not self.lateral_m > 0:
            raise SearchError("lateral_m must be > 0")

    def with_protocol(self, protocol: Protocol) -> "SearchSpace":
        return replace(self, protocol=replace(self.protocol, protocol=protocol))

    @property
    def link_configs(self) -> tuple[LinkConfig, ...]:
        if self.asymmetric_links:
            return (LinkConfig.BOTH_DOWN, LinkConfig.A_TO_B_DOWN, LinkConfig.B_TO_A_DOWN)
        return (LinkConfig.BOTH_DOWN,)


@dataclass(frozen=True)
class AttackConfig:
    """Everything about a candidate except the relay delay."""

    distance: float
    links: LinkConfig
    placement: Placement
    strategy: str  # "min_delay", "one_direction(A->B)", "wormhole", ...

    @property
    def label(self) -> str:
        return f"{self.placement.value}/{self.strategy}/{self.links.value}"


@dataclass(frozen=True)
class AttackWitness:
    scenario: Scenario
    trace_digest: str
    violation: Violation
    seed: int
    config: AttackConfig
    delta_r: int

    @property
    def strategy(self) -> str:
        return self.config.label


@dataclass
class ThresholdResult:
    threshold_ps: int  # smallest probed delta_r with no attack
    last_attack_ps: Optional[int]
    strategy: str
    witness: Optional[AttackWitness]
    probes: list[tuple[int, bool]] = field(default_factory=list)


# -- candidate generation ---------------------------------------------------------


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 9) for i in range(n)]


def attack_configs(space: SearchSpace) -> list[AttackConfig]:
    """Every delta-free candidate, in a fixed order (distance-major)."""
    variants = []
    for placement in space.placements:
        if placement is Placement.WORMHOLE:
            if "wormhole" in space.strategies:
                variants.append((placement, "wormhole"))
            continue
        if "min_delay" in space.strategies:
            variants.append((placement, "min_delay"))
        if "one_direction" in space.strategies:
            variants.append((placement, "one_direction(A->B)"))
            variants.append((placement, "one_direction(B->A)"))
    return [
        AttackConfig(d, lc, p, s)
        for d in space.distances
        for lc in space.link_configs
        for p, s in variants
    ]


def build_attack_scenario(space: SearchSpace, cfg: AttackConfig, delta_r: int,
                          hold: Optional[int] = None) -> Scenario:
    d = cfg.distance
    a, b = Position(0.0, 0.0), Position(d, 0.0)
    nodes = [NodeSpec("A", a), NodeSpec("B", b)]
    if cfg.placement is Placement.WORMHOLE:
        nodes += [NodeSpec("E1", a, Role.ADVERSARIAL), NodeSpec("E2", b, Role.ADVERSARIAL)]
        members = {"E1", "E2"}
        strategy = Wormhole("E1", "E2", bidirectional=not space.protocol.protocol.is_beacon)
    else:
        pos = {
            Placement.NEAR_A: a,
            Placement.NEAR_B: b,
            Placement.MIDPOINT: Position(d / 2, space.lateral_m),
        }[cfg.placement]
        nodes.append(NodeSpec("E", pos, Role.ADVERSARIAL))
        members = {"E"}
        if cfg.strategy == "min_delay":
            strategy = MinDelay()
        elif cfg.strategy == "one_direction(A->B)":
            strategy = OneDirection("A", "B")
        elif cfg.strategy == "one_direction(B->A)":
            strategy = OneDirection("B", "A")
        else:
            raise SearchError(f"strategy {cfg.strategy!r} needs a matching placement")
    radio = space.radio_range if space.radio_range is not None else 2 * d + 2 * space.lateral_m + 1
    links, nlos = build_schedule_from_geometry(nodes, radio)
    blocked = {
        LinkConfig.BOTH_DOWN: {("A", "B"): (), ("B", "A"): ()},
        LinkConfig.A_TO_B_DOWN: {("A", "B"): ()},
        LinkConfig.B_TO_A_DOWN: {("B", "A"): ()},
    }[cfg.links]
    links = links.with_overrides(blocked)
    world = WorldConfig(tuple(nodes), ChannelParams(space.v, space.v_adv), links, nlos, radio)
    adv = AdversaryConfig(frozenset(members), delta_r, strategy, space.tunnel_extra, hold)
    proto = space.protocol
    name = (f"{proto.protocol.value}-d{d:g}m-dr{delta_r}ps-{cfg.placement.value}-"
            f"{cfg.strategy}-{cfg.links.value}" + (f"-hold{hold}ps" if hold is not None else ""))
    t_end = default_t_end(proto, extra=1)
    return Scenario(world, proto, (Session("A", "B", 0),), t_end, adv, space.seed,
                    event_cap=SEARCH_EVENT_CAP, name=name)


# -- evaluation -------------------------------------------------------------------------


def correctness_violations(s: Scenario, trace: Trace) -> list[Violation]:
    out = []
    out += check_distance_correctness(trace, s.world, s.protocol).violations
    out += check_link_correctness(trace, s.world, s.protocol).violations
    return out


def _victim_decision(trace: Trace, proto: ProtocolConfig):
    decider, subject = ("B", "A") if proto.protocol.is_beacon else ("A", "B")
    for d in trace.decisions:
        if d.decider == decider and d.subject == subject:
            return d
    return None


def _simulate(s: Scenario):
    trace = simulate_scenario(s)
    return trace, correctness_violations(s, trace)


def evaluate(space: SearchSpace, cfg: AttackConfig, delta_r: int) -> Optional[AttackWitness]:
    """Simulate one candidate; for location protocols also try the delay-matching hold."""
    s = build_attack_scenario(space, cfg, delta_r)
    trace, viols = _simulate(s)
    if not viols and space.tune_hold and space.protocol.protocol.uses_location:
        tuned = _tune_hold(space, cfg, delta_r, trace)
        if tuned is not None:
            s, trace, viols = tuned
    if not viols:
        return None
    return AttackWitness(s, trace.digest(), viols[0], s.seed, cfg, delta_r)


def _tune_hold(space: SearchSpace, cfg: AttackConfig, delta_r: int, trace: Trace):
    """Delay relays just enough that the time of flight matches the claimed locations.

    Only worth it when the relayed path is faster than line of sight (fast
    tunnel or negative delta_r): extra hold can only lengthen the measurement.
    """
    proto = space.protocol
    d = _victim_decision(trace, proto)
    if d is None or d.measured.elapsed_ps is None or d.measured.d_loc_m is None:
        return None
    legs = 1 if proto.protocol.is_beacon else 2
    expected = legs * flight_ps(d.measured.d_loc_m, proto.v)
    deficit = expected - d.measured.elapsed_ps
    if deficit <= 0:
        return None
    # smallest hold whose measurement reaches the expected value; also try one below it
    lo, hi = delta_r, delta_r + deficit
    while lo < hi:
        mid = (lo + hi) // 2
        dm = _victim_decision(simulate_scenario(build_attack_scenario(space, cfg, delta_r, mid)), proto)
        if dm is None or dm.measured.elapsed_ps is None:
            return None
        if dm.measured.elapsed_ps >= expected:
            hi = mid
        else:
            lo = mid + 1
    for h in (lo, lo - 1):
        if h < delta_r:
            continue
        s = build_attack_scenario(space, cfg, delta_r, h)
        tr, viols = _simulate(s)
        if viols:
            return s, tr, viols
    return None


def _all_candidates(space: SearchSpace) -> list[tuple[AttackConfig, int]]:
    configs = attack_configs(space)
    return [(c, dr) for dr in space.deltas for c in configs]


def find_attack(space: SearchSpace, budget: Optional[int] = None, seed: Optional[int] = None) -> Optional[AttackWitness]:
    """Sample up to ``budget`` candidates (without replacement, order fixed by ``seed``)."""
    budget = space.budget if budget is None else budget
    seed = space.seed if seed is None else seed
    if budget < 1:
        raise SearchError("budget must be >= 1")
    cands = _all_candidates(space)
    order = list(range(len(cands)))
    random.Random(seed).shuffle(order)
    for i in order[:budget]:
        cfg, dr = cands[i]
        w = evaluate(space, cfg, dr)
        if w is not None:
            return w
    return None


def exhaustive_scan(space: SearchSpace, cap: int = SCAN_CAP) -> list[AttackWitness]:
    """Simulate every candidate; results are in candidate order (delta-major)."""
    cands = _all_candidates(space)
    if len(cands) > cap:
        raise SearchError(f"scan of {len(cands)} scenarios exceeds the cap of {cap}")
    out = []
    for cfg, dr in cands:
        w = evaluate(space, cfg, dr)
        if w is not None:
            out.append(w)
    return out


def probe(space: SearchSpace, delta_r: int) -> Optional[AttackWitness]:
    """Exhaustive over the delta-free candidates at one relay delay; first witness wins."""
    for cfg in attack_configs(space):
        w = evaluate(space, cfg, delta_r)
        if w is not None:
            return w
    return None


def min_safe_relay_delay(space: SearchSpace, tol: int = 100, protocol: Optional[Protocol] = None,
                         hi_start: Optional[int] = None) -> ThresholdResult:
    """Bisect delta_r between "attack found" and "no attack" down to ``tol`` ps."""
    if protocol is not None:
        space = space.with_protocol(protocol)
    if tol < 1:
        raise SearchError("tolerance must be >= 1 ps")
    probes: list[tuple[int, bool]] = []

    def run(x: int) -> Optional[AttackWitness]:
        w = probe(space, x)
        probes.append((x, w is not None))
        return w

    w0 = run(0)
    if w0 is None:
        return ThresholdResult(0, None, "", None, probes)
    lo, lo_w = 0, w0
    hi = hi_start or max(tol, max(space.deltas, default=0), 1)
    while True:
        w = run(hi)
        if w is None:
            break
        lo, lo_w = hi, w
        hi *= 2
        if hi > 2**50:
            raise SearchError("no safe relay delay below 2**50 ps; the space admits unbounded attacks")
    while hi - lo > tol:
        mid = (lo + hi) // 2
        w = run(mid)
        if w is None:
            hi = mid
        else:
            lo, lo_w = mid, w
    # spot-check monotonicity below the boundary and above it
    for x in sorted({lo // 2, max(lo - tol, 0)}):
        if run(x) is None:
            raise NonMonotoneError(f"attack at {lo} ps but none at {x} ps: non-monotone search space")
    if run(2 * hi) is not None:
        raise NonMonotoneError(f"no attack at {hi} ps but one at {2 * hi} ps: non-monotone search space")
    return ThresholdResult(hi, lo, lo_w.strategy, lo_w, probes)


def analytic_target_ps(space: SearchSpace) -> int:
    """Closed-form minimal safe relay delay this space should reproduce."""
    proto = space.protocol
    if proto.protocol.uses_location:
        return 0
    one_way = flight_ps(proto.R, proto.v)
    if proto.protocol is Protocol.CRT and space.asymmetric_links and "one_direction" in space.strategies:
        return 2 * one_way
    return one_way


def replay(w: AttackWitness) -> tuple[Trace, list[Violation]]:
    trace = simulate_scenario(w.scenario)
    return trace, correctness_violations(w.scenario, trace)


def iter_candidates(space: SearchSpace) -> Iterator[tuple[AttackConfig, int]]:
    return iter(_all_candidates(space))


# -- space files -------------------------------------------------------------------------


def space_from_dict(data: dict) -> SearchSpace:
    root = _Table(data, "")
    sp = root.sub("space", required=True)
    name = root.get("name", str, "space")
    v = sp.get("v_mps", float, SPEED_OF_LIGHT)
    v_adv = sp.get("v_adv_mps", float, v)
    dist = sp.sub("distance", required=True)
    if "values_m" in dist.data:
        distances = [float(x) for x in dist.get("values_m", list)]
    else:
        distances = _grid(dist.get("min_m", float), dist.get("max_m", float), dist.get("step_m", float))
    dist.done()
    dl = sp.sub("delta", required=True)
    if "values_ps" in dl.data:
        deltas = [int(x) for x in dl.get("values_ps", list)]
    else:
        lo, hi, step = dl.get("min_ps", int), dl.get("max_ps", int), dl.get("step_ps", int)
        if step <= 0:
            raise ScenarioError("space.delta.step_ps must be > 0")
        deltas = list(range(lo, hi + 1, step))
    dl.done()
    space_kw = dict(
        placements=tuple(sp.get("placements", list, ["near_a", "near_b", "midpoint"])),
        strategies=tuple(sp.get("strategies", list, ["min_delay", "one_direction"])),
        asymmetric_links=sp.get("asymmetric_links", bool, False),
        lateral_m=sp.get("lateral_m", float, 1.0),
        tunnel_extra=sp.get("tunnel_extra_ps", int, 0),
        radio_range=sp.get("radio_range_m", float, None),
        tune_hold=sp.get("tune_hold", bool, True),
        budget=sp.get("budget", int, 1000),
        seed=sp.get("seed", int, 0),
    )
    sp.done()
    p = root.sub("protocol", required=True)
    proto = ProtocolConfig(
        Protocol(p.get("kind", str, "BT")),
        R=p.get("range_m", float, None),
        v=p.get("v_mps", float, v),
        eps_t=p.get("eps_t_ps", int, 1_000),
        eps_d=p.get("eps_d_m", float, 0.10),
        eps_sync=p.get("eps_sync_ps", int, 1_000),
        proc_delay=p.get("proc_delay_ps", int, 1_000_000),
        timeout=p.get("timeout_ps", int, None),
    )
    p.done()
    root.done()
    return SearchSpace(proto, tuple(distances), tuple(deltas), v, v_adv, name=name, **space_kw)


def load_space(path, protocol: Optional[str] = None) -> SearchSpace:
    path = Path(path)
    try:
        data = tomli.loads(path.read_text())
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from None
    except tomli.TOMLDecodeError as e:
        raise ScenarioError(f"{path}: TOML parse error: {e}") from None
    if protocol is not None:
        data.setdefault("protocol", {})["kind"] = protocol
    try:
        return space_from_dict(data)
    except (ValueError, SearchError) as e:
        raise ScenarioError(f"{path}: {e}") from None


def search_report(space: SearchSpace, witnesses: Sequence[AttackWitness] = (),
                  thresholds: Sequence[ThresholdResult] = ()):
    from .report import Report, ThresholdRow, ViolationRow

    proto = space.protocol.protocol.value
    rows = [
        ViolationRow(w.scenario.name, proto, w.delta_r, w.strategy, w.violation.kind.value,
                     w.violation.decision.decider if w.violation.decision else None,
                     w.violation.decision.subject if w.violation.decision else None,
                     w.violation.actual_distance_m, w.violation.chain_length)
        for w in witnesses
    ]
    trows = [
        ThresholdRow(space.name, proto, t.strategy, t.threshold_ps, analytic_target_ps(space),
                     t.last_attack_ps, len(t.probes))
        for t in thresholds
    ]
    summary = {"witnesses": len(rows), "candidates": len(_all_candidates(space))}
    return Report(space.name, proto, violations=rows, thresholds=trows, summary=summary)


__all__ = [
    "AttackConfig",
    "AttackWitness",
    "LinkConfig",
    "NonMonotoneError",
    "Placement",
    "SearchError",
    "SearchSpace",
    "ThresholdResult",
    "analytic_target_ps",
    "attack_configs",
    "build_attack_scenario",
    "evaluate",
    "exhaustive_scan",
    "find_attack",
    "iter_candidates",
    "load_space",
    "min_safe_relay_delay",
    "probe",
    "replay",
    "search_report",
    "space_from_dict",
]
