from pathlib import Path

import pytest

from ndsim.protocols import Protocol
from ndsim.scenario import ScenarioError, dumps_scenario, loads_scenario, simulate_scenario
from ndsim.search import (
    AttackConfig,
    LinkConfig,
    Placement,
    SearchError,
    SearchSpace,
    analytic_target_ps,
    attack_configs,
    build_attack_scenario,
    exhaustive_scan,
    find_attack,
    load_space,
    min_safe_relay_delay,
    replay,
)

from conftest import cfg

SPACES = Path(__file__).resolve().parent.parent / "spaces"


def _space(kind="BT", deltas=(100_000,), **kw):
    kw.setdefault("placements", ("midpoint",))
    kw.setdefault("strategies", ("min_delay",))
    return SearchSpace(cfg(kind, eps_t=0, eps_sync=0), (50.0,), deltas, **kw)


def test_find_attack_at_fast_relay():
    w = find_attack(_space())
    assert w is not None and w.delta_r == 100_000
    assert w.violation.kind.value == "link_correctness"
    assert w.strategy == "midpoint/min_delay/both_down"


def test_no_attack_at_slow_relay():
    assert find_attack(_space(deltas=(400_000,))) is None
    assert exhaustive_scan(_space(deltas=(400_000, 500_000))) == []


def test_replay_is_exact():
    w = find_attack(_space())
    trace, viols = replay(w)
    assert trace.digest() == w.trace_digest
    assert [v.key() for v in viols][0] == w.violation.key()
    # the witness survives a trip through TOML
    again = loads_scenario(dumps_scenario(w.scenario))
    assert simulate_scenario(again).digest() == w.trace_digest


def test_find_attack_is_seeded():
    sp = _space(deltas=tuple(range(0, 400_001, 50_000)), placements=("near_a", "midpoint"))
    a, b = find_attack(sp, seed=3), find_attack(sp, seed=3)
    assert (a.delta_r, a.config) == (b.delta_r, b.config)
    with pytest.raises(SearchError):
        find_attack(sp, budget=0)


def test_attack_configs_enumeration():
    sp = _space(placements=("near_a", "wormhole"), strategies=("min_delay", "one_direction", "wormhole"),
                asymmetric_links=True)
    labels = [c.label for c in attack_configs(sp)]
    assert len(labels) == 3 * 4
    assert "wormhole/wormhole/a_to_b_down" in labels
    assert "near_a/one_direction(B->A)/both_down" in labels


def test_wormhole_placement_puts_ends_on_victims():
    sp = _space(placements=("wormhole",), strategies=("wormhole",))
    s = build_attack_scenario(sp, AttackConfig(50.0, LinkConfig.BOTH_DOWN, Placement.WORMHOLE, "wormhole"), 0)
    assert s.world.node("E1").pos == s.world.node("A").pos
    assert s.world.node("E2").pos == s.world.node("B").pos
    assert not s.adversary.strategy.bidirectional
    crt = _space("CRT", placements=("wormhole",), strategies=("wormhole",))
    s = build_attack_scenario(crt, AttackConfig(50.0, LinkConfig.BOTH_DOWN, Placement.WORMHOLE, "wormhole"), 0)
    assert s.adversary.strategy.bidirectional


def test_bad_spaces():
    with pytest.raises(SearchError):
        SearchSpace(cfg("BT"), (), (0,))
    with pytest.raises(SearchError):
        SearchSpace(cfg("BT"), (0.0,), (0,))
    with pytest.raises(SearchError):
        _space(strategies=("teleport",))
    with pytest.raises(SearchError):
        exhaustive_scan(_space(deltas=tuple(range(100))), cap=10)
    with pytest.raises(SearchError):
        min_safe_relay_delay(_space(), tol=0)


def test_unbounded_attack_detected():
    # an ultrasound protocol against RF relays is never safe at any probed delay below the cap
    sp = SearchSpace(cfg("BT", R=10.0, v=340.0), (1.0,), (0,), v=340.0, v_adv=299_792_458.0,
                     placements=("wormhole",), strategies=("wormhole",))
    r = min_safe_relay_delay(sp, tol=10**9, hi_start=10**9)
    assert r.threshold_ps > 29_411_764_706 - 10**9


def test_analytic_targets():
    assert analytic_target_ps(_space()) == 333_564
    assert analytic_target_ps(_space("CRT", asymmetric_links=True, strategies=("one_direction",))) == 667_128
    assert analytic_target_ps(_space("CRT")) == 333_564
    assert analytic_target_ps(_space("BTL")) == 0


def test_load_space_files():
    sp = load_space(SPACES / "bt_grid.toml")
    assert len(sp.distances) == 99 and len(sp.deltas) == 401
    assert load_space(SPACES / "tl_grid.toml", "CRTL").protocol.protocol is Protocol.CRTL
    with pytest.raises(ScenarioError, match="cannot read"):
        load_space(SPACES / "missing.toml")
