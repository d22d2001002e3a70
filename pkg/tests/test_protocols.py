import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndsim.engine import Session, simulate
from ndsim.messages import Beacon, NonceSource, forge, seal
from ndsim.model import Position
from ndsim.protocols import (
    AwaitingBeacon,
    ConfigError,
    Decide,
    Idle,
    NodeContext,
    Protocol,
    ProtocolConfig,
    Received,
    Send,
    SetTimer,
    Start,
    Verdict,
    bt_decide,
    btl_decide,
    crt_decide,
    crtl_decide,
    drive,
)

from conftest import cfg, node, pair_world, world

A, B = Position(0, 0), Position(50, 0)


def test_bt_boundary():
    c = cfg("BT", eps_t=0)
    assert bt_decide(0, 333_564, c).verdict is Verdict.ACCEPT
    m = bt_decide(0, 333_565, c)
    assert m.verdict is Verdict.REJECT and m.reason == "too_far"
    assert bt_decide(0, 334_564, cfg("BT")).verdict is Verdict.ACCEPT


def test_bt_anachronism():
    m = bt_decide(1_000_000, 0, cfg("BT"))
    assert m.verdict is Verdict.REJECT and m.reason == "anachronistic"


def test_btl_relay_mismatch():
    # 100 ns of relay delay is about 29.98 m of phantom distance
    m = btl_decide(0, A, 166_782 + 100_000, B, cfg("BTL"))
    assert m.verdict is Verdict.REJECT
    assert m.d_tof_m - m.d_loc_m == pytest.approx(29.98, abs=0.01)


def test_btl_nlos_mismatch():
    m = btl_decide(0, A, 167_782, B, cfg("BTL"))
    assert m.verdict is Verdict.REJECT
    assert m.d_tof_m - m.d_loc_m == pytest.approx(0.2998, abs=1e-4)


def test_btl_budget_boundary():
    c = cfg("BTL")  # eps_d 0.10 m -> 333 ps
    assert c.dist_budget_ps == 333
    assert btl_decide(0, A, 166_782 + 333, B, c).verdict is Verdict.ACCEPT
    assert btl_decide(0, A, 166_782 + 334, B, c).verdict is Verdict.REJECT


def test_crt_examples():
    c = cfg("CRT")
    m = crt_decide(0, 2 * 166_782 + 1_000_000 + 233_148, c)
    assert m.elapsed_ps == 566_712 and m.verdict is Verdict.ACCEPT
    assert crt_decide(0, 1_000_000 + 667_128 + 1_000, c).verdict is Verdict.ACCEPT
    assert crt_decide(0, 1_000_000 + 667_128 + 1_001, c).verdict is Verdict.REJECT


def test_crtl_one_ns_each_leg():
    c = cfg("CRTL")
    m = crtl_decide(0, 2 * 166_782 + 2_000 + 1_000_000, A, B, c)
    assert m.verdict is Verdict.REJECT and m.reason == "mismatch"
    assert crtl_decide(0, 2 * 166_782 + 1_000_000, A, B, c).verdict is Verdict.ACCEPT


def test_config_errors():
    with pytest.raises(ConfigError, match="range_m"):
        ProtocolConfig(Protocol.BT, R=-1)
    with pytest.raises(ConfigError, match="range_m"):
        ProtocolConfig(Protocol.CRT)
    with pytest.raises(ConfigError):
        ProtocolConfig(Protocol.BTL, eps_d=-0.1)
    with pytest.raises(ValueError):
        ProtocolConfig("XX", R=1)


def test_wait_defaults():
    assert cfg("BT").wait_ps() == 333_564 + 1_000 + 1_000
    assert cfg("CRT").wait_ps() == 2 * 333_564 + 1_000_000 + 1_000
    assert cfg("BTL").wait_ps() == 1_000_000_000
    assert cfg("CRTL").wait_ps() == 1_001_000_000
    assert cfg("BT", timeout=5).wait_ps() == 5


# -- state machine ---------------------------------------------------------------


def _ctx(nid, pos, now=0, offset=0):
    return NodeContext(nid, pos, offset, now, NonceSource())


def test_drive_beacon_start():
    c = cfg("BT")
    st_a, acts = drive(Idle(), Start(), c, _ctx("A", A), "A", "B")
    assert isinstance(acts[0], Send) and acts[0].msg.body.t_send_claimed == 0
    st_b, acts = drive(Idle(), Start(), c, _ctx("B", B), "A", "B")
    assert isinstance(st_b, AwaitingBeacon) and acts == [SetTimer(c.wait_ps() + 1)]


def test_drive_ignores_forged_and_foreign_beacons():
    c = cfg("BT")
    st = AwaitingBeacon(0)
    for msg in (forge("A", Beacon("A", 0)), seal("C", Beacon("C", 0))):
        new, acts = drive(st, Received(0, msg), c, _ctx("B", B, now=166_782), "A", "B")
        assert new == st and acts == []


def test_drive_decides_once():
    c = cfg("BT")
    msg = seal("A", Beacon("A", 0))
    st, acts = drive(AwaitingBeacon(0), Received(0, msg), c, _ctx("B", B, now=166_782), "A", "B")
    assert isinstance(acts[0], Decide) and acts[0].decision.accepted
    again, acts = drive(st, Received(1, msg), c, _ctx("B", B, now=200_000), "A", "B")
    assert again is st and acts == []


def test_crt_happy_path_through_engine(ab50):
    tr = simulate(ab50, cfg("CRT"), [Session("A", "B")], 10**8)
    assert len(tr.transmissions) == 2 and len(tr.deliveries) == 2
    (d,) = tr.decisions
    assert d.accepted and d.decider == "A" and d.measured.elapsed_ps == 333_564
    assert tr.decisions[0].t_decided == 1_333_564


def test_crt_timeout_when_reverse_link_down():
    w = pair_world(50.0, links={("B", "A"): []})
    tr = simulate(w, cfg("CRT"), [Session("A", "B")], 10**8)
    (d,) = tr.decisions
    assert d.verdict is Verdict.REJECT and d.measured.reason == "timeout"
    assert d.t_decided == cfg("CRT").wait_ps() + 1


def test_duplicate_beacon_is_ignored():
    w = world([node("A", 0), node("B", 50), node("E", 25, adversarial=True)])
    from ndsim.adversary import AdversaryConfig, MinDelay

    adv = AdversaryConfig({"E"}, 10_000, MinDelay())
    tr = simulate(w, cfg("BT"), [Session("A", "B")], 10**8, adv)
    assert len([dv for dv in tr.deliveries if dv.receiver == "B"]) == 2
    (d,) = tr.decisions
    assert d.measured.elapsed_ps == 166_782  # first copy decides


def test_bt_clock_offset_rejects():
    w = world([node("A", 0, offset=-250_000), node("B", 50, offset=250_000)])
    (d,) = simulate(w, cfg("BT"), [Session("A", "B")], 10**8).decisions
    assert d.verdict is Verdict.REJECT and d.measured.elapsed_ps == 666_782


@settings(max_examples=60, deadline=None)
@given(st.integers(-10**9, 10**9), st.integers(-10**9, 10**9), st.floats(1, 99), st.sampled_from(["CRT", "CRTL"]))
def test_cr_decisions_invariant_under_offsets(oa, ob, d, kind):
    base = simulate(pair_world(d), cfg(kind), [Session("A", "B")], 10**10).decisions
    skew = world([node("A", 0, offset=oa), node("B", d, offset=ob)])
    got = simulate(skew, cfg(kind), [Session("A", "B")], 10**10).decisions
    assert [(x.verdict, x.measured.elapsed_ps) for x in got] == [(x.verdict, x.measured.elapsed_ps) for x in base]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 5_000), st.integers(0, 5_000))
def test_bt_tolerance_monotone(elapsed, e1, e2):
    lo, hi = sorted((e1, e2))
    if bt_decide(0, elapsed, cfg("BT", eps_t=lo)).verdict is Verdict.ACCEPT:
        assert bt_decide(0, elapsed, cfg("BT", eps_t=hi)).verdict is Verdict.ACCEPT


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 999), st.sampled_from(["BTL", "CRTL"]))
def test_zero_tolerance_direct_los_accepts(d, kind):
    c = cfg(kind, eps_d=0.0)
    tr = simulate(pair_world(d), c, [Session("A", "B")], c.wait_ps() + 2)
    assert tr.decisions[0].accepted
