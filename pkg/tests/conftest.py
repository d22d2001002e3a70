import sys

import pytest

from ndsim.model import (
    ChannelParams,
    LinkSchedule,
    NlosMap,
    NodeSpec,
    Position,
    Role,
    WorldConfig,
)
from ndsim.protocols import Protocol, ProtocolConfig

C = 299_792_458.0


def node(nid, x, y=0.0, adversarial=False, offset=0):
    role = Role.ADVERSARIAL if adversarial else Role.CORRECT
    return NodeSpec(nid, Position(float(x), float(y)), role, offset)


def world(nodes, links=None, nlos=None, v=C, v_adv=C, radio_range=1000.0, default_up=True):
    return WorldConfig(
        tuple(nodes),
        ChannelParams(v, v_adv),
        LinkSchedule(links or {}, default_up=default_up),
        NlosMap(nlos or {}),
        radio_range,
    )


def pair_world(d=50.0, **kw):
    return world([node("A", 0), node("B", d)], **kw)


def cfg(kind, **kw):
    p = Protocol(kind)
    if not p.uses_location:
        kw.setdefault("R", 100.0)
    return ProtocolConfig(p, **kw)


@pytest.fixture
def ab50():
    return pair_world(50.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
