from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndsim.model import (
    T_MAX,
    LinkSchedule,
    NlosMap,
    Obstacle,
    Position,
    WorldError,
    build_schedule_from_geometry,
    distance,
    flight_ps,
    link_up_over,
    propagation_delay,
    segments_intersect,
)

from conftest import node, pair_world, world


def test_distance_examples():
    assert distance(Position(0, 0), Position(3, 4)) == 5.0
    assert distance(Position(0, 0), Position(0, 0)) == 0.0
    assert distance(Position(0, 0), Position(300, 0)) == 300.0


def test_reference_flight_times():
    assert flight_ps(50, 299_792_458.0) == 166_782
    assert flight_ps(100, 299_792_458.0) == 333_564
    assert flight_ps(10, 299_792_458.0) == 33_356
    assert flight_ps(1000, 299_792_458.0) == 3_335_641
    assert flight_ps(50, 2 * 299_792_458.0) == 83_391
    assert flight_ps(10, 340.0) == 29_411_764_706


def test_propagation_delay_examples():
    w = world([node("A", 0), node("B", 300)], v=3e8)
    assert propagation_delay("A", "B", w) == 1_000_000
    w = pair_world(50.0)
    assert propagation_delay("A", "B", w) == 166_782
    w = pair_world(50.0, nlos={("A", "B"): 100_000})
    assert propagation_delay("A", "B", w) == 266_782
    assert propagation_delay("B", "A", w) == 166_782


def test_propagation_delay_rejects_self():
    with pytest.raises(WorldError):
        propagation_delay("A", "A", pair_world())


def test_link_up_over_examples():
    s = LinkSchedule({("A", "B"): [(0, 100)]})
    assert link_up_over(s, "A", "B", (10, 50))
    assert not link_up_over(s, "A", "B", (90, 110))
    assert not link_up_over(s, "A", "B", (100, 100))  # half-open end
    assert not link_up_over(s, "B", "A", (0, 1))  # default down
    assert link_up_over(LinkSchedule(default_up=True), "B", "A", (0, T_MAX - 1))
    with pytest.raises(ValueError):
        link_up_over(s, "A", "B", (5, 4))


def test_gap_between_intervals_breaks_flight():
    s = LinkSchedule({("A", "B"): [(0, 100), (100, 200)]})
    # adjacent intervals are separate; a flight across the seam is not covered
    assert not link_up_over(s, "A", "B", (90, 110))


@pytest.mark.parametrize("bad", [[(5, 5)], [(10, 5)], [(0, 10), (5, 20)], [(10, 20), (0, 5)]])
def test_bad_intervals(bad):
    with pytest.raises(WorldError):
        LinkSchedule({("A", "B"): bad})


def test_world_validation():
    with pytest.raises(WorldError, match="at least 2"):
        world([node("A", 0)])
    with pytest.raises(WorldError, match="unique"):
        world([node("A", 0), node("A", 1)])
    with pytest.raises(WorldError, match="unknown node"):
        pair_world(links={("A", "Z"): []})
    with pytest.raises(WorldError):
        Position(float("nan"), 0)
    with pytest.raises(WorldError):
        NlosMap({("A", "B"): -1})


# -- geometry -------------------------------------------------------------------


def _exact_intersect(p1, p2, q1, q2):
    """Independent oracle on exact rationals: parametric solve plus collinear overlap."""
    F = Fraction
    p1x, p1y, p2x, p2y = F(p1.x), F(p1.y), F(p2.x), F(p2.y)
    q1x, q1y, q2x, q2y = F(q1.x), F(q1.y), F(q2.x), F(q2.y)
    rx, ry = p2x - p1x, p2y - p1y
    sx, sy = q2x - q1x, q2y - q1y
    den = rx * sy - ry * sx
    qpx, qpy = q1x - p1x, q1y - p1y
    if den != 0:
        t = (qpx * sy - qpy * sx) / den
        u = (qpx * ry - qpy * rx) / den
        return 0 <= t <= 1 and 0 <= u <= 1
    if qpx * ry - qpy * rx != 0:
        return False  # parallel, not collinear
    rr = rx * rx + ry * ry
    if rr == 0:
        ss = sx * sx + sy * sy
        if ss == 0:
            return (p1x, p1y) == (q1x, q1y)
        t = (-(qpx) * sx + -(qpy) * sy) / ss
        return 0 <= t <= 1 and (q1x + t * sx, q1y + t * sy) == (p1x, p1y)
    t0 = (qpx * rx + qpy * ry) / rr
    t1 = t0 + (sx * rx + sy * ry) / rr
    return max(min(t0, t1), 0) <= min(max(t0, t1), 1)


coords = st.integers(-6, 6).map(float)
points = st.builds(Position, coords, coords)


@settings(max_examples=2000, deadline=None)
@given(points, points, points, points)
def test_segments_intersect_matches_exact_oracle(p1, p2, q1, q2):
    assert segments_intersect(p1, p2, q1, q2) == _exact_intersect(p1, p2, q1, q2)


def _min_sampled_gap(p1, p2, q1, q2, n=400):
    """Brute force: smallest distance between sampled points of the two segments."""
    pts_p = [Position(p1.x + (p2.x - p1.x) * i / n, p1.y + (p2.y - p1.y) * i / n) for i in range(n + 1)]
    best = float("inf")
    for j in range(n + 1):
        q = Position(q1.x + (q2.x - q1.x) * j / n, q1.y + (q2.y - q1.y) * j / n)
        best = min(best, min(distance(p, q) for p in pts_p))
    return best


def test_geometry_schedule_with_walls():
    nodes = [node("A", 0, 0), node("B", 50, 0), node("C", 0, 30), node("D", 2000, 0)]
    wall = Obstacle(Position(25, -10), Position(25, 10))  # blocks A-B only
    glass = Obstacle(Position(-5, 15), Position(5, 15), nlos_delay=500)  # delays A-C
    links, nlos = build_schedule_from_geometry(nodes, 1000.0, [wall, glass])
    assert links.up_intervals("A", "B") == ()
    assert links.up_intervals("B", "A") == ()
    assert links.up_intervals("A", "C") == ((0, T_MAX),)
    assert nlos.get("A", "C") == 500 and nlos.get("C", "A") == 500
    assert nlos.get("B", "C") == 0
    assert links.up_intervals("A", "D") == ()  # out of range
    # brute-force point sampling agrees on which pairs are obstructed
    for a, b in [("A", "B"), ("A", "C"), ("B", "C")]:
        pa, pb = (next(n.pos for n in nodes if n.id == x) for x in (a, b))
        hits_wall = _min_sampled_gap(pa, pb, wall.a, wall.b) < 0.2
        hits_glass = _min_sampled_gap(pa, pb, glass.a, glass.b) < 0.2
        assert (links.up_intervals(a, b) == ()) == hits_wall
        assert (nlos.get(a, b) > 0) == (hits_glass and not hits_wall)


def test_blocking_beats_delaying_and_max_delay_wins():
    nodes = [node("A", 0), node("B", 10)]
    o1 = Obstacle(Position(3, -1), Position(3, 1), nlos_delay=100)
    o2 = Obstacle(Position(6, -1), Position(6, 1), nlos_delay=700)
    _, nlos = build_schedule_from_geometry(nodes, 100.0, [o1, o2])
    assert nlos.get("A", "B") == 700
    links, nlos = build_schedule_from_geometry(nodes, 100.0, [o1, Obstacle(Position(5, -1), Position(5, 1))])
    assert links.up_intervals("A", "B") == () and nlos.get("A", "B") == 0


def test_degenerate_obstacle_rejected():
    with pytest.raises(WorldError):
        Obstacle(Position(1, 1), Position(1, 1))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=5, unique=True))
def test_distance_symmetry_and_triangle(pts):
    ps = [Position(x, y) for x, y in pts]
    for a in ps:
        for b in ps:
            assert distance(a, b) == distance(b, a)
            for c in ps:
                assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.permutations(range(3)))
def test_obstacle_order_does_not_matter(perm):
    nodes = [node("A", 0), node("B", 10), node("C", 5, 8)]
    obs = [
        Obstacle(Position(3, -1), Position(3, 1), nlos_delay=100),
        Obstacle(Position(6, -1), Position(6, 1), nlos_delay=700),
        Obstacle(Position(0, 4), Position(10, 4)),
    ]
    base = build_schedule_from_geometry(nodes, 100.0, obs)
    assert build_schedule_from_geometry(nodes, 100.0, [obs[i] for i in perm]) == base
