import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocksearch.catalog import GAP, SM
from blocksearch.space import (
    POST_GAP,
    START,
    SpaceError,
    State,
    TERMINAL,
    apply,
    count_trajectories,
    decode_net,
    encode_net,
    enumerate_all,
    initial_state,
    legal_actions,
    make_trajectory,
)


def test_initial_state():
    s = initial_state()
    assert s.depth == 0
    assert s.current == START


def test_legal_actions_start():
    assert legal_actions(initial_state(), 5) == (0,)


def test_legal_actions_midway_has_14():
    assert len(legal_actions(State(1, 0), 5)) == 14


def test_legal_actions_at_max_depth():
    assert legal_actions(State(5, 3), 5) == (GAP, SM)


def test_legal_actions_post_gap():
    assert legal_actions(State(2, POST_GAP), 5) == (SM,)


def test_legal_actions_terminal_raises():
    with pytest.raises(SpaceError):
        legal_actions(TERMINAL, 5)


def test_legal_actions_never_empty_for_reachable_states():
    max_depth = 5
    for depth in range(1, max_depth + 1):
        for cur in range(12):
            assert legal_actions(State(depth, cur), max_depth)
        assert legal_actions(State(depth, POST_GAP), max_depth)


def test_apply_transitions():
    assert apply(initial_state(), 0) == State(1, 0)
    assert apply(State(1, 0), 3) == State(2, 3)
    assert apply(State(2, 3), GAP) == State(2, POST_GAP)
    assert apply(State(2, POST_GAP), SM) == TERMINAL
    assert apply(State(2, 3), SM) == TERMINAL


def test_apply_is_pure():
    s = State(1, 0)
    assert apply(s, 7) == apply(s, 7)


def test_apply_rejects_illegal():
    with pytest.raises(SpaceError):
        apply(initial_state(), 3)
    with pytest.raises(SpaceError):
        apply(State(2, POST_GAP), 0)
    with pytest.raises(SpaceError):
        apply(TERMINAL, SM)


def test_trajectory_transitions_and_depth():
    t = make_trajectory([0, 3, GAP, SM])
    trs = t.transitions()
    assert trs[0] == (State(0, START), 0, State(1, 0))
    assert trs[-1] == (State(2, POST_GAP), SM, TERMINAL)
    assert t.depth == 2
    assert t.block_codes() == (0, 3)


def test_trajectory_invariants_rejected():
    with pytest.raises(SpaceError):
        make_trajectory([3, SM])  # must start with B(0)
    with pytest.raises(SpaceError):
        make_trajectory([0, 3])  # must end with SM
    with pytest.raises(SpaceError):
        make_trajectory([0, GAP, GAP, SM])
    with pytest.raises(SpaceError):
        make_trajectory([SM])
    with pytest.raises(SpaceError):
        make_trajectory([0, 0, 0, SM], max_depth=2)


def test_encode_net_examples():
    assert encode_net(make_trajectory([0, 0, SM]), 10) == "[B(0),B(0),SM(10)]"
    assert encode_net(make_trajectory([0, GAP, SM]), 10) == "[B(0),GAP(10),SM(10)]"


def test_decode_net_example():
    t = decode_net("[B(0),B(8),B(3),B(0),SM(10)]")
    assert t.depth == 4
    assert t.blocks == (0, 8, 3, 0, SM)


def test_decode_net_rejects_bad_start():
    with pytest.raises(SpaceError, match="start"):
        decode_net("[B(3),SM(10)]")


def test_decode_net_rejects_depth_overflow():
    with pytest.raises(SpaceError, match="depth"):
        decode_net("[B(0),B(0),B(0),B(0),B(0),B(0),SM(10)]", max_depth=5)


def test_decode_net_rejects_malformed():
    with pytest.raises(Exception):
        decode_net("B(0),SM(10)")
    with pytest.raises(Exception):
        decode_net("[B(0), SM(10)]")  # whitespace is not part of the grammar
    with pytest.raises(SpaceError):
        decode_net("[B(0),GAP(10),SM(8)]")  # inconsistent class counts


def test_count_trajectories_closed_form():
    assert count_trajectories(1) == 2
    assert count_trajectories(2) == 26
    assert count_trajectories(3) == 26 + 288
    assert count_trajectories(5) == 45242


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_enumeration_matches_closed_form_and_is_unique(depth):
    seen = set()
    for t in enumerate_all(depth):
        assert t.blocks not in seen
        seen.add(t.blocks)
    assert len(seen) == count_trajectories(depth)


def test_enumeration_depth1():
    nets = [encode_net(t) for t in enumerate_all(1)]
    assert nets == ["[B(0),GAP(10),SM(10)]", "[B(0),SM(10)]"]


def test_enumeration_lexicographic_order():
    prev = None
    for t in enumerate_all(2):
        if prev is not None:
            assert prev < t.blocks
        prev = t.blocks


def test_enumeration_guard():
    with pytest.raises(SpaceError, match="refusing"):
        next(iter(enumerate_all(8)))


@settings(max_examples=200)
@given(st.data())
def test_roundtrip_random_trajectories(data):
    depth = data.draw(st.integers(1, 5))
    codes = [0] + [data.draw(st.integers(0, 11)) for _ in range(depth - 1)]
    if data.draw(st.booleans()):
        codes.append(GAP)
    codes.append(SM)
    t = make_trajectory(codes)
    assert decode_net(encode_net(t)).blocks == t.blocks
