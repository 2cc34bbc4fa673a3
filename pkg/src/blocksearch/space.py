"""The finite MDP over block choices: states, legal actions, transitions,
trajectories, and the net-string codec.

A state is the pair (depth, current), where current is the block code of the
layer just placed, or one of the two sentinels START / POST_GAP. Actions are
block codes plus the two terminators. Q-table identity deliberately keys on
(depth, current block) only, not the whole prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .catalog import (
    GAP,
    N_BLOCKS,
    SM,
    format_code,
    is_block,
    parse_code_classes,
)

# sentinel values for State.current (distinct axis from action codes)
START = 12
POST_GAP = 13
N_CURRENT = 14

N_ACTIONS = 14  # 12 block codes + GAP + SM

MAX_DEPTH_DEFAULT = 5

# refuse to enumerate spaces larger than this
ENUMERATION_GUARD = 10_000_000


class SpaceError(ValueError):
    """Illegal state/action combination or malformed net string."""


class State(NamedTuple):
    depth: int
    current: int  # block code, START, or POST_GAP

    def label(self) -> str:
        if self.current == START:
            return "(0,start)"
        if self.current == POST_GAP:
            return f"({self.depth},post-gap)"
        return f"({self.depth},B({self.current}))"


TERMINAL = State(-1, -1)


def initial_state() -> State:
    return State(0, START)


def is_terminal(s: State) -> bool:
    return s == TERMINAL


def legal_actions(s: State, max_depth: int = MAX_DEPTH_DEFAULT) -> tuple[int, ...]:
    """Actions available from ``s``; never empty for a non-terminal state."""
    if is_terminal(s):
        raise SpaceError("terminal state admits no actions")
    if s.current == START:
        return (0,)  # the dense block is the mandatory first pick
    if s.current == POST_GAP:
        return (SM,)
    if s.depth < max_depth:
        return tuple(range(N_ACTIONS))
    return (GAP, SM)


def apply(s: State, a: int) -> State:
    """Deterministic transition; raises if ``a`` is structurally illegal in
    ``s``. The depth bound is a property of the search, not of the state, so
    it is enforced by the samplers and validators rather than here."""
    if is_terminal(s):
        raise SpaceError("cannot act in terminal state")
    if s.current == START:
        if a != 0:
            raise SpaceError(f"only B(0) is legal from {s.label()}, got {format_code(a)}")
        return State(1, 0)
    if s.current == POST_GAP:
        if a != SM:
            raise SpaceError(f"only SM is legal from {s.label()}, got {format_code(a)}")
        return TERMINAL
    if a == SM:
        return TERMINAL
    if a == GAP:
        return State(s.depth, POST_GAP)
    if is_block(a):
        return State(s.depth + 1, a)
    raise SpaceError(f"unknown action {a!r} in {s.label()}")


@dataclass(frozen=True)
class Trajectory:
    """A complete start-to-terminal action sequence.

    ``blocks`` is the ordered action list: one or more block codes (the first
    always 0), then an optional GAP, then SM.
    """

    blocks: tuple[int, ...]

    def __post_init__(self):
        validate_blocks(self.blocks)

    @property
    def depth(self) -> int:
        """Number of block layers (terminators excluded)."""
        return len(self.blocks) - (2 if GAP in self.blocks else 1)

    def transitions(self) -> list[tuple[State, int, State]]:
        out = []
        s = initial_state()
        for a in self.blocks:
            nxt = apply(s, a)
            out.append((s, a, nxt))
            s = nxt
        return out

    def block_codes(self) -> tuple[int, ...]:
        """The non-terminator codes only."""
        return tuple(b for b in self.blocks if is_block(b))


def validate_blocks(blocks: tuple[int, ...], max_depth: int | None = None) -> None:
    """Check the trajectory invariants; raise SpaceError on violation."""
    if len(blocks) < 2:
        raise SpaceError(f"sequence too short: {list(blocks)}")
    if blocks[0] != 0:
        raise SpaceError("trajectory must start with B(0)")
    if blocks[-1] != SM:
        raise SpaceError("trajectory must end with SM")
    body = blocks[:-1]
    if body and body[-1] == GAP:
        body = body[:-1]
    for b in body:
        if not is_block(b):
            raise SpaceError(f"terminator {format_code(b)} in a non-terminal position")
    if not body:
        raise SpaceError("trajectory has no block layers")
    if max_depth is not None and len(body) > max_depth:
        raise SpaceError(f"{len(body)} block layers exceed max depth {max_depth}")


def make_trajectory(codes, max_depth: int | None = None) -> Trajectory:
    blocks = tuple(int(c) for c in codes)
    validate_blocks(blocks, max_depth=max_depth)
    return Trajectory(blocks)


def encode_net(t: Trajectory, classes: int = 10) -> str:
    """Net-string form, e.g. ``[B(0),B(0),SM(10)]``. No whitespace."""
    return "[" + ",".join(format_code(b, classes) for b in t.blocks) + "]"


def encode_blocks(blocks, classes: int = 10) -> str:
    return encode_net(make_trajectory(blocks), classes)


def decode_net(text: str, max_depth: int = MAX_DEPTH_DEFAULT) -> Trajectory:
    """Parse a net string back into a trajectory, enforcing all invariants."""
    if not (text.startswith("[") and text.endswith("]")):
        raise SpaceError(f"net string must be bracketed: {text!r}")
    items = text[1:-1].split(",")
    codes = []
    classes_seen = set()
    for item in items:
        code, classes = parse_code_classes(item)
        if classes is not None:
            classes_seen.add(classes)
        codes.append(code)
    if len(classes_seen) > 1:
        raise SpaceError(f"inconsistent class counts in {text!r}")
    validate_blocks(tuple(codes), max_depth=max_depth)
    return Trajectory(tuple(codes))


def count_trajectories(max_depth: int) -> int:
    """Closed form: sum over depth d of 12^(d-1) * 2 endings."""
    return sum(2 * N_BLOCKS ** (d - 1) for d in range(1, max_depth + 1))


def enumerate_all(max_depth: int) -> Iterator[Trajectory]:
    """Every legal complete trajectory, exactly once, in lexicographic order
    of its action codes (blocks ascending, then GAP, then SM)."""
    total = count_trajectories(max_depth)
    if total > ENUMERATION_GUARD:
        raise SpaceError(
            f"refusing to enumerate {total} trajectories (guard {ENUMERATION_GUARD})"
        )

    def walk(prefix: list[int], depth: int):
        # actions in ascending code order gives lexicographic emission
        for a in range(N_BLOCKS) if depth < max_depth else ():
            prefix.append(a)
            yield from walk(prefix, depth + 1)
            prefix.pop()
        yield Trajectory(tuple(prefix) + (GAP, SM))
        yield Trajectory(tuple(prefix) + (SM,))

    yield from walk([0], 1)
