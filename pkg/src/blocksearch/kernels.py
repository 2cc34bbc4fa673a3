"""Hot numeric kernels for the Q-learning loop.

The Q-table is a dense float64 array indexed [depth, current, action], with
current in 0..11 for blocks, 12 for the start sentinel and 13 for post-GAP,
and action in 0..11 for blocks, 12 for GAP, 13 for SM.

Every kernel is written as a plain numpy loop and compiled with numba's
``@njit`` when available. Setting ``BLOCKSEARCH_NO_NUMBA=1`` (or any
non-empty value) selects the pure-numpy interpretation of the same source,
which produces bit-identical float64 results; ``benchmarks/bench_kernels.py``
compares the two paths. Randomness enters only through caller-supplied
uniform draws, so both paths consume an identical random stream.
"""

from __future__ import annotations

import os

import numpy as np

_START = 12
_POST_GAP = 13
_GAP = 12
_SM = 13
_N_ACTIONS = 14


def numba_requested() -> bool:
    return not os.environ.get("BLOCKSEARCH_NO_NUMBA")


def _resolve_jit():
    if not numba_requested():
        return False, (lambda fn: fn)
    try:
        from numba import njit
    except ImportError:
        return False, (lambda fn: fn)
    return True, (lambda fn: njit(cache=True)(fn))


NUMBA_ENABLED, _jit = _resolve_jit()


@_jit
def legal_fill(depth, cur, max_depth, buf):
    """Write the legal action codes for state (depth, cur) into ``buf`` in
    ascending order; return how many there are."""
    if cur == _START:
        buf[0] = 0
        return 1
    if cur == _POST_GAP:
        buf[0] = _SM
        return 1
    if depth < max_depth:
        for a in range(_N_ACTIONS):
            buf[a] = a
        return _N_ACTIONS
    buf[0] = _GAP
    buf[1] = _SM
    return 2


@_jit
def rollout(q, max_depth, epsilon, uniforms, out):
    """Sample one epsilon-greedy trajectory into ``out``; return its length.

    ``uniforms`` supplies the random draws (at most two per step, consumed
    left to right). Greedy ties break to the lowest action code, which means
    lowest block first, then GAP, then SM.
    """
    buf = np.empty(_N_ACTIONS, dtype=np.int64)
    depth = 0
    cur = _START
    n = 0
    ui = 0
    while True:
        m = legal_fill(depth, cur, max_depth, buf)
        if uniforms[ui] < epsilon:
            u = uniforms[ui + 1]
            ui += 2
            j = int(u * m)
            if j >= m:
                j = m - 1
            a = buf[j]
        else:
            ui += 1
            a = buf[0]
            best = q[depth, cur, a]
            for t in range(1, m):
                v = q[depth, cur, buf[t]]
                if v > best:
                    best = v
                    a = buf[t]
        out[n] = a
        n += 1
        if a == _SM:
            return n
        if a == _GAP:
            cur = _POST_GAP
        else:
            depth += 1
            cur = a


@_jit
def bellman_sweep(q, actions, n_act, reward, alpha, gamma, max_depth):
    """One Q update pass over a complete trajectory, terminal transition
    first. The terminal transition observes ``reward`` and has no successor
    term; every earlier transition observes 0 and bootstraps from the max
    legal Q of its successor state, read from the current table contents."""
    dbuf = np.empty(n_act + 1, dtype=np.int64)
    cbuf = np.empty(n_act + 1, dtype=np.int64)
    depth = 0
    cur = _START
    dbuf[0] = depth
    cbuf[0] = cur
    for i in range(n_act):
        a = actions[i]
        if a < _GAP:
            depth += 1
            cur = a
        elif a == _GAP:
            cur = _POST_GAP
        dbuf[i + 1] = depth
        cbuf[i + 1] = cur
    buf = np.empty(_N_ACTIONS, dtype=np.int64)
    for i in range(n_act - 1, -1, -1):
        a = actions[i]
        if a == _SM:
            target = reward
        else:
            nd = dbuf[i + 1]
            nc = cbuf[i + 1]
            m = legal_fill(nd, nc, max_depth, buf)
            best = q[nd, nc, buf[0]]
            for t in range(1, m):
                v = q[nd, nc, buf[t]]
                if v > best:
                    best = v
            target = gamma * best
        d = dbuf[i]
        c = cbuf[i]
        q[d, c, a] = (1.0 - alpha) * q[d, c, a] + alpha * target


@_jit
def replay_sweep(q, actions2d, lengths, rewards, order, alpha, gamma, max_depth):
    """Apply bellman_sweep for the stored trajectories named by ``order``,
    in that order. ``actions2d`` holds one padded action row per stored
    entry."""
    for k in range(order.shape[0]):
        i = order[k]
        bellman_sweep(q, actions2d[i], lengths[i], rewards[i], alpha, gamma, max_depth)
