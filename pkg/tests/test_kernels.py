import os
import subprocess
import sys

import numpy as np
import pytest

from blocksearch import kernels
from blocksearch.qlearn import QTable
from blocksearch.space import MAX_DEPTH_DEFAULT


def test_numba_is_active_by_default():
    # the environment under test ships numba; the fallback is opt-in
    if os.environ.get("BLOCKSEARCH_NO_NUMBA"):
        pytest.skip("fallback explicitly requested")
    assert kernels.NUMBA_ENABLED


def test_rollout_buffer_contract():
    q = QTable(MAX_DEPTH_DEFAULT)
    out = np.empty(MAX_DEPTH_DEFAULT + 2, dtype=np.int64)
    uniforms = np.zeros(2 * (MAX_DEPTH_DEFAULT + 2))
    n = kernels.rollout(q.values, MAX_DEPTH_DEFAULT, 0.0, uniforms, out)
    assert 2 <= n <= MAX_DEPTH_DEFAULT + 2
    assert out[n - 1] == 13  # SM terminates every rollout


def test_legal_fill_matches_space_module():
    from blocksearch.space import POST_GAP, START, State, legal_actions

    buf = np.empty(14, dtype=np.int64)
    for depth, cur in [(0, START), (1, 0), (3, 7), (5, 11), (2, POST_GAP)]:
        n = kernels.legal_fill(depth, cur, 5, buf)
        assert tuple(buf[:n]) == legal_actions(State(depth, cur), 5)


def test_env_flag_selects_pure_path_with_identical_results(tmp_path):
    """The numpy fallback must reproduce the numba path bit for bit."""
    script = r"""
import json, sys
import numpy as np
from blocksearch import kernels
from blocksearch.harness import SearchConfig, run_search
from blocksearch.qlearn import EpsilonSchedule

cfg = SearchConfig(
    seed=3,
    schedule=EpsilonSchedule(((1.0, 12), (0.5, 6))),
    db_path=sys.argv[1],
    checkpoint_path=sys.argv[2],
)
run_search(cfg)
print(json.dumps({"numba": kernels.NUMBA_ENABLED}))
"""
    outputs = {}
    for label, env_extra in (("jit", {}), ("pure", {"BLOCKSEARCH_NO_NUMBA": "1"})):
        db = tmp_path / f"{label}.jsonl"
        ck = tmp_path / f"{label}.ck"
        env = dict(os.environ, **env_extra)
        proc = subprocess.run(
            [sys.executable, "-c", script, str(db), str(ck)],
            env=env, capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        outputs[label] = (db.read_bytes(), proc.stdout.strip())
    assert '"numba": true' in outputs["jit"][1]
    assert '"numba": false' in outputs["pure"][1]
    assert outputs["jit"][0] == outputs["pure"][0]


def test_bellman_sweep_matches_manual_eq3():
    rng = np.random.default_rng(8)
    q = QTable(3)
    q.values[:] = rng.random(q.values.shape)
    manual = q.values.copy()

    actions = np.array([0, 5, 12, 13], dtype=np.int64)
    alpha, gamma, reward = 0.3, 0.9, 0.77
    kernels.bellman_sweep(q.values, actions, 4, reward, alpha, gamma, 3)

    # states: (0,START=12) -a0-> (1,0) -a5-> (2,5) -GAP-> (2,PG=13) -SM-> T
    def upd(d, c, a, target):
        manual[d, c, a] = (1 - alpha) * manual[d, c, a] + alpha * target

    upd(2, 13, 13, reward)
    upd(2, 5, 12, gamma * manual[2, 13, 13])
    nxt = manual[2, 5, :].max()  # depth 2 of max_depth 3: all 14 actions legal
    upd(1, 0, 5, gamma * nxt)
    nxt = manual[1, 0, :].max()
    upd(0, 12, 0, gamma * nxt)
    assert np.array_equal(q.values, manual)
