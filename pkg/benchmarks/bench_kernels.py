#!/usr/bin/env python3
"""Benchmark the Q-learning kernels: numba-compiled vs pure-numpy fallback.

Run it twice to compare paths, or just run it once and let it re-exec itself
with BLOCKSEARCH_NO_NUMBA=1 for the comparison table:

    python benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from blocksearch import kernels
from blocksearch.qlearn import QTable, ReplayEntry, ReplayMemory
from blocksearch.space import MAX_DEPTH_DEFAULT, encode_net, make_trajectory

N_ROLLOUTS = 50_000
N_REPLAY_ENTRIES = 200
N_REPLAY_DRAWS = 100
N_REPLAY_ROUNDS = 2_000


def fill_memory(rng) -> ReplayMemory:
    mem = ReplayMemory(MAX_DEPTH_DEFAULT)
    q = QTable(MAX_DEPTH_DEFAULT)
    out = np.empty(MAX_DEPTH_DEFAULT + 2, dtype=np.int64)
    it = 0
    while len(mem) < N_REPLAY_ENTRIES:
        uniforms = rng.random(2 * (MAX_DEPTH_DEFAULT + 2))
        n = kernels.rollout(q.values, MAX_DEPTH_DEFAULT, 1.0, uniforms, out)
        blocks = tuple(int(x) for x in out[:n])
        if blocks in mem:
            continue
        it += 1
        t = make_trajectory(blocks)
        mem.add(
            ReplayEntry(blocks, encode_net(t), float(rng.random()), it, 1.0, 0, 0.0)
        )
    return mem


def bench() -> dict:
    rng = np.random.default_rng(42)
    q = QTable(MAX_DEPTH_DEFAULT)
    out = np.empty(MAX_DEPTH_DEFAULT + 2, dtype=np.int64)

    # warm-up triggers JIT compilation when enabled
    uniforms = rng.random(2 * (MAX_DEPTH_DEFAULT + 2))
    kernels.rollout(q.values, MAX_DEPTH_DEFAULT, 0.5, uniforms, out)
    mem = fill_memory(rng)
    actions, lengths, rewards = mem.arrays()
    order = rng.integers(0, len(mem), size=N_REPLAY_DRAWS)
    kernels.replay_sweep(q.values, actions, lengths, rewards, order, 0.01, 1.0,
                         MAX_DEPTH_DEFAULT)

    t0 = time.perf_counter()
    for _ in range(N_ROLLOUTS):
        uniforms = rng.random(2 * (MAX_DEPTH_DEFAULT + 2))
        kernels.rollout(q.values, MAX_DEPTH_DEFAULT, 0.5, uniforms, out)
    rollout_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    for _ in range(N_REPLAY_ROUNDS):
        order = rng.integers(0, len(mem), size=N_REPLAY_DRAWS)
        kernels.replay_sweep(q.values, actions, lengths, rewards, order, 0.01, 1.0,
                             MAX_DEPTH_DEFAULT)
    replay_s = time.perf_counter() - t0

    return {"rollout_s": rollout_s, "replay_s": replay_s}


def main() -> int:
    mode = "numba" if kernels.NUMBA_ENABLED else "numpy"
    res = bench()
    print(f"[{mode}] rollout: {N_ROLLOUTS} calls in {res['rollout_s']:.3f}s "
          f"({res['rollout_s'] / N_ROLLOUTS * 1e6:.2f} us/call)")
    print(f"[{mode}] replay sweep: {N_REPLAY_ROUNDS} batches of {N_REPLAY_DRAWS} in "
          f"{res['replay_s']:.3f}s ({res['replay_s'] / N_REPLAY_ROUNDS * 1e3:.3f} ms/batch)")

    if kernels.NUMBA_ENABLED and os.environ.get("_BENCH_CHILD") != "1":
        env = dict(os.environ, BLOCKSEARCH_NO_NUMBA="1", _BENCH_CHILD="1")
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__)],
            env=env, capture_output=True, text=True,
        )
        sys.stdout.write(proc.stdout)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return proc.returncode
        child = {}
        for line in proc.stdout.splitlines():
            if "rollout:" in line:
                child["rollout_s"] = float(line.split(" in ")[1].split("s ")[0])
            if "replay sweep:" in line:
                child["replay_s"] = float(line.split(" in ")[1].split("s ")[0])
        if child:
            print(f"speedup: rollout x{child['rollout_s'] / res['rollout_s']:.1f}, "
                  f"replay x{child['replay_s'] / res['replay_s']:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
