import json
import socketserver
import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocksearch.catalog import GAP, SM
from blocksearch.reward import (
    EvalRequest,
    SimulatedOracleConfig,
    TrainBudget,
    external_evaluate,
    oracle_evaluate,
)
from blocksearch.space import SpaceError, enumerate_all, make_trajectory


def test_poison_is_exact():
    cfg = SimulatedOracleConfig()
    assert oracle_evaluate(cfg, [0, 1, SM]) == 0.1
    assert oracle_evaluate(cfg, [0, 1, 4, 4, GAP, SM]) == 0.1


def test_poison_dominates_over_random_sequences():
    cfg = SimulatedOracleConfig()
    rng = np.random.default_rng(0)
    for _ in range(1000):
        depth = int(rng.integers(2, 6))
        codes = [0] + list(rng.integers(0, 12, size=depth - 1))
        codes[int(rng.integers(1, depth))] = 1
        codes.append(SM)
        assert oracle_evaluate(cfg, codes) == 0.1


def test_swap_invariance():
    cfg = SimulatedOracleConfig()
    a = oracle_evaluate(cfg, [0, 4, 3, SM])
    b = oracle_evaluate(cfg, [0, 3, 4, SM])
    assert a == b


def test_flat_base_scores_give_base_plus_bonus():
    flat = {c: 0.8 for c in range(12)}
    cfg = SimulatedOracleConfig(
        base_scores=flat, noise_sigma=0.0, poison_codes=frozenset()
    )
    assert oracle_evaluate(cfg, [0, 0, SM]) == pytest.approx(0.8)
    assert oracle_evaluate(cfg, [0, 4, SM]) == pytest.approx(0.85)
    assert oracle_evaluate(cfg, [0, 9, SM]) == pytest.approx(0.83)
    assert oracle_evaluate(cfg, [0, 5, SM]) == pytest.approx(0.80)
    # tiers do not stack: the strongest present wins
    assert oracle_evaluate(cfg, [0, 4, 9, 5, SM]) == pytest.approx(0.85)


def test_oracle_determinism():
    cfg = SimulatedOracleConfig(noise_sigma=0.05, seed=3)
    values = {oracle_evaluate(cfg, [0, 7, 2, SM]) for _ in range(10_000)}
    assert len(values) == 1


def test_oracle_seed_changes_noise():
    a = oracle_evaluate(SimulatedOracleConfig(seed=1), [0, 8, SM])
    b = oracle_evaluate(SimulatedOracleConfig(seed=2), [0, 8, SM])
    assert a != b


def test_oracle_range_over_whole_depth5_space():
    cfg = SimulatedOracleConfig(noise_sigma=0.1, seed=9)
    seen = set()
    for t in enumerate_all(5):
        key = tuple(sorted(t.block_codes()))
        if key in seen:
            continue
        seen.add(key)
        v = oracle_evaluate(cfg, t.blocks)
        assert 0.0 <= v <= 1.0


def test_oracle_rejects_illegal_sequence():
    with pytest.raises(SpaceError):
        oracle_evaluate(SimulatedOracleConfig(), [3, SM])


@settings(max_examples=100)
@given(st.lists(st.integers(0, 11), min_size=0, max_size=4), st.booleans())
def test_oracle_permutation_robust(tail, gap):
    cfg = SimulatedOracleConfig(noise_sigma=0.04, seed=5)
    suffix = ([GAP, SM] if gap else [SM])
    base = [0] + tail + suffix
    rng = np.random.default_rng(sum(tail) + len(tail))
    perm = [0] + list(rng.permutation(tail)) + suffix
    assert oracle_evaluate(cfg, base) == oracle_evaluate(cfg, perm)


# --- wire protocol client ---


class _StubHandler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline().decode("utf-8")
        reply = self.server.reply_fn(json.loads(line))
        if reply is None:
            time.sleep(30)  # silent server for timeout tests
            return
        self.wfile.write((json.dumps(reply) + "\n").encode("utf-8"))


class StubServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, reply_fn):
        super().__init__(("127.0.0.1", 0), _StubHandler)
        self.reply_fn = reply_fn


@pytest.fixture
def stub():
    servers = []

    def start(reply_fn):
        srv = StubServer(reply_fn)
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        return f"127.0.0.1:{srv.server_address[1]}"

    yield start
    for srv in servers:
        srv.shutdown()
        srv.server_close()


def req(req_id=1):
    t = make_trajectory([0, SM])
    return EvalRequest(req_id, t.blocks, "[B(0),SM(10)]", "cifar10", TrainBudget())


def test_request_line_fields():
    rec = json.loads(req(5).to_line())
    assert rec == {
        "id": 5,
        "net": "[B(0),SM(10)]",
        "dataset": "cifar10",
        "epochs": 30,
        "max_retrains": 5,
        "lr0": 0.001,
        "drop_factor": 0.2,
        "drop_every": 5,
    }


def test_roundtrip_echo(stub):
    endpoint = stub(lambda r: {"id": r["id"], "status": "ok", "accuracy": 0.42})
    resp = external_evaluate(endpoint, req(7), timeout=5.0)
    assert resp.ok and resp.accuracy == 0.42 and resp.id == 7


def test_unknown_response_fields_ignored(stub):
    endpoint = stub(lambda r: {"id": r["id"], "status": "ok", "accuracy": 0.9,
                               "future": [1, 2]})
    assert external_evaluate(endpoint, req(), timeout=5.0).ok


def test_id_mismatch_fails(stub):
    endpoint = stub(lambda r: {"id": r["id"] + 1, "status": "ok", "accuracy": 0.5})
    resp = external_evaluate(endpoint, req(3), timeout=5.0)
    assert not resp.ok
    assert "id mismatch" in resp.detail


def test_accuracy_out_of_range_fails(stub):
    endpoint = stub(lambda r: {"id": r["id"], "status": "ok", "accuracy": 1.7})
    resp = external_evaluate(endpoint, req(), timeout=5.0)
    assert not resp.ok
    assert "accuracy out of range" in resp.detail


def test_remote_failure_reported(stub):
    endpoint = stub(lambda r: {"id": r["id"], "status": "failed", "detail": "oom"})
    resp = external_evaluate(endpoint, req(), timeout=5.0)
    assert not resp.ok and resp.detail == "oom"


def test_malformed_response_fails(stub):
    endpoint = stub(lambda r: ["not", "an", "object"])
    resp = external_evaluate(endpoint, req(), timeout=5.0)
    assert not resp.ok
    assert "parse" in resp.detail


def test_timeout_within_tolerance(stub):
    endpoint = stub(lambda r: None)  # accepts, never replies
    t0 = time.perf_counter()
    resp = external_evaluate(endpoint, req(), timeout=1.0)
    elapsed = time.perf_counter() - t0
    assert resp.detail == "timeout"
    assert 0.8 <= elapsed <= 1.2


def test_transport_error_on_closed_port():
    resp = external_evaluate("127.0.0.1:1", req(), timeout=2.0)
    assert not resp.ok
    assert resp.detail.startswith("transport")
