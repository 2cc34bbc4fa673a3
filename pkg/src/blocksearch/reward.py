"""Evaluator boundary: a deterministic simulated oracle for desk-scale runs
and tests, and a line-protocol client for real external trainers.

The oracle is a test instrument, not an accuracy predictor. Its score
depends only on the multiset of block codes in a network, so permuting
blocks never changes it; any poison code forces the score to a fixed floor.
"""

from __future__ import annotations

import hashlib
import json
import math
import socket
from dataclasses import dataclass, field
from typing import Mapping

from .catalog import is_block
from .space import Trajectory, validate_blocks

# Per-block base accuracies. Chosen, not measured: they only have to give
# the search a stable landscape whose optimum family (dense-backbone nets
# carrying one strong concat-residual block) clears the bulk by more than
# the noise scale. The block 1 entry is moot because poisoning overrides
# it.
DEFAULT_BASE_SCORES: dict[int, float] = {
    0: 0.76,
    1: 0.50,
    2: 0.68,
    3: 0.70,
    4: 0.78,
    5: 0.56,
    6: 0.58,
    7: 0.60,
    8: 0.62,
    9: 0.63,
    10: 0.64,
    11: 0.66,
}

RESIDUAL_CONCAT_CODES = frozenset({2, 3, 4})
INCEPTION_CONCAT_CODES = frozenset({8, 9, 10, 11})
INCEPTION_PLAIN_CODES = frozenset({5, 6, 7})


@dataclass(frozen=True)
class SimulatedOracleConfig:
    base_scores: Mapping[int, float] = field(
        default_factory=lambda: dict(DEFAULT_BASE_SCORES)
    )
    noise_sigma: float = 0.02
    seed: int = 0
    poison_codes: frozenset[int] = frozenset({1})
    poison_value: float = 0.1
    # concat bonuses, ordered residual > inception-with-concat > plain
    bonus_residual_concat: float = 0.05
    bonus_inception_concat: float = 0.03
    bonus_inception_plain: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _seeded_noise(seed: int, codes: tuple[int, ...]) -> float:
    """Standard normal deviate keyed on (seed, block multiset); identical on
    every platform."""
    key = f"{seed}|{','.join(map(str, codes))}".encode()
    digest = hashlib.sha256(key).digest()
    a = int.from_bytes(digest[:8], "big")
    b = int.from_bytes(digest[8:16], "big")
    u1 = (a >> 11) / float(1 << 53)
    u2 = (b >> 11) / float(1 << 53)
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def oracle_evaluate(cfg: SimulatedOracleConfig, blocks) -> float:
    """Deterministic score in [0, 1] for a legal complete block sequence."""
    blocks = tuple(int(b) for b in blocks)
    validate_blocks(blocks)
    codes = tuple(sorted(b for b in blocks if is_block(b)))
    if any(b in cfg.poison_codes for b in codes):
        return cfg.poison_value
    score = sum(cfg.base_scores[b] for b in codes) / len(codes)
    present = set(codes)
    # one bonus, graded by the strongest concat tier present (the tiers
    # order residual-with-concat above inception-with-concat above plain
    # inception); tiers do not stack
    bonus = 0.0
    if present & INCEPTION_PLAIN_CODES:
        bonus = max(bonus, cfg.bonus_inception_plain)
    if present & INCEPTION_CONCAT_CODES:
        bonus = max(bonus, cfg.bonus_inception_concat)
    if present & RESIDUAL_CONCAT_CODES:
        bonus = max(bonus, cfg.bonus_residual_concat)
    score += bonus
    if cfg.noise_sigma > 0:
        score += cfg.noise_sigma * _seeded_noise(cfg.seed, codes)
    return min(1.0, max(0.0, score))


# --- wire protocol -----------------------------------------------------------
#
# Newline-delimited UTF-8 JSON records over a byte stream. One request line,
# one response line; unknown fields are ignored for forward compatibility.
#
# request:  {"id": int, "net": str, "dataset": str, "epochs": int,
#            "max_retrains": int, "lr0": float, "drop_factor": float,
#            "drop_every": int}
# response: {"id": int, "status": "ok"|"failed", "accuracy": float,
#            "detail": str}


@dataclass(frozen=True)
class TrainBudget:
    """Training budget sent with each request (defaults mirror the search's
    recipe: 30 epochs, lr 0.001 dropping by 0.2 every 5 epochs on a good
    start, retrained at most 5 times otherwise)."""

    epochs: int = 30
    max_retrains: int = 5
    lr0: float = 0.001
    drop_factor: float = 0.2
    drop_every: int = 5


@dataclass(frozen=True)
class EvalRequest:
    id: int
    blocks: tuple[int, ...]
    net_string: str
    dataset: str = "cifar10"
    budget: TrainBudget = TrainBudget()

    def to_line(self) -> str:
        rec = {
            "id": self.id,
            "net": self.net_string,
            "dataset": self.dataset,
            "epochs": self.budget.epochs,
            "max_retrains": self.budget.max_retrains,
            "lr0": self.budget.lr0,
            "drop_factor": self.budget.drop_factor,
            "drop_every": self.budget.drop_every,
        }
        return json.dumps(rec, separators=(",", ":"))


@dataclass(frozen=True)
class EvalResponse:
    id: int
    status: str  # "ok" | "failed"
    accuracy: float | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def request_for(trajectory: Trajectory, req_id: int, net_string: str,
                dataset: str = "cifar10", budget: TrainBudget = TrainBudget()) -> EvalRequest:
    return EvalRequest(req_id, trajectory.blocks, net_string, dataset, budget)


def parse_response_line(line: str) -> dict:
    rec = json.loads(line)
    if not isinstance(rec, dict):
        raise ValueError("response record is not an object")
    return rec


def external_evaluate(endpoint: str, req: EvalRequest, timeout: float = 600.0) -> EvalResponse:
    """Send one request to ``host:port`` and await the matching response.

    Never raises for protocol-level problems: transport errors, timeouts,
    id mismatches, malformed records and out-of-range accuracies all come
    back as a failed response with a distinct detail.
    """
    host, _, port_s = endpoint.rpartition(":")
    try:
        port = int(port_s)
    except ValueError:
        return EvalResponse(req.id, "failed", detail=f"transport: bad endpoint {endpoint!r}")
    try:
        with socket.create_connection((host or "127.0.0.1", port), timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall((req.to_line() + "\n").encode("utf-8"))
            buf = b""
            while b"\n" not in buf:
                chunk = sock.recv(65536)
                if not chunk:
                    return EvalResponse(req.id, "failed", detail="transport: connection closed")
                buf += chunk
    except socket.timeout:
        return EvalResponse(req.id, "failed", detail="timeout")
    except OSError as e:
        return EvalResponse(req.id, "failed", detail=f"transport: {e}")

    line = buf.split(b"\n", 1)[0].decode("utf-8", errors="replace")
    try:
        rec = parse_response_line(line)
    except ValueError as e:
        return EvalResponse(req.id, "failed", detail=f"parse: {e}")
    if rec.get("id") != req.id:
        return EvalResponse(req.id, "failed", detail=f"id mismatch: got {rec.get('id')!r}")
    status = rec.get("status")
    if status == "ok":
        acc = rec.get("accuracy")
        if not isinstance(acc, (int, float)) or not 0.0 <= float(acc) <= 1.0:
            return EvalResponse(req.id, "failed", detail=f"accuracy out of range: {acc!r}")
        return EvalResponse(req.id, "ok", float(acc), str(rec.get("detail", "")))
    return EvalResponse(req.id, "failed", detail=str(rec.get("detail", "remote failure")))
