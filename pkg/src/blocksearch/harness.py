"""Search driver: walks the epsilon schedule, samples and evaluates unique
networks, updates the Q-table, and persists everything needed to resume.

Persistence layout:

* replay DB — append-only JSONL, one row per sampled iteration (cache hits
  flagged), byte-reproducible for a fixed seed under the simulated oracle;
* checkpoint — single structured-text file carrying the flat config, the
  loop counters, the RNG state, the replay-DB sync point (line count + hash)
  and every Q cell that differs from q0, ending in a whole-file checksum.

A crash between the DB append and the checkpoint write is healed on resume
by truncating the DB back to the checkpointed sync point and replaying the
iteration, which the fixed RNG stream makes byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import DbRow, load_db
from .graph import GraphError, build
from .qlearn import (
    EpsilonSchedule,
    LearningParams,
    Q0_DEFAULT,
    QTable,
    ReplayEntry,
    ReplayMemory,
    q_update,
    replay_update,
    sample_trajectory,
)
from .reward import (
    EvalRequest,
    SimulatedOracleConfig,
    TrainBudget,
    external_evaluate,
    oracle_evaluate,
)
from .space import Trajectory, count_trajectories, encode_net, decode_net

CHECKPOINT_VERSION = 1


class HarnessError(RuntimeError):
    pass


class CheckpointError(HarnessError):
    """Checkpoint missing, corrupt, or out of sync with the replay DB."""


class SimulatedCrash(RuntimeError):
    """Raised by the test-only crash hook between DB append and checkpoint."""


@dataclass(frozen=True)
class SearchConfig:
    max_depth: int = 5
    schedule: EpsilonSchedule = EpsilonSchedule()
    params: LearningParams = LearningParams()
    q0: float = Q0_DEFAULT
    replay_batch: int = 100
    replay_period: int = 1
    seed: int = 0
    evaluator: str = "simulated"  # "simulated" | "external"
    endpoint: str = ""
    oracle: SimulatedOracleConfig = SimulatedOracleConfig()
    oracle_seed: int | None = None  # defaults to seed
    class_count: int = 10
    input_shape: tuple[int, int, int] = (3, 32, 32)
    dataset: str = "cifar10"
    db_path: str = "replay_db.jsonl"
    checkpoint_path: str = "search_checkpoint.txt"
    dedupe: bool = True
    attempt_cap_factor: int = 50
    budget: TrainBudget = TrainBudget()
    timeout: float = 600.0
    deterministic_clock: bool | None = None  # None: simulated yes, external no

    def effective_oracle(self) -> SimulatedOracleConfig:
        seed = self.seed if self.oracle_seed is None else self.oracle_seed
        return replace(self.oracle, seed=seed)

    def clock_is_deterministic(self) -> bool:
        if self.deterministic_clock is None:
            return self.evaluator == "simulated"
        return self.deterministic_clock


@dataclass(frozen=True)
class LogRecord:
    iteration: int
    epsilon: float
    net_string: str
    accuracy: float
    was_cached: bool
    q_snapshot_hash: str


@dataclass
class SearchLog:
    records: list[LogRecord] = field(default_factory=list)

    def unique_count(self, epsilon: float | None = None) -> int:
        return sum(
            1
            for r in self.records
            if not r.was_cached and (epsilon is None or r.epsilon == epsilon)
        )


# --- flat key=value config text ----------------------------------------------


def _schedule_to_text(s: EpsilonSchedule) -> str:
    return ",".join(f"{e!r}:{n}" for e, n in s.stages)


def _schedule_from_text(text: str) -> EpsilonSchedule:
    stages = []
    for part in text.split(","):
        e, n = part.split(":")
        stages.append((float(e), int(n)))
    return EpsilonSchedule(tuple(stages))


def config_to_dict(cfg: SearchConfig) -> dict[str, str]:
    o = cfg.oracle
    d = {
        "max_depth": str(cfg.max_depth),
        "schedule": _schedule_to_text(cfg.schedule),
        "alpha": repr(cfg.params.alpha),
        "gamma": repr(cfg.params.gamma),
        "q0": repr(cfg.q0),
        "replay_batch": str(cfg.replay_batch),
        "replay_period": str(cfg.replay_period),
        "seed": str(cfg.seed),
        "evaluator": cfg.evaluator,
        "endpoint": cfg.endpoint,
        "oracle_seed": "" if cfg.oracle_seed is None else str(cfg.oracle_seed),
        "base_scores": ",".join(f"{k}:{v!r}" for k, v in sorted(o.base_scores.items())),
        "noise_sigma": repr(o.noise_sigma),
        "poison_codes": ",".join(str(c) for c in sorted(o.poison_codes)),
        "poison_value": repr(o.poison_value),
        "bonus_residual_concat": repr(o.bonus_residual_concat),
        "bonus_inception_concat": repr(o.bonus_inception_concat),
        "bonus_inception_plain": repr(o.bonus_inception_plain),
        "classes": str(cfg.class_count),
        "input_shape": "x".join(str(x) for x in cfg.input_shape),
        "dataset": cfg.dataset,
        "db": cfg.db_path,
        "checkpoint": cfg.checkpoint_path,
        "dedupe": "true" if cfg.dedupe else "false",
        "attempt_cap_factor": str(cfg.attempt_cap_factor),
        "epochs": str(cfg.budget.epochs),
        "max_retrains": str(cfg.budget.max_retrains),
        "lr0": repr(cfg.budget.lr0),
        "drop_factor": repr(cfg.budget.drop_factor),
        "drop_every": str(cfg.budget.drop_every),
        "timeout": repr(cfg.timeout),
        "deterministic_clock": (
            "" if cfg.deterministic_clock is None
            else ("true" if cfg.deterministic_clock else "false")
        ),
    }
    return d


def config_from_dict(d: dict[str, str]) -> SearchConfig:
    def get(key, default):
        v = d.get(key, "")
        return v if v != "" else default

    base_defaults = SimulatedOracleConfig()
    base_scores = dict(base_defaults.base_scores)
    if d.get("base_scores"):
        base_scores = {}
        for part in d["base_scores"].split(","):
            k, v = part.split(":")
            base_scores[int(k)] = float(v)
    poison = base_defaults.poison_codes
    if d.get("poison_codes") is not None and d.get("poison_codes", "") != "":
        poison = frozenset(int(c) for c in d["poison_codes"].split(","))
    elif d.get("poison_codes") == "":
        poison = frozenset()
    oracle = SimulatedOracleConfig(
        base_scores=base_scores,
        noise_sigma=float(get("noise_sigma", base_defaults.noise_sigma)),
        seed=0,
        poison_codes=poison,
        poison_value=float(get("poison_value", base_defaults.poison_value)),
        bonus_residual_concat=float(
            get("bonus_residual_concat", base_defaults.bonus_residual_concat)
        ),
        bonus_inception_concat=float(
            get("bonus_inception_concat", base_defaults.bonus_inception_concat)
        ),
        bonus_inception_plain=float(
            get("bonus_inception_plain", base_defaults.bonus_inception_plain)
        ),
    )
    det = d.get("deterministic_clock", "")
    return SearchConfig(
        max_depth=int(get("max_depth", 5)),
        schedule=(
            _schedule_from_text(d["schedule"]) if d.get("schedule") else EpsilonSchedule()
        ),
        params=LearningParams(
            alpha=float(get("alpha", 0.01)), gamma=float(get("gamma", 1.0))
        ),
        q0=float(get("q0", Q0_DEFAULT)),
        replay_batch=int(get("replay_batch", 100)),
        replay_period=int(get("replay_period", 1)),
        seed=int(get("seed", 0)),
        evaluator=get("evaluator", "simulated"),
        endpoint=d.get("endpoint", ""),
        oracle=oracle,
        oracle_seed=int(d["oracle_seed"]) if d.get("oracle_seed") else None,
        class_count=int(get("classes", 10)),
        input_shape=tuple(int(x) for x in get("input_shape", "3x32x32").split("x")),
        dataset=get("dataset", "cifar10"),
        db_path=get("db", "replay_db.jsonl"),
        checkpoint_path=get("checkpoint", "search_checkpoint.txt"),
        dedupe=get("dedupe", "true") == "true",
        attempt_cap_factor=int(get("attempt_cap_factor", 50)),
        budget=TrainBudget(
            epochs=int(get("epochs", 30)),
            max_retrains=int(get("max_retrains", 5)),
            lr0=float(get("lr0", 0.001)),
            drop_factor=float(get("drop_factor", 0.2)),
            drop_every=int(get("drop_every", 5)),
        ),
        timeout=float(get("timeout", 600.0)),
        deterministic_clock=None if det == "" else det == "true",
    )


def parse_config_file(path: str | Path) -> dict[str, str]:
    d = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HarnessError(f"config line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        d[key] = value
    return d


# --- evaluators ----------------------------------------------------------------


class SimulatedEvaluator:
    def __init__(self, cfg: SearchConfig):
        self.oracle = cfg.effective_oracle()

    def evaluate(self, t: Trajectory, req_id: int, net: str):
        return oracle_evaluate(self.oracle, t.blocks), "ok", ""


class ExternalEvaluator:
    def __init__(self, cfg: SearchConfig):
        if not cfg.endpoint:
            raise HarnessError("external evaluator requires an endpoint")
        self.endpoint = cfg.endpoint
        self.dataset = cfg.dataset
        self.budget = cfg.budget
        self.timeout = cfg.timeout

    def evaluate(self, t: Trajectory, req_id: int, net: str):
        req = EvalRequest(req_id, t.blocks, net, self.dataset, self.budget)
        resp = external_evaluate(self.endpoint, req, timeout=self.timeout)
        if resp.ok:
            return resp.accuracy, "ok", resp.detail
        return 0.0, "failed", resp.detail


def make_evaluator(cfg: SearchConfig):
    if cfg.evaluator == "simulated":
        return SimulatedEvaluator(cfg)
    if cfg.evaluator == "external":
        return ExternalEvaluator(cfg)
    raise HarnessError(f"unknown evaluator {cfg.evaluator!r}")


# --- checkpointing --------------------------------------------------------------


def _sha256_lines(lines: list[str]) -> str:
    h = hashlib.sha256()
    for ln in lines:
        h.update(ln.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class _LoopState:
    stage_index: int = 0
    done_in_stage: int = 0
    attempts_in_stage: int = 0
    iteration: int = 0
    new_models: int = 0
    complete: bool = False


def write_checkpoint(
    path: str | Path,
    cfg: SearchConfig,
    q: QTable,
    rng: np.random.Generator,
    st: _LoopState,
    db_count: int,
    db_hash: str,
) -> None:
    lines = [f"# blocksearch checkpoint v{CHECKPOINT_VERSION}", "[config]"]
    for k, v in config_to_dict(cfg).items():
        lines.append(f"{k} = {v}")
    lines.append("[state]")
    lines.append(f"stage_index = {st.stage_index}")
    lines.append(f"done_in_stage = {st.done_in_stage}")
    lines.append(f"attempts_in_stage = {st.attempts_in_stage}")
    lines.append(f"iteration = {st.iteration}")
    lines.append(f"new_models = {st.new_models}")
    lines.append(f"complete = {'true' if st.complete else 'false'}")
    lines.append(f"rng = {json.dumps(rng.bit_generator.state, sort_keys=True)}")
    lines.append(f"db_lines = {db_count}")
    lines.append(f"db_sha256 = {db_hash}")
    lines.append("[q]")
    lines.extend(q.dump_cells())
    lines.append(f"checksum = {_sha256_lines(lines)}")
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_checkpoint(path: str | Path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}") from None
    lines = text.splitlines()
    if not lines or not lines[-1].startswith("checksum = "):
        raise CheckpointError("integrity check failed: missing checksum line")
    recorded = lines[-1].split(" = ", 1)[1]
    if _sha256_lines(lines[:-1]) != recorded:
        raise CheckpointError("integrity check failed: checksum mismatch")

    section = None
    cfg_d: dict[str, str] = {}
    st_d: dict[str, str] = {}
    qcells: list[str] = []
    for ln in lines[:-1]:
        if ln.startswith("#"):
            continue
        if ln in ("[config]", "[state]", "[q]"):
            section = ln
            continue
        if section == "[q]":
            qcells.append(ln)
        elif section == "[config]":
            k, v = ln.split(" = ", 1) if " = " in ln else (ln[:-2], "")
            cfg_d[k] = v
        elif section == "[state]":
            k, v = ln.split(" = ", 1)
            st_d[k] = v
        else:
            raise CheckpointError(f"unexpected checkpoint line {ln!r}")

    cfg = config_from_dict(cfg_d)
    st = _LoopState(
        stage_index=int(st_d["stage_index"]),
        done_in_stage=int(st_d["done_in_stage"]),
        attempts_in_stage=int(st_d["attempts_in_stage"]),
        iteration=int(st_d["iteration"]),
        new_models=int(st_d["new_models"]),
        complete=st_d["complete"] == "true",
    )
    q = QTable(cfg.max_depth, cfg.q0)
    for cell in qcells:
        q.load_cell(cell)
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(st_d["rng"])
    return cfg, q, rng, st, int(st_d["db_lines"]), st_d["db_sha256"]


# --- the search loop -------------------------------------------------------------


class _Runner:
    def __init__(self, cfg: SearchConfig):
        self.cfg = cfg
        self.q = QTable(cfg.max_depth, cfg.q0)
        self.rng = np.random.default_rng(cfg.seed)
        self.mem = ReplayMemory(cfg.max_depth)
        self.st = _LoopState()
        self.db_count = 0
        self.db_hasher = hashlib.sha256()
        self.log = SearchLog()
        self.evaluator = make_evaluator(cfg)

    def set_db_lines(self, lines: list[str]) -> None:
        self.db_count = len(lines)
        self.db_hasher = hashlib.sha256()
        for ln in lines:
            self.db_hasher.update(ln.encode("utf-8"))
            self.db_hasher.update(b"\n")

    def _checkpoint(self) -> None:
        write_checkpoint(
            self.cfg.checkpoint_path, self.cfg, self.q, self.rng, self.st,
            self.db_count, self.db_hasher.hexdigest(),
        )

    def _timestamp(self) -> float:
        if self.cfg.clock_is_deterministic():
            return float(self.st.iteration)
        return time.time()

    def _net_params(self, t: Trajectory) -> int:
        try:
            return build(t, self.cfg.input_shape, self.cfg.class_count).param_count
        except GraphError:
            # structurally unbuildable at this input size; informational only
            return 0

    def _append_db(self, fh, row: dict) -> None:
        line = json.dumps(row, separators=(",", ":"))
        fh.write(line + "\n")
        fh.flush()
        self.db_count += 1
        self.db_hasher.update(line.encode("utf-8"))
        self.db_hasher.update(b"\n")

    def _record(self, iteration, eps, net, acc, cached):
        self.log.records.append(
            LogRecord(iteration, eps, net, acc, cached, self.q.snapshot_hash())
        )

    def _restore_from_db(self, rows: list[DbRow]) -> None:
        for r in rows:
            if not r.cached:
                t = decode_net(r.net, max_depth=self.cfg.max_depth)
                self.mem.add(
                    ReplayEntry(
                        blocks=t.blocks,
                        net_string=r.net,
                        accuracy=r.accuracy,
                        iteration=r.iteration,
                        epsilon=r.epsilon,
                        param_count=r.params,
                        wall_time=r.timestamp,
                        status=r.status,
                    )
                )
            self.log.records.append(
                LogRecord(r.iteration, r.epsilon, r.net, r.accuracy, r.cached, "")
            )

    def run(self, fh, stop_after: int | None = None,
            crash_after_append: int | None = None) -> SearchLog:
        cfg, st = self.cfg, self.st
        stages = cfg.schedule.stages
        if st.iteration == 0 and not st.complete:
            # make a crash inside the very first iteration resumable
            self._checkpoint()
        space_size = count_trajectories(cfg.max_depth)
        while st.stage_index < len(stages):
            eps, quota = stages[st.stage_index]
            if st.done_in_stage >= quota:
                st.stage_index += 1
                st.done_in_stage = 0
                st.attempts_in_stage = 0
                continue
            if cfg.dedupe and len(self.mem) >= space_size:
                # every legal net is already evaluated; no stage can fill a
                # unique-model quota anymore
                break
            if stop_after is not None and st.iteration >= stop_after:
                return self.log

            st.attempts_in_stage += 1
            cap = cfg.attempt_cap_factor * max(quota, 1)
            eps_used = 1.0 if st.attempts_in_stage > cap else eps
            t = sample_trajectory(self.q, eps_used, self.rng, cfg.max_depth)
            net = encode_net(t, cfg.class_count)
            st.iteration += 1

            stored = self.mem.get(t.blocks) if cfg.dedupe else None
            if stored is not None:
                acc, status, cached = stored.accuracy, stored.status, True
                params = stored.param_count
            else:
                acc, status, _detail = self.evaluator.evaluate(t, st.iteration, net)
                cached = False
                params = self._net_params(t)

            self._append_db(
                fh,
                {
                    "iteration": st.iteration,
                    "epsilon": eps,
                    "net": net,
                    "accuracy": acc,
                    "params": params,
                    "cached": cached,
                    "status": status,
                    "timestamp": self._timestamp(),
                },
            )
            if crash_after_append is not None and st.iteration == crash_after_append:
                raise SimulatedCrash(f"injected crash at iteration {st.iteration}")

            if not cached:
                if t.blocks not in self.mem:
                    self.mem.add(
                        ReplayEntry(
                            blocks=t.blocks,
                            net_string=net,
                            accuracy=acc,
                            iteration=st.iteration,
                            epsilon=eps,
                            param_count=params,
                            wall_time=self._timestamp(),
                            status=status,
                        )
                    )
                st.done_in_stage += 1
                st.new_models += 1

            q_update(self.q, t, acc, cfg.params)
            if not cached and cfg.replay_batch > 0 and (
                st.new_models % cfg.replay_period == 0
            ):
                replay_update(self.q, self.mem, cfg.replay_batch, self.rng, cfg.params)

            self._record(st.iteration, eps, net, acc, cached)
            self._checkpoint()

        st.complete = True
        self._checkpoint()
        return self.log

    def run_parallel(self, fh, endpoints: list[str]) -> SearchLog:
        """Keep one evaluation in flight per endpoint; apply completions in
        arrival order. Only this thread touches the Q-table, the replay
        memory and the DB file; workers do network I/O only. Departs from
        the strict sequential semantics: results are not byte-reproducible
        because arrival order depends on trainer timing."""
        from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait

        cfg, st = self.cfg, self.st
        stages = cfg.schedule.stages
        if st.iteration == 0 and not st.complete:
            self._checkpoint()
        space_size = count_trajectories(cfg.max_depth)
        submit_seq = st.iteration

        def apply_result(eps, t, net, acc, status, cached):
            st.iteration += 1
            params = (
                self.mem.get(t.blocks).param_count if cached else self._net_params(t)
            )
            self._append_db(fh, {
                "iteration": st.iteration,
                "epsilon": eps,
                "net": net,
                "accuracy": acc,
                "params": params,
                "cached": cached,
                "status": status,
                "timestamp": self._timestamp(),
            })
            if not cached:
                if t.blocks not in self.mem:
                    self.mem.add(ReplayEntry(
                        blocks=t.blocks, net_string=net, accuracy=acc,
                        iteration=st.iteration, epsilon=eps,
                        param_count=params, wall_time=self._timestamp(),
                        status=status,
                    ))
                st.done_in_stage += 1
                st.new_models += 1
            q_update(self.q, t, acc, cfg.params)
            if not cached and cfg.replay_batch > 0 and (
                st.new_models % cfg.replay_period == 0
            ):
                replay_update(self.q, self.mem, cfg.replay_batch, self.rng, cfg.params)
            self._record(st.iteration, eps, net, acc, cached)
            self._checkpoint()

        with ThreadPoolExecutor(max_workers=len(endpoints)) as pool:
            idle = list(endpoints)
            inflight = {}  # future -> (endpoint, eps, trajectory, net)
            inflight_keys: set[tuple[int, ...]] = set()

            def drain(block: bool):
                nonlocal inflight
                if not inflight:
                    return
                done, _ = wait(inflight, return_when=FIRST_COMPLETED,
                               timeout=None if block else 0)
                for fut in done:
                    endpoint, f_eps, f_t, f_net = inflight.pop(fut)
                    inflight_keys.discard(f_t.blocks)
                    idle.append(endpoint)
                    acc, status, _detail = fut.result()
                    apply_result(f_eps, f_t, f_net, acc, status, cached=False)

            while st.stage_index < len(stages):
                eps, quota = stages[st.stage_index]
                covered = st.done_in_stage + len(inflight)
                if st.done_in_stage >= quota:
                    if inflight:
                        drain(block=True)
                        continue
                    st.stage_index += 1
                    st.done_in_stage = 0
                    st.attempts_in_stage = 0
                    continue
                if cfg.dedupe and len(self.mem) + len(inflight) >= space_size:
                    break
                if covered >= quota or not idle:
                    drain(block=True)
                    continue
                drain(block=False)

                st.attempts_in_stage += 1
                cap = cfg.attempt_cap_factor * max(quota, 1)
                eps_used = 1.0 if st.attempts_in_stage > cap else eps
                t = sample_trajectory(self.q, eps_used, self.rng, cfg.max_depth)
                if t.blocks in inflight_keys:
                    continue  # already being trained; sample again
                net = encode_net(t, cfg.class_count)
                stored = self.mem.get(t.blocks) if cfg.dedupe else None
                if stored is not None:
                    apply_result(eps, t, net, stored.accuracy, stored.status,
                                 cached=True)
                    continue
                endpoint = idle.pop()
                submit_seq += 1
                evaluator = ExternalEvaluator(replace(cfg, endpoint=endpoint))
                fut = pool.submit(evaluator.evaluate, t, submit_seq, net)
                inflight[fut] = (endpoint, eps, t, net)
                inflight_keys.add(t.blocks)

            while inflight:
                drain(block=True)

        st.complete = True
        self._checkpoint()
        return self.log


def run_search(
    cfg: SearchConfig,
    stop_after: int | None = None,
    crash_after_append: int | None = None,
) -> SearchLog:
    """Run the full schedule from scratch. Overwrites the replay DB and
    checkpoint paths named by ``cfg``.

    An external evaluator with a comma-separated endpoint list opts into
    parallel mode (one in-flight evaluation per endpoint, completions
    applied in arrival order)."""
    runner = _Runner(cfg)
    Path(cfg.db_path).parent.mkdir(parents=True, exist_ok=True)
    endpoints = [e.strip() for e in cfg.endpoint.split(",") if e.strip()]
    with open(cfg.db_path, "w", encoding="utf-8") as fh:
        if cfg.evaluator == "external" and len(endpoints) > 1:
            return runner.run_parallel(fh, endpoints)
        return runner.run(fh, stop_after=stop_after, crash_after_append=crash_after_append)


def resume(checkpoint_path: str | Path, stop_after: int | None = None) -> SearchLog:
    """Continue an interrupted run from its checkpoint.

    Verifies the checkpoint checksum and the replay DB sync point; a DB that
    ran one line ahead of the checkpoint (crash mid-iteration) is truncated
    back before continuing.
    """
    cfg, q, rng, st, db_count, db_hash = read_checkpoint(checkpoint_path)
    db_path = Path(cfg.db_path)
    try:
        all_lines = db_path.read_text().splitlines()
    except OSError as e:
        raise CheckpointError(f"cannot read replay DB: {e}") from None
    if len(all_lines) < db_count:
        raise CheckpointError(
            f"integrity check failed: replay DB has {len(all_lines)} lines, "
            f"checkpoint expects {db_count}"
        )
    kept = all_lines[:db_count]
    if _sha256_lines(kept) != db_hash:
        raise CheckpointError("integrity check failed: replay DB hash mismatch")
    if len(all_lines) > db_count:
        # crash window between append and checkpoint: drop the orphan lines
        db_path.write_text("\n".join(kept) + ("\n" if kept else ""))

    runner = _Runner(cfg)
    runner.q = q
    runner.rng = rng
    runner.st = st
    runner.set_db_lines(kept)
    rows = load_db(db_path)
    runner._restore_from_db(rows)
    if st.complete:
        return runner.log
    endpoints = [e.strip() for e in cfg.endpoint.split(",") if e.strip()]
    with open(db_path, "a", encoding="utf-8") as fh:
        if cfg.evaluator == "external" and len(endpoints) > 1:
            return runner.run_parallel(fh, endpoints)
        return runner.run(fh, stop_after=stop_after)
