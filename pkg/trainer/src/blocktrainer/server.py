"""Line-protocol training server.

Speaks the search engine's evaluator protocol: one JSON request per line,
one JSON response per line, UTF-8, unknown fields ignored. One training job
runs at a time per process; concurrent connections queue on the job lock.
Request ids are answered at most once per process: a repeated id returns
the cached response instead of retraining.
"""

from __future__ import annotations

import json
import socketserver
import threading
from dataclasses import dataclass

from .data import DataError, Split, load_dataset
from .graphspec import GraphSpecError, export_net
from .model import GraphNet
from .trainloop import TrainSettings, train_model

DESK_CHANNEL_DIV = 4
DESK_MAX_EPOCHS = 3


@dataclass
class TrainerConfig:
    dataset: str = "synthetic"
    data_dir: str | None = None
    scale: str = "desk"  # "desk" | "paper"
    train_size: int = 5000
    val_size: int = 1000
    seed: int = 0
    export_cmd: str | None = None

    def __post_init__(self):
        if self.scale not in ("desk", "paper"):
            raise ValueError(f"unknown scale {self.scale!r}")

    @property
    def channel_div(self) -> int:
        return DESK_CHANNEL_DIV if self.scale == "desk" else 1

    @property
    def max_epochs(self) -> int | None:
        return DESK_MAX_EPOCHS if self.scale == "desk" else None


class TrainerService:
    """Protocol handling and the one-at-a-time training pipeline."""

    def __init__(self, cfg: TrainerConfig):
        self.cfg = cfg
        self._job_lock = threading.Lock()
        self._splits: dict[str, Split] = {}
        self._split_lock = threading.Lock()
        self._answered: dict[int, dict] = {}

    def _split_for(self, dataset: str) -> Split:
        key = dataset.lower()
        with self._split_lock:
            if key not in self._splits:
                self._splits[key] = load_dataset(
                    key, self.cfg.data_dir, self.cfg.train_size,
                    self.cfg.val_size, self.cfg.seed,
                )
            return self._splits[key]

    def handle_line(self, line: str) -> dict:
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("request is not an object")
        except ValueError as e:
            return {"id": -1, "status": "failed", "accuracy": None,
                    "detail": f"parse: {e}"}
        req_id = rec.get("id")
        if not isinstance(req_id, int):
            return {"id": -1, "status": "failed", "accuracy": None,
                    "detail": "parse: missing integer id"}
        cached = self._answered.get(req_id)
        if cached is not None:
            return cached
        resp = self._evaluate(req_id, rec)
        self._answered[req_id] = resp
        return resp

    def _evaluate(self, req_id: int, rec: dict) -> dict:
        def failed(detail: str) -> dict:
            return {"id": req_id, "status": "failed", "accuracy": None,
                    "detail": detail}

        try:
            net = rec["net"]
            dataset = rec.get("dataset", self.cfg.dataset)
            settings = TrainSettings(
                epochs=int(rec.get("epochs", 30)),
                max_retrains=int(rec.get("max_retrains", 5)),
                lr0=float(rec.get("lr0", 0.001)),
                drop_factor=float(rec.get("drop_factor", 0.2)),
                drop_every=int(rec.get("drop_every", 5)),
                seed=self.cfg.seed + req_id,
            ).capped(self.cfg.max_epochs)
        except (KeyError, TypeError, ValueError) as e:
            return failed(f"parse: bad request fields: {e}")

        try:
            split = self._split_for(dataset)
        except DataError as e:
            return failed(str(e))

        kwargs = {}
        if self.cfg.export_cmd:
            kwargs["export_cmd"] = self.cfg.export_cmd
        try:
            spec = export_net(net, split.input_shape, split.classes, **kwargs)
        except GraphSpecError as e:
            return failed(str(e))
        except Exception as e:
            return failed(f"export: {e}")

        try:
            with self._job_lock:
                acc, detail = train_model(
                    lambda: GraphNet(spec, self.cfg.channel_div), split, settings
                )
        except Exception as e:  # build/training failures must not kill the server
            return failed(f"train: {type(e).__name__}: {e}")
        return {"id": req_id, "status": "ok", "accuracy": acc, "detail": detail}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            resp = self.server.service.handle_line(line)
            self.wfile.write((json.dumps(resp) + "\n").encode("utf-8"))
            self.wfile.flush()


class TrainerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int, cfg: TrainerConfig):
        super().__init__((host, port), _Handler)
        self.service = TrainerService(cfg)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve_forever(listen: str, cfg: TrainerConfig) -> None:
    host, _, port = listen.rpartition(":")
    server = TrainerServer(host or "127.0.0.1", int(port), cfg)
    print(f"blocktrainer listening on {server.endpoint} "
          f"(dataset={cfg.dataset}, scale={cfg.scale})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
