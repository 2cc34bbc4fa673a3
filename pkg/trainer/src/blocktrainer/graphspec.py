"""Reader for the search engine's exported graph text.

The exporter writes one node per line:

    node <id> <kind> <hyper|-> <comma-joined input ids|-> <CxHxW>

plus ``input``/``classes``/``params`` header lines. This module only parses
that text; it deliberately knows nothing about blocks or the search.
"""

from __future__ import annotations

import shlex
import subprocess
import sys
from dataclasses import dataclass


class GraphSpecError(ValueError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    id: int
    kind: str
    hyper: dict
    inputs: tuple[int, ...]
    out_channels: int


@dataclass(frozen=True)
class GraphSpec:
    nodes: tuple[NodeSpec, ...]
    input_shape: tuple[int, int, int]
    classes: int


def parse_graph_text(text: str) -> GraphSpec:
    nodes = []
    input_shape = None
    classes = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "input":
            input_shape = tuple(int(x) for x in fields[1].split("x"))
        elif fields[0] == "classes":
            classes = int(fields[1])
        elif fields[0] == "params":
            continue
        elif fields[0] == "node":
            if len(fields) != 6:
                raise GraphSpecError(f"bad node line: {line!r}")
            _, nid, kind, hyper_s, inputs_s, out_s = fields
            hyper = {}
            if hyper_s != "-":
                for kv in hyper_s.split(","):
                    k, v = kv.split("=")
                    hyper[k] = int(v)
            inputs = tuple(int(x) for x in inputs_s.split(",")) if inputs_s != "-" else ()
            out_c = int(out_s.split("x")[0])
            nodes.append(NodeSpec(int(nid), kind, hyper, inputs, out_c))
        else:
            raise GraphSpecError(f"unknown line: {line!r}")
    if input_shape is None or classes is None or not nodes:
        raise GraphSpecError("graph text is missing header or nodes")
    return GraphSpec(tuple(nodes), input_shape, classes)


DEFAULT_EXPORT_CMD = f"{sys.executable} -m blocksearch export"


def export_net(
    net: str,
    input_shape: tuple[int, int, int],
    classes: int,
    export_cmd: str = DEFAULT_EXPORT_CMD,
    timeout: float = 60.0,
) -> GraphSpec:
    """Obtain the layer graph for a net string by invoking the search
    engine's export command."""
    cmd = shlex.split(export_cmd) + [
        "--net", net,
        "--input-shape", "x".join(str(x) for x in input_shape),
        "--classes", str(classes),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
    if proc.returncode != 0:
        detail = proc.stderr.strip().splitlines()
        raise GraphSpecError(
            f"parse: export failed for {net!r}: {detail[-1] if detail else 'unknown'}"
        )
    return parse_graph_text(proc.stdout)
