"""Expand a trajectory into a concrete layer graph with tensor shapes and
parameter counts.

Expansion rules:

* A 3x3 conv stem with 16 filters precedes the first dense block only; later
  dense blocks consume the incoming channels directly.
* Dense blocks are BN-ReLU-Conv chains with concatenation (pre-activation
  order); each sub-block ends in a BN-ReLU-Conv1x1 transition that preserves
  channels, plus a 2x2 stride-2 average pool.
* Residual units are two Conv-BN-ReLU composites plus a skip add; a 1x1
  projection conv is inserted on the skip path when channels differ.
* Inception-like blocks expand their template branches in parallel and merge
  by concatenation.
* GAP inserts global average pooling; SM flattens whatever it sees and
  attaches a fully connected classifier plus softmax.

Parameter counts include conv/FC biases and the two BN affine parameters per
channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .catalog import (
    BlockSpec,
    CONCAT_EVERY,
    CONCAT_FINAL,
    DENSE,
    GAP,
    RESIDUAL,
    SM,
    catalog as default_catalog,
    format_code,
)
from .space import Trajectory

STEM_FILTERS = 16

KIND_INPUT = "Input"
KIND_CONV = "Conv"
KIND_BN = "BatchNorm"
KIND_RELU = "ReLU"
KIND_CONCAT = "Concat"
KIND_ADD = "Add"
KIND_AVGPOOL = "AvgPool"
KIND_GAP = "GlobalAvgPool"
KIND_FC = "FullyConnected"
KIND_SOFTMAX = "Softmax"


class GraphError(ValueError):
    """Base class for graph construction failures."""


class SpatialUnderflowError(GraphError):
    """Input too small for the down-sampling the trajectory demands."""


class ChannelMismatchError(GraphError):
    """Merge nodes fed with incompatible shapes (template inconsistency)."""


class Shape(NamedTuple):
    channels: int
    height: int
    width: int

    def render(self) -> str:
        return f"{self.channels}x{self.height}x{self.width}"


@dataclass(frozen=True)
class LayerNode:
    id: int
    kind: str
    hyper: tuple[tuple[str, int], ...]  # ordered (name, value) pairs
    inputs: tuple[int, ...]
    out_shape: Shape

    def hyper_dict(self) -> dict[str, int]:
        return dict(self.hyper)


@dataclass(frozen=True)
class Segment:
    """Node-id range contributed by one trajectory step, for reporting."""

    label: str
    first_node: int
    last_node: int
    out_shape: Shape
    params: int


@dataclass
class ArchitectureGraph:
    nodes: list[LayerNode]
    input_shape: Shape
    class_count: int
    param_count: int
    segments: list[Segment] = field(default_factory=list)


def node_params(kind: str, hyper: dict[str, int], in_shapes: list[Shape]) -> int:
    """Parameter formula per node kind; zero for shape-only nodes."""
    if kind == KIND_CONV:
        k, f = hyper["k"], hyper["f"]
        c_in = in_shapes[0].channels
        return k * k * c_in * f + f
    if kind == KIND_BN:
        return 2 * in_shapes[0].channels
    if kind == KIND_FC:
        f = hyper["f"]
        s = in_shapes[0]
        return s.channels * s.height * s.width * f + f
    return 0


class _Builder:
    def __init__(self, input_shape: Shape, class_count: int, specs):
        self.nodes: list[LayerNode] = []
        self.class_count = class_count
        self.specs = specs
        self.params = 0
        self.segments: list[Segment] = []
        self.input_id = self._emit(KIND_INPUT, {}, [], input_shape)

    def shape(self, nid: int) -> Shape:
        return self.nodes[nid].out_shape

    def _emit(self, kind: str, hyper: dict[str, int], inputs: list[int], out: Shape) -> int:
        nid = len(self.nodes)
        in_shapes = [self.shape(i) for i in inputs]
        p = node_params(kind, hyper, in_shapes)
        self.params += p
        self.nodes.append(
            LayerNode(nid, kind, tuple(hyper.items()), tuple(inputs), out)
        )
        return nid

    # --- primitive layers ---

    def conv(self, x: int, filters: int, kernel: int, stride: int = 1,
             pad: int | None = None) -> int:
        s = self.shape(x)
        if pad is None:
            pad = (kernel - 1) // 2
        h = (s.height + 2 * pad - kernel) // stride + 1
        w = (s.width + 2 * pad - kernel) // stride + 1
        if h < 1 or w < 1:
            raise SpatialUnderflowError(
                f"conv{kernel}x{kernel} on {s.render()} leaves no spatial extent"
            )
        return self._emit(
            KIND_CONV, {"k": kernel, "s": stride, "p": pad, "f": filters}, [x],
            Shape(filters, h, w),
        )

    def bn(self, x: int) -> int:
        return self._emit(KIND_BN, {}, [x], self.shape(x))

    def relu(self, x: int) -> int:
        return self._emit(KIND_RELU, {}, [x], self.shape(x))

    def avgpool(self, x: int, kernel: int, stride: int, pad: int = 0) -> int:
        s = self.shape(x)
        h = (s.height + 2 * pad - kernel) // stride + 1
        w = (s.width + 2 * pad - kernel) // stride + 1
        if h < 1 or w < 1:
            raise SpatialUnderflowError(
                f"avgpool{kernel}x{kernel} on {s.render()} leaves no spatial extent"
            )
        return self._emit(
            KIND_AVGPOOL, {"k": kernel, "s": stride, "p": pad}, [x],
            Shape(s.channels, h, w),
        )

    def concat(self, xs: list[int]) -> int:
        shapes = [self.shape(x) for x in xs]
        hw = {(s.height, s.width) for s in shapes}
        if len(hw) != 1:
            raise ChannelMismatchError(
                f"concat inputs disagree on spatial dims: {[s.render() for s in shapes]}"
            )
        c = sum(s.channels for s in shapes)
        h, w = next(iter(hw))
        return self._emit(KIND_CONCAT, {}, xs, Shape(c, h, w))

    def add(self, a: int, b: int) -> int:
        sa, sb = self.shape(a), self.shape(b)
        if sa != sb:
            raise ChannelMismatchError(
                f"add inputs disagree: {sa.render()} vs {sb.render()}"
            )
        return self._emit(KIND_ADD, {}, [a, b], sa)

    # --- composites ---

    def conv_bn_relu(self, x: int, filters: int, kernel: int) -> int:
        return self.relu(self.bn(self.conv(x, filters, kernel)))

    def bn_relu_conv(self, x: int, filters: int, kernel: int) -> int:
        return self.conv(self.relu(self.bn(x)), filters, kernel)

    # --- block expansions ---

    def dense_block(self, x: int, spec: BlockSpec) -> int:
        for _ in range(spec.unit_count):
            for _ in range(spec.dense_layers_per_block):
                new = self.bn_relu_conv(x, spec.growth_rate, 3)
                x = self.concat([x, new])
            # transition: channel-preserving 1x1 conv then 2x2 avg pool
            x = self.bn_relu_conv(x, self.shape(x).channels, 1)
            x = self.avgpool(x, 2, 2)
        return x

    def residual_unit(self, x: int, filters: int) -> int:
        y = self.conv_bn_relu(x, filters, 3)
        y = self.conv_bn_relu(y, filters, 3)
        skip = x
        if self.shape(x).channels != filters:
            skip = self.conv(x, filters, 1)
        return self.add(y, skip)

    def residual_block(self, x: int, spec: BlockSpec) -> int:
        block_input = x
        for filters in spec.channel_profile:
            y = self.residual_unit(x, filters)
            if spec.concat_mode == CONCAT_EVERY:
                y = self.concat([block_input, y])
            x = y
        if spec.concat_mode == CONCAT_FINAL:
            x = self.concat([block_input, x])
        return x

    def inception_block(self, x: int, spec: BlockSpec) -> int:
        block_input = x
        outs = []
        for branch in spec.branches:
            y = x
            for atom in branch:
                if atom.op == "conv":
                    y = self.conv_bn_relu(y, atom.filters, atom.kernel)
                else:
                    y = self.avgpool(y, atom.kernel, 1, pad=(atom.kernel - 1) // 2)
            outs.append(y)
        merged = self.concat(outs) if len(outs) > 1 else outs[0]
        if spec.concat_mode == CONCAT_FINAL:
            merged = self.concat([block_input, merged])
        return merged

    def block(self, x: int, code: int, first: bool) -> int:
        spec = self.specs[code]
        if spec.family == DENSE:
            if first:
                x = self.conv(x, STEM_FILTERS, 3)
            return self.dense_block(x, spec)
        if spec.family == RESIDUAL:
            return self.residual_block(x, spec)
        return self.inception_block(x, spec)

    def classifier(self, x: int, with_gap: bool) -> int:
        if with_gap:
            s = self.shape(x)
            x = self._emit(KIND_GAP, {}, [x], Shape(s.channels, 1, 1))
        x = self._emit(
            KIND_FC, {"f": self.class_count}, [x], Shape(self.class_count, 1, 1)
        )
        return self._emit(KIND_SOFTMAX, {}, [x], Shape(self.class_count, 1, 1))


def build(
    t: Trajectory,
    input_shape: tuple[int, int, int] = (3, 32, 32),
    class_count: int = 10,
    specs: list | None = None,
) -> ArchitectureGraph:
    """Deterministically expand ``t`` into a layer graph on ``input_shape``."""
    specs = default_catalog() if specs is None else specs
    b = _Builder(Shape(*input_shape), class_count, specs)
    x = b.input_id
    first = True
    pending_gap = False
    for step, code in enumerate(t.blocks):
        seg_start = len(b.nodes)
        params_before = b.params
        if code == GAP:
            pending_gap = True
            continue
        if code == SM:
            x = b.classifier(x, with_gap=pending_gap)
            label = ("GAP+" if pending_gap else "") + f"SM({class_count})"
        else:
            try:
                x = b.block(x, code, first)
            except GraphError as e:
                raise type(e)(f"{format_code(code)} at layer {step}: {e}") from None
            first = False
            label = format_code(code)
        b.segments.append(
            Segment(label, seg_start, len(b.nodes) - 1, b.shape(x), b.params - params_before)
        )
    return ArchitectureGraph(
        nodes=b.nodes,
        input_shape=Shape(*input_shape),
        class_count=class_count,
        param_count=b.params,
        segments=b.segments,
    )


def count_params(g: ArchitectureGraph) -> int:
    """Sum of the per-node parameter formulas over the whole graph."""
    total = 0
    for n in g.nodes:
        in_shapes = [g.nodes[i].out_shape for i in n.inputs]
        total += node_params(n.kind, n.hyper_dict(), in_shapes)
    return total


def count_params_without_classifier(g: ArchitectureGraph) -> int:
    """Parameters of the block layers only (classifier FC excluded)."""
    total = 0
    for n in g.nodes:
        if n.kind == KIND_FC:
            continue
        in_shapes = [g.nodes[i].out_shape for i in n.inputs]
        total += node_params(n.kind, n.hyper_dict(), in_shapes)
    return total


def summarize(g: ArchitectureGraph) -> str:
    """Stable per-block shape/parameter report."""
    lines = [f"input {g.input_shape.render()}"]
    for seg in g.segments:
        lines.append(
            f"{seg.label:<12} -> {seg.out_shape.render():<12} params {seg.params}"
        )
    lines.append(f"total params {g.param_count}")
    return "\n".join(lines) + "\n"


def export_graph(g: ArchitectureGraph) -> str:
    """Node-per-line text form consumed by external trainers.

    Line grammar (whitespace separated):
        ``node <id> <kind> <hyper|-> <inputs|-> <CxHxW>``
    where hyper is comma-joined ``key=value`` pairs and inputs is a
    comma-joined id list.
    """
    lines = [
        "# blocksearch graph v1",
        f"input {g.input_shape.render()}",
        f"classes {g.class_count}",
        f"params {g.param_count}",
    ]
    for n in g.nodes:
        hyper = ",".join(f"{k}={v}" for k, v in n.hyper) or "-"
        inputs = ",".join(str(i) for i in n.inputs) or "-"
        lines.append(f"node {n.id} {n.kind} {hyper} {inputs} {n.out_shape.render()}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> ArchitectureGraph:
    """Inverse of :func:`export_graph` (round-trip check and tooling aid)."""
    nodes: list[LayerNode] = []
    input_shape = None
    classes = None
    params = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "input":
            input_shape = Shape(*(int(x) for x in fields[1].split("x")))
        elif fields[0] == "classes":
            classes = int(fields[1])
        elif fields[0] == "params":
            params = int(fields[1])
        elif fields[0] == "node":
            _, nid, kind, hyper_s, inputs_s, shape_s = fields
            hyper = (
                tuple(
                    (kv.split("=")[0], int(kv.split("=")[1]))
                    for kv in hyper_s.split(",")
                )
                if hyper_s != "-"
                else ()
            )
            inputs = (
                tuple(int(x) for x in inputs_s.split(",")) if inputs_s != "-" else ()
            )
            shape = Shape(*(int(x) for x in shape_s.split("x")))
            nodes.append(LayerNode(int(nid), kind, hyper, inputs, shape))
        else:
            raise GraphError(f"unknown graph line {line!r}")
    if input_shape is None or classes is None or params is None:
        raise GraphError("graph text missing header fields")
    return ArchitectureGraph(nodes, input_shape, classes, params)
