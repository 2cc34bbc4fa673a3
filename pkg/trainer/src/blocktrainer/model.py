"""Build a trainable torch module from a parsed graph spec.

Desk scale divides every conv width by 4 (minimum 1 channel); the
classifier width is the class count and is never scaled. Shapes are not
taken from the export: channels are re-derived while building so scaling
stays consistent, and the classifier input size is measured with a dry
forward pass through the spatial part of the graph.
"""

from __future__ import annotations

import torch
from torch import nn

from .graphspec import GraphSpec, GraphSpecError

SUPPORTED_KINDS = {
    "Input", "Conv", "BatchNorm", "ReLU", "Concat", "Add",
    "AvgPool", "GlobalAvgPool", "FullyConnected", "Softmax",
}


def scale_width(filters: int, divisor: int) -> int:
    return max(1, filters // divisor)


class GraphNet(nn.Module):
    """Executes the exported node list in id order.

    The forward pass returns classifier logits; the terminal Softmax node is
    realized by the loss (cross entropy) and by argmax at evaluation time.
    """

    def __init__(self, spec: GraphSpec, channel_div: int = 1):
        super().__init__()
        self.spec = spec
        self.ops = nn.ModuleDict()
        channels: dict[int, int] = {}
        for node in spec.nodes:
            if node.kind not in SUPPORTED_KINDS:
                raise GraphSpecError(f"unsupported node kind {node.kind!r}")
            key = str(node.id)
            if node.kind == "Input":
                channels[node.id] = spec.input_shape[0]
            elif node.kind == "Conv":
                c_in = channels[node.inputs[0]]
                c_out = scale_width(node.hyper["f"], channel_div)
                self.ops[key] = nn.Conv2d(
                    c_in, c_out,
                    kernel_size=node.hyper["k"],
                    stride=node.hyper["s"],
                    padding=node.hyper["p"],
                    bias=True,
                )
                channels[node.id] = c_out
            elif node.kind == "BatchNorm":
                c = channels[node.inputs[0]]
                self.ops[key] = nn.BatchNorm2d(c)
                channels[node.id] = c
            elif node.kind == "ReLU":
                channels[node.id] = channels[node.inputs[0]]
            elif node.kind == "Concat":
                channels[node.id] = sum(channels[i] for i in node.inputs)
            elif node.kind == "Add":
                cs = {channels[i] for i in node.inputs}
                if len(cs) != 1:
                    raise GraphSpecError(f"add node {node.id} mixes channel counts {cs}")
                channels[node.id] = cs.pop()
            elif node.kind == "AvgPool":
                self.ops[key] = nn.AvgPool2d(
                    kernel_size=node.hyper["k"],
                    stride=node.hyper["s"],
                    padding=node.hyper["p"],
                )
                channels[node.id] = channels[node.inputs[0]]
            elif node.kind == "GlobalAvgPool":
                channels[node.id] = channels[node.inputs[0]]
            elif node.kind == "FullyConnected":
                flat = self._measure_flat_input(node.id)
                self.ops[key] = nn.Linear(flat, node.hyper["f"])
                channels[node.id] = node.hyper["f"]
            elif node.kind == "Softmax":
                channels[node.id] = channels[node.inputs[0]]

    def _measure_flat_input(self, fc_id: int) -> int:
        was_training = self.training
        self.eval()  # batch norms cannot run in train mode on the probe batch
        with torch.no_grad():
            x = torch.zeros(2, *self.spec.input_shape)
            out = self._run(x, stop_before=fc_id)
        if was_training:
            self.train()
        return int(out.numel() // 2)

    def _run(self, x: torch.Tensor, stop_before: int | None = None) -> torch.Tensor:
        values: dict[int, torch.Tensor] = {}
        last = x
        for node in self.spec.nodes:
            if stop_before is not None and node.id == stop_before:
                return values[node.inputs[0]]
            key = str(node.id)
            if node.kind == "Input":
                out = x
            elif node.kind in ("Conv", "BatchNorm", "AvgPool"):
                out = self.ops[key](values[node.inputs[0]])
            elif node.kind == "ReLU":
                out = torch.relu(values[node.inputs[0]])
            elif node.kind == "Concat":
                out = torch.cat([values[i] for i in node.inputs], dim=1)
            elif node.kind == "Add":
                out = values[node.inputs[0]] + values[node.inputs[1]]
            elif node.kind == "GlobalAvgPool":
                out = values[node.inputs[0]].mean(dim=(2, 3), keepdim=True)
            elif node.kind == "FullyConnected":
                out = self.ops[key](values[node.inputs[0]].flatten(1))
            else:  # Softmax: keep logits for the loss
                out = values[node.inputs[0]]
            values[node.id] = out
            last = out
        return last

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self._run(x)
