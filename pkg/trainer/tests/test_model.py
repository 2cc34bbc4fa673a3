import pytest
import torch

from blocktrainer.graphspec import export_net
from blocktrainer.model import GraphNet, scale_width


def test_scale_width_floor_with_minimum():
    assert scale_width(16, 4) == 4
    assert scale_width(12, 4) == 3
    assert scale_width(2, 4) == 1
    assert scale_width(7, 1) == 7


@pytest.mark.parametrize("net", [
    "[B(0),SM(10)]",
    "[B(0),GAP(10),SM(10)]",
    "[B(0),B(4),SM(10)]",
    "[B(0),B(1),SM(10)]",
    "[B(0),B(8),GAP(10),SM(10)]",
])
def test_forward_shapes(net):
    spec = export_net(net, (1, 28, 28), 10)
    model = GraphNet(spec, channel_div=4)
    out = model(torch.zeros(2, 1, 28, 28))
    assert out.shape == (2, 10)


def test_paper_scale_matches_export_channels():
    spec = export_net("[B(0),B(5),SM(10)]", (3, 32, 32), 10)
    model = GraphNet(spec, channel_div=1)
    out = model(torch.zeros(2, 3, 32, 32))
    assert out.shape == (2, 10)
    # at divisor 1 the conv widths equal the exported hyper f values
    for node in spec.nodes:
        if node.kind == "Conv":
            conv = model.ops[str(node.id)]
            assert conv.out_channels == node.hyper["f"]


def test_desk_scale_divides_conv_widths():
    spec = export_net("[B(0),SM(10)]", (1, 28, 28), 10)
    desk = GraphNet(spec, channel_div=4)
    for node in spec.nodes:
        if node.kind == "Conv":
            assert desk.ops[str(node.id)].out_channels == scale_width(node.hyper["f"], 4)
        if node.kind == "FullyConnected":
            assert desk.ops[str(node.id)].out_features == node.hyper["f"]


def test_classifier_width_never_scaled():
    spec = export_net("[B(0),GAP(10),SM(10)]", (1, 28, 28), 10)
    model = GraphNet(spec, channel_div=4)
    fc = next(model.ops[str(n.id)] for n in spec.nodes if n.kind == "FullyConnected")
    assert fc.out_features == 10


def test_training_reduces_loss():
    spec = export_net("[B(0),GAP(10),SM(10)]", (1, 28, 28), 10)
    torch.manual_seed(0)
    model = GraphNet(spec, channel_div=4)
    x = torch.randn(64, 1, 28, 28)
    y = torch.randint(0, 10, (64,))
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    loss_fn = torch.nn.CrossEntropyLoss()
    model.train()
    first = None
    for _ in range(30):
        opt.zero_grad()
        loss = loss_fn(model(x), y)
        if first is None:
            first = loss.item()
        loss.backward()
        opt.step()
    assert loss.item() < first
