"""Reference external trainer speaking the block-search wire protocol."""

__version__ = "0.1.0"

from .data import Split, load_dataset, make_synthetic
from .graphspec import GraphSpec, export_net, parse_graph_text
from .model import GraphNet
from .server import TrainerConfig, TrainerServer, TrainerService
from .trainloop import TrainSettings, train_model

__all__ = [
    "Split",
    "load_dataset",
    "make_synthetic",
    "GraphSpec",
    "export_net",
    "parse_graph_text",
    "GraphNet",
    "TrainerConfig",
    "TrainerServer",
    "TrainerService",
    "TrainSettings",
    "train_model",
]
