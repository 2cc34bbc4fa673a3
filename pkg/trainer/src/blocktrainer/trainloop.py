"""Training loop: Adam with the staged learning-rate policy.

Per attempt: train up to the epoch budget, validating after every epoch.
A model that fails to beat 1.5x chance accuracy after its first epoch is
considered a bad start; the base learning rate is cut by the retrain factor
and the model is retrained from freshly initialized weights, at most
``max_retrains`` times. Good-start runs drop the learning rate by
``drop_factor`` every ``drop_every`` epochs; retrain attempts drop by the
retrain factor instead. The reported accuracy is the best validation
accuracy of the last attempt, measured on the held-out split only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data import Split

TRAIN_BATCH = 64
VAL_BATCH = 50
RETRAIN_DROP = 0.4
GOOD_START_FACTOR = 1.5


@dataclass(frozen=True)
class TrainSettings:
    epochs: int
    max_retrains: int
    lr0: float
    drop_factor: float
    drop_every: int
    seed: int = 0

    def capped(self, max_epochs: int | None) -> "TrainSettings":
        if max_epochs is None or self.epochs <= max_epochs:
            return self
        return TrainSettings(max_epochs, self.max_retrains, self.lr0,
                             self.drop_factor, self.drop_every, self.seed)


@torch.no_grad()
def evaluate(model: nn.Module, x: np.ndarray, y: np.ndarray) -> float:
    model.eval()
    hits = 0
    for i in range(0, len(x), VAL_BATCH):
        xb = torch.from_numpy(x[i:i + VAL_BATCH])
        logits = model(xb)
        hits += int((logits.argmax(dim=1).numpy() == y[i:i + VAL_BATCH]).sum())
    return hits / len(x)


def train_model(build_model, split: Split, settings: TrainSettings) -> tuple[float, str]:
    """Returns (validation accuracy, detail text)."""
    chance = 1.0 / split.classes
    loss_fn = nn.CrossEntropyLoss()
    best_overall = 0.0

    for attempt in range(settings.max_retrains + 1):
        torch.manual_seed(settings.seed * 1009 + attempt)
        model = build_model()
        lr = settings.lr0 * (RETRAIN_DROP ** attempt)
        drop = settings.drop_factor if attempt == 0 else RETRAIN_DROP
        opt = torch.optim.Adam(model.parameters(), lr=lr,
                               betas=(0.9, 0.999), eps=1e-8)
        order_rng = np.random.default_rng(settings.seed * 2003 + attempt)
        best = 0.0
        bad_start = False
        for epoch in range(1, settings.epochs + 1):
            model.train()
            order = order_rng.permutation(len(split.train_x))
            for i in range(0, len(order), TRAIN_BATCH):
                idx = order[i:i + TRAIN_BATCH]
                xb = torch.from_numpy(split.train_x[idx])
                yb = torch.from_numpy(split.train_y[idx])
                opt.zero_grad()
                loss = loss_fn(model(xb), yb)
                loss.backward()
                opt.step()
            acc = evaluate(model, split.val_x, split.val_y)
            best = max(best, acc)
            best_overall = max(best_overall, best)
            if epoch == 1 and acc <= GOOD_START_FACTOR * chance:
                bad_start = True
                break
            if epoch % settings.drop_every == 0:
                for group in opt.param_groups:
                    group["lr"] *= drop
        if not bad_start:
            return best, f"attempt {attempt + 1}, epochs {settings.epochs}"
    return best_overall, f"gave up after {settings.max_retrains + 1} bad starts"
