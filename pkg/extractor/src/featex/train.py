"""First-session adaptation: train only the injected parameters on the
first task's classes with a temporary linear head, then discard the head.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, Dataset, Subset

from .config import ExtractorConfig


def filter_to_classes(dataset: Dataset, classes: list[int]) -> Subset:
    """Subset of a (image, label) dataset restricted to the given classes."""
    wanted = set(int(c) for c in classes)
    if hasattr(dataset, "targets"):
        labels = np.asarray(dataset.targets)
        idx = np.nonzero(np.isin(labels, list(wanted)))[0]
    else:
        idx = [i for i in range(len(dataset)) if int(dataset[i][1]) in wanted]
    return Subset(dataset, list(idx))


def first_session_train(model: nn.Module, dataset: Dataset,
                        config: ExtractorConfig) -> dict:
    """Train the adaptation parameters on the first task with SGD and cosine
    annealing; the temporary classification head is discarded afterwards.
    Returns the per-epoch loss trace. Raises ``RuntimeError`` with the trace
    if the loss diverges."""
    if config.petl == "none":
        return {"losses": [], "epochs": 0}
    if not model.petl_params:
        raise ValueError("model has no adaptation parameters injected")

    hp = config.first_session
    classes = sorted(int(c) for c in config.first_task_classes)
    remap = {c: i for i, c in enumerate(classes)}
    task_data = filter_to_classes(dataset, classes)
    if len(task_data) == 0:
        raise ValueError("first task has no samples")

    torch.manual_seed(config.seed)
    head = nn.Linear(model.feature_dim, len(classes)).to(config.device)
    params = list(model.petl_params) + list(head.parameters())
    opt = torch.optim.SGD(params, lr=hp.lr, momentum=hp.momentum,
                          weight_decay=hp.weight_decay)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=hp.epochs)
    loss_fn = nn.CrossEntropyLoss()
    loader = DataLoader(task_data, batch_size=hp.batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(config.seed))

    model.train()
    losses = []
    for _ in range(hp.epochs):
        total, count = 0.0, 0
        for x, y in loader:
            y = torch.as_tensor([remap[int(v)] for v in y],
                                device=config.device)
            opt.zero_grad()
            loss = loss_fn(head(model(x.to(config.device))), y)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(y)
            count += len(y)
        sched.step()
        losses.append(total / count)
        if not np.isfinite(losses[-1]):
            raise RuntimeError(f"training diverged; loss trace: {losses}")
    model.eval()
    # the temporary head is discarded: only the adapted backbone survives
    return {"losses": losses, "epochs": hp.epochs}
