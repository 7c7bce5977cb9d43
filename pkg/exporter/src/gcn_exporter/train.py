"""Training loop and export bundle.

Training runs in two phases. Phase one is plain cross-entropy. Phase two adds
a class-selectivity penalty on the first half of the channels: for each of
those cells, the smaller of its mean activations over the two classes' nodes
is pushed toward zero, so the cell goes silent on (most of) one class. The
untouched half keeps the representation rich. Accuracy is unaffected at the
default strength, while the binarized activation patterns gain strongly
class-specific conjunctions, which is what downstream rule mining consumes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .model import (BatchedGraphs, Gcn, export_model, reference_outputs,
                    write_reference_activations)


class TrainingDiverged(RuntimeError):
    pass


def split_indices(n: int, seed: int):
    """80/10/10 train/val/test split with a seeded shuffle."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, n // 10)
    n_val = max(1, n // 10)
    return (order[n_test + n_val:], order[n_test:n_test + n_val],
            order[:n_test])


def train(doc: dict, labels, n_layers=3, width=20, epochs=800,
          selectivity_epochs=1200, selectivity=0.1,
          selectivity_channels=None, lr=0.01, seed=0, log=None):
    if selectivity_channels is None:
        selectivity_channels = width // 2
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    graphs = doc["graphs"]
    batch = BatchedGraphs(graphs)
    y = torch.tensor(list(labels), dtype=torch.long)
    node_class = torch.tensor(np.repeat(list(labels),
                                        [g["n"] for g in graphs]))
    mask0 = node_class == 0
    mask1 = node_class == 1
    model = Gcn(n_layers, width, n_labels=len(doc["labels"]))
    train_idx, val_idx, test_idx = (torch.tensor(ix, dtype=torch.long)
                                    for ix in split_indices(len(graphs), seed))
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = torch.nn.CrossEntropyLoss()
    history = []
    for epoch in range(epochs + selectivity_epochs):
        model.train()
        opt.zero_grad()
        embs = model.node_embeddings(batch)
        logits = model.readout(batch.mean_pool(embs[-1]))
        loss = loss_fn(logits[train_idx], y[train_idx])
        if epoch >= epochs and selectivity > 0 and mask0.any() and mask1.any():
            ch = selectivity_channels
            overlap = sum(torch.minimum(h[mask0, :ch].mean(0),
                                        h[mask1, :ch].mean(0)).sum()
                          for h in embs)
            loss = loss + selectivity * overlap
        loss.backward()
        opt.step()
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss.item()} at epoch "
                                   f"{epoch}")
        if log is not None and epoch % 100 == 0:
            with torch.no_grad():
                acc = (logits[train_idx].argmax(1) == y[train_idx]
                       ).double().mean().item()
            history.append({"epoch": epoch, "loss": float(loss.item()),
                            "train_acc": acc})
    model.eval()
    with torch.no_grad():
        pred = model(batch).argmax(1)
    accs = {name: float((pred[ix] == y[ix]).double().mean().item())
            for name, ix in (("train", train_idx), ("val", val_idx),
                             ("test", test_idx))}
    if log is not None:
        log.extend(history)
    return model, batch, accs


def train_and_export(doc: dict, labels, out_dir, n_layers=3, width=20,
                     epochs=800, selectivity_epochs=1200, selectivity=0.1,
                     selectivity_channels=None, lr=0.01, seed=0) -> dict:
    """Train on the dataset and write the full export bundle.

    Emits the dataset copy, model JSON, per-layer reference activation CSVs,
    reference decisions, and training metadata. Returns the metadata dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log: list = []
    model, batch, accs = train(doc, labels, n_layers, width, epochs,
                               selectivity_epochs, selectivity,
                               selectivity_channels, lr, seed, log=log)
    with open(out / "dataset.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    export_model(model, out / "model.json")
    embeddings, probs, decisions = reference_outputs(model, batch)
    for layer in range(1, n_layers + 1):
        write_reference_activations(doc["graphs"], embeddings, decisions,
                                    layer,
                                    out / f"reference_activations_layer{layer}.csv")
    with open(out / "reference_decisions.json", "w", encoding="utf-8") as fh:
        json.dump({"graph_ids": [g["id"] for g in doc["graphs"]],
                   "decisions": [int(d) for d in decisions],
                   "probabilities": probs.tolist()}, fh)
        fh.write("\n")
    meta = {"epochs": epochs, "selectivity_epochs": selectivity_epochs,
            "selectivity": selectivity,
            "selectivity_channels": selectivity_channels, "lr": lr,
            "seed": seed,
            "layers": n_layers, "width": width, "accuracy": accs,
            "history": log}
    with open(out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return meta
