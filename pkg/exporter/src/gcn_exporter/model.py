"""Torch GCN matching the consumer toolkit's inference exactly.

Propagation per layer: for every node, sum neighbor embeddings (the node
itself included with self-weight 1) scaled by ``e / sqrt(d_src * d_dst)``
where degrees count incident weights plus the self weight; then a linear map
with a per-channel bias and ReLU. (The bias is essential here: with a single
node label the input is constant, and a bias-free stack provably collapses to
one scalar graph statistic.) Readout: mean pool over each graph, linear layer
with bias, softmax. Everything runs in float64 so exported weights reproduce
bit-comparable probabilities in the consumer.
"""

from __future__ import annotations

import json
import math

import numpy as np
import torch
from torch import nn


class BatchedGraphs:
    """All graphs packed into one node block with precomputed edge coefficients."""

    def __init__(self, graphs: list[dict]):
        srcs, dsts, coefs = [], [], []
        graph_of_node = []
        offset = 0
        self.offsets = []
        for gi, g in enumerate(graphs):
            n = g["n"]
            self.offsets.append(offset)
            deg = [1.0] * n  # self weight
            pairs = []
            for e in g["edges"]:
                u, v = e[0], e[1]
                w = e[2] if len(e) > 2 else 1.0
                deg[u] += w
                deg[v] += w
                pairs.append((u, v, w))
            for u, v, w in pairs:
                c = w / math.sqrt(deg[u] * deg[v])
                srcs += [offset + u, offset + v]
                dsts += [offset + v, offset + u]
                coefs += [c, c]
            for v in range(n):
                srcs.append(offset + v)
                dsts.append(offset + v)
                coefs.append(1.0 / deg[v])
            graph_of_node += [gi] * n
            offset += n
        self.n_nodes = offset
        self.n_graphs = len(graphs)
        self.src = torch.tensor(srcs, dtype=torch.long)
        self.dst = torch.tensor(dsts, dtype=torch.long)
        self.coef = torch.tensor(coefs, dtype=torch.float64).unsqueeze(1)
        self.graph_of_node = torch.tensor(graph_of_node, dtype=torch.long)
        counts = torch.bincount(self.graph_of_node,
                                minlength=self.n_graphs).to(torch.float64)
        self.inv_counts = (1.0 / counts).unsqueeze(1)
        self.h0 = torch.ones(self.n_nodes, 1, dtype=torch.float64)

    def propagate(self, h: torch.Tensor) -> torch.Tensor:
        out = torch.zeros_like(h)
        out.index_add_(0, self.dst, h[self.src] * self.coef)
        return out

    def mean_pool(self, h: torch.Tensor) -> torch.Tensor:
        out = torch.zeros(self.n_graphs, h.shape[1], dtype=torch.float64)
        out.index_add_(0, self.graph_of_node, h)
        return out * self.inv_counts


class Gcn(nn.Module):
    def __init__(self, n_layers: int, width: int, n_labels: int):
        super().__init__()
        dims = [n_labels] + [width] * n_layers
        self.convs = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1], bias=True, dtype=torch.float64)
            for i in range(n_layers))
        self.readout = nn.Linear(width, 2, bias=True, dtype=torch.float64)

    def node_embeddings(self, batch: BatchedGraphs) -> list[torch.Tensor]:
        h = batch.h0
        out = []
        for conv in self.convs:
            h = torch.relu(conv(batch.propagate(h)))
            out.append(h)
        return out

    def forward(self, batch: BatchedGraphs) -> torch.Tensor:
        h = self.node_embeddings(batch)[-1]
        return self.readout(batch.mean_pool(h))


def export_model(model: Gcn, path) -> None:
    layers = [conv.weight.detach().numpy().tolist() for conv in model.convs]
    doc = {
        "L": len(layers),
        "K": len(layers[0]),
        "T": len(layers[0][0]),
        "layers": layers,
        "biases": [conv.bias.detach().numpy().tolist()
                   for conv in model.convs],
        "readout": {"W": model.readout.weight.detach().numpy().tolist(),
                    "b": model.readout.bias.detach().numpy().tolist()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def reference_outputs(model: Gcn, batch: BatchedGraphs):
    """Per-layer node embeddings, probabilities, and decisions."""
    with torch.no_grad():
        embeddings = model.node_embeddings(batch)
        logits = model.readout(batch.mean_pool(embeddings[-1]))
        probs = torch.softmax(logits, dim=1)
    return ([e.numpy() for e in embeddings], probs.numpy(),
            probs.argmax(axis=1).numpy())


def write_reference_activations(graphs, embeddings, decisions, layer, path):
    """CSV in the consumer's activation-matrix layout."""
    import csv

    k = embeddings[layer - 1].shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph", "node"] + [f"c{j + 1}" for j in range(k)]
                   + ["decision"])
        row = 0
        for gi, g in enumerate(graphs):
            for v in range(g["n"]):
                bits = (embeddings[layer - 1][row] > 0.0).astype(int)
                w.writerow([g["id"], v] + bits.tolist()
                           + [int(decisions[gi])])
                row += 1
