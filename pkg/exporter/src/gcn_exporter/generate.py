"""Synthetic two-motif graph classification data.

Each graph is a preferential-attachment tree (20 nodes, one edge per new
node) with either a five-node house motif (class 1) or a five-node cycle
(class 0) attached to a random tree node by a single edge. All nodes carry
the same label, so only structure separates the classes.
"""

from __future__ import annotations

import json

import numpy as np

BASE_NODES = 20
MOTIF_NODES = 5

HOUSE_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (1, 4)]  # roof: 0-1-4
CYCLE_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]


def ba_tree(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    """Preferential attachment with one edge per arriving node."""
    edges = [(0, 1)]
    endpoints = [0, 1]
    for v in range(2, n):
        target = int(endpoints[rng.integers(0, len(endpoints))])
        edges.append((target, v))
        endpoints.extend((target, v))
    return edges


def make_graph(rng: np.random.Generator, house: bool) -> dict:
    edges = ba_tree(rng, BASE_NODES)
    motif = HOUSE_EDGES if house else CYCLE_EDGES
    edges += [(u + BASE_NODES, v + BASE_NODES) for u, v in motif]
    anchor = int(rng.integers(0, BASE_NODES))
    # the attachment lands on a random base node but a fixed motif corner,
    # so the motif geometry is identical across graphs of a class
    edges.append((anchor, BASE_NODES))
    n = BASE_NODES + MOTIF_NODES
    return {"n": n, "node_labels": [0] * n,
            "edges": [[min(u, v), max(u, v)] for u, v in edges]}


def generate_ba2(n_graphs: int, seed: int) -> tuple[dict, list[int]]:
    """Balanced dataset document plus ground-truth motif labels."""
    if n_graphs % 2:
        raise ValueError("n_graphs must be even for balanced classes")
    rng = np.random.default_rng(seed)
    labels = [1, 0] * (n_graphs // 2)
    graphs = []
    for i, y in enumerate(labels):
        g = make_graph(rng, house=bool(y))
        g["id"] = f"ba2_{i}"
        graphs.append(g)
    doc = {"labels": ["node"], "graphs": graphs}
    return doc, labels


def write_dataset(doc: dict, labels: list[int], dataset_path, truth_path):
    with open(dataset_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump({"motif_labels": labels}, fh)
        fh.write("\n")
