import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from actmine.gcn import ActivationMatrix
from actmine.background import BackgroundModel
from actmine.graphs import load_dataset

DATA = Path(__file__).parent / "data"

# Transcribed layer-3 embeddings of the four toy graphs (K = 6).
TOY_EMBEDDINGS = {
    "G1": [[0.1, 0.2, 0.0, 0.0, 0.0, 0.3],
           [0.0, 0.0, 0.2, 0.2, 0.4, 0.0],
           [0.2, 0.1, 0.0, 0.0, 0.0, 0.2],
           [0.0, 0.1, 0.0, 0.0, 0.0, 0.2],
           [0.0, 0.0, 0.2, 0.0, 0.3, 0.0]],
    "G2": [[0.1, 0.0, 0.2, 0.2, 0.3, 0.0],
           [0.1, 0.0, 0.1, 0.0, 0.1, 0.4],
           [0.1, 0.0, 0.2, 0.2, 0.3, 0.0],
           [0.0, 0.0, 0.2, 0.0, 0.3, 0.0],
           [0.0, 0.0, 0.1, 0.0, 0.1, 0.3]],
    "G3": [[0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
           [0.0, 0.3, 0.1, 0.0, 0.1, 0.1],
           [0.0, 0.0, 0.0, 0.4, 0.2, 0.0],
           [0.0, 0.0, 0.0, 0.0, 0.1, 0.0],
           [0.0, 0.2, 0.0, 0.0, 0.1, 0.1]],
    "G4": [[0.0, 0.2, 0.0, 0.0, 0.0, 0.3],
           [0.0, 0.0, 0.2, 0.2, 0.3, 0.0],
           [0.0, 0.1, 0.0, 0.0, 0.0, 0.1],
           [0.0, 0.1, 0.0, 0.0, 0.0, 0.1],
           [0.0, 0.0, 0.1, 0.0, 0.2, 0.0],
           [0.0, 0.2, 0.0, 0.0, 0.0, 0.0]]}

TOY_DECISIONS = [1, 1, 0, 0]
TOY_IDS = ("G1", "G2", "G3", "G4")


@pytest.fixture
def toy_dataset():
    return load_dataset(DATA / "toy_dataset.json")


@pytest.fixture
def toy_act():
    blocks = [(np.array(TOY_EMBEDDINGS[g]) > 0).astype(np.uint8)
              for g in TOY_IDS]
    return ActivationMatrix.from_graph_bits(3, blocks, TOY_DECISIONS, TOY_IDS)


@pytest.fixture
def toy_bg_rounded(toy_act):
    """Background model carrying the rounded illustrative probabilities for
    the worked example: the activating nodes of rule {0, 5} get (0.72, 0.34)
    in G1 and (0.99, 0.47) in G2; everything else is a neutral 0.5."""
    p = np.full((toy_act.n_rows, toy_act.width), 0.5)
    for row in (0, 2):          # G1 nodes 1 and 3
        p[row, 0], p[row, 5] = 0.72, 0.34
    p[6, 0], p[6, 5] = 0.99, 0.47   # G2 node 2
    return BackgroundModel(probabilities=p, layer=3, residual=0.0)


def random_activation(rng, n_graphs, max_nodes, k, density=0.5):
    """Random activation matrix with both classes present."""
    blocks = []
    for _ in range(n_graphs):
        n = rng.integers(1, max_nodes + 1)
        blocks.append((rng.random((n, k)) < density).astype(np.uint8))
    decisions = rng.integers(0, 2, n_graphs)
    decisions[0], decisions[1] = 0, 1  # both classes guaranteed
    return ActivationMatrix.from_graph_bits(
        1, blocks, decisions, tuple(f"g{i}" for i in range(n_graphs)))
