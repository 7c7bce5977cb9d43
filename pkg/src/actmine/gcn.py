"""Forward inference for trained GCNs, activation matrices, and masking.

The convolution at each layer aggregates neighbor embeddings (the node itself
included, with implicit self-weight 1) scaled by ``e_{w,v} / sqrt(d_v * d_w)``
where ``d_v`` sums the incident weights plus the self weight, applies the layer
matrix and a ReLU. Graph-level readout is mean pooling followed by a linear
layer and a softmax over the two classes. Inference is float64 throughout.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .graphs import GraphDataset, LabeledGraph

NODE_SET = "node-set"
EDGE_SET = "edge-set"
CONTINUOUS = "continuous-edge-weights"


class EmptyGraphError(Exception):
    """A (masked) graph has no nodes left; callers define the fallback."""


class ModelFormatError(ValueError):
    """Model file malformed or dimension chain broken."""


# Probabilities reported for graphs that masking emptied out entirely.
EMPTY_GRAPH_PROBS = (0.5, 0.5)


@dataclass(eq=False)
class GcnModel:
    """Layer weights (out x in) plus linear readout; mean-pool before readout.

    ``layer_biases`` is optional (zeros when omitted): one length-K vector
    added inside each convolution before the ReLU.
    """

    layer_weights: list[np.ndarray]
    readout_w: np.ndarray
    readout_b: np.ndarray
    layer_biases: list[np.ndarray] | None = None

    def __post_init__(self):
        self.layer_weights = [np.asarray(w, dtype=np.float64)
                              for w in self.layer_weights]
        self.readout_w = np.asarray(self.readout_w, dtype=np.float64)
        self.readout_b = np.asarray(self.readout_b, dtype=np.float64)
        if not self.layer_weights:
            raise ModelFormatError("model needs at least one layer")
        k = self.layer_weights[0].shape[0]
        for i, w in enumerate(self.layer_weights):
            if w.ndim != 2:
                raise ModelFormatError(f"layer {i + 1} weight is not a matrix")
            if i > 0 and w.shape != (k, k):
                raise ModelFormatError(
                    f"layer {i + 1} expected shape {(k, k)}, got {w.shape}")
        if self.layer_biases is None:
            self.layer_biases = [np.zeros(k) for _ in self.layer_weights]
        else:
            self.layer_biases = [np.asarray(b, dtype=np.float64)
                                 for b in self.layer_biases]
            if len(self.layer_biases) != len(self.layer_weights):
                raise ModelFormatError("one bias vector per layer required")
            for i, b in enumerate(self.layer_biases):
                if b.shape != (k,):
                    raise ModelFormatError(
                        f"layer {i + 1} bias must have length {k}")
        if self.readout_w.shape != (2, k):
            raise ModelFormatError(
                f"readout expected shape {(2, k)}, got {self.readout_w.shape}")
        if self.readout_b.shape != (2,):
            raise ModelFormatError("readout bias must have length 2")

    @property
    def layer_count(self) -> int:
        return len(self.layer_weights)

    @property
    def width(self) -> int:
        return self.layer_weights[0].shape[0]

    @property
    def label_count(self) -> int:
        return self.layer_weights[0].shape[1]


def propagation_matrix(g: LabeledGraph) -> np.ndarray:
    """Dense symmetric-normalized adjacency with implicit self-loops."""
    n = g.node_count
    a = np.zeros((n, n), dtype=np.float64)
    for u, v, w in g.edges:
        a[u, v] = w
        a[v, u] = w
    deg = a.sum(axis=1) + 1.0  # self weight 1 counts toward d_v
    np.fill_diagonal(a, 1.0)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass(eq=False)
class ForwardResult:
    embeddings: list[np.ndarray]  # one (n, K) array per layer 1..L
    probabilities: np.ndarray     # length-2, sums to 1
    decision: int


def forward(model: GcnModel, g: LabeledGraph) -> ForwardResult:
    """Run the GCN on one graph; returns per-layer embeddings and the decision."""
    if g.node_count == 0:
        raise EmptyGraphError(f"graph {g.graph_id!r} has no nodes")
    t = model.label_count
    for v, lab in enumerate(g.node_labels):
        if lab >= t:
            raise ModelFormatError(
                f"graph {g.graph_id!r}: node {v} label {lab} >= model label "
                f"count {t}")
    s = propagation_matrix(g)
    h = np.zeros((g.node_count, t), dtype=np.float64)
    h[np.arange(g.node_count), list(g.node_labels)] = 1.0
    embeddings = []
    for w, b in zip(model.layer_weights, model.layer_biases):
        h = np.maximum(s @ h @ w.T + b, 0.0)
        embeddings.append(h)
    pooled = embeddings[-1].mean(axis=0)
    logits = model.readout_w @ pooled + model.readout_b
    logits = logits - logits.max()
    exps = np.exp(logits)
    probs = exps / exps.sum()
    return ForwardResult(embeddings=embeddings, probabilities=probs,
                         decision=int(np.argmax(probs)))


def predict_dataset(model: GcnModel, ds: GraphDataset) -> list[int]:
    return [forward(model, g).decision for g in ds.graphs]


@dataclass(eq=False)
class ActivationMatrix:
    """Binary node x component matrix for one layer, rows ordered by (graph, node).

    ``bits[r, k] == 1`` iff component k of the row's node embedding is strictly
    positive. ``decisions`` holds the model class per graph; ``seg_starts``
    delimits each graph's contiguous row block.
    """

    layer: int
    bits: np.ndarray
    graph_ids: tuple[str, ...]
    decisions: np.ndarray
    seg_starts: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        self.decisions = np.asarray(self.decisions, dtype=np.uint8)
        self.seg_starts = np.asarray(self.seg_starts, dtype=np.int64)
        m = len(self.graph_ids)
        if self.seg_starts.shape != (m + 1,):
            raise ValueError("seg_starts must have one entry per graph plus one")
        if self.seg_starts[0] != 0 or self.seg_starts[-1] != self.bits.shape[0]:
            raise ValueError("seg_starts must span all rows")
        if np.any(np.diff(self.seg_starts) < 1):
            raise ValueError("every graph needs at least one row")
        if self.decisions.shape != (m,):
            raise ValueError("one decision per graph required")

    @property
    def n_rows(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def n_graphs(self) -> int:
        return len(self.graph_ids)

    @property
    def row_graph(self) -> np.ndarray:
        """Graph position owning each row."""
        return np.repeat(np.arange(self.n_graphs),
                         np.diff(self.seg_starts))

    def row_index(self, r: int) -> tuple[str, int]:
        g = int(np.searchsorted(self.seg_starts, r, side="right") - 1)
        return self.graph_ids[g], int(r - self.seg_starts[g])

    def graph_rows(self, g: int) -> np.ndarray:
        return self.bits[self.seg_starts[g]:self.seg_starts[g + 1]]

    @classmethod
    def from_graph_bits(cls, layer, per_graph_bits, decisions, graph_ids):
        """Assemble from one bit block per graph (test/fixture convenience)."""
        blocks = [np.atleast_2d(np.asarray(b, dtype=np.uint8))
                  for b in per_graph_bits]
        starts = np.cumsum([0] + [b.shape[0] for b in blocks])
        return cls(layer=layer, bits=np.vstack(blocks),
                   graph_ids=tuple(graph_ids), decisions=decisions,
                   seg_starts=starts)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["graph", "node"]
                       + [f"c{k + 1}" for k in range(self.width)]
                       + ["decision"])
            for g, gid in enumerate(self.graph_ids):
                lo, hi = self.seg_starts[g], self.seg_starts[g + 1]
                for r in range(lo, hi):
                    w.writerow([gid, r - lo] + list(map(int, self.bits[r]))
                               + [int(self.decisions[g])])


def activation_matrix(model: GcnModel, ds: GraphDataset, layer: int,
                      results: list[ForwardResult] | None = None) -> ActivationMatrix:
    """Strict-positivity bit matrix of layer ``layer`` embeddings over ``ds``."""
    if not (1 <= layer <= model.layer_count):
        raise ValueError(f"layer {layer} out of range 1..{model.layer_count}")
    if results is None:
        results = [forward(model, g) for g in ds.graphs]
    blocks = [(r.embeddings[layer - 1] > 0.0).astype(np.uint8) for r in results]
    decisions = np.array([r.decision for r in results], dtype=np.uint8)
    return ActivationMatrix.from_graph_bits(layer, blocks, decisions,
                                            tuple(ds.graph_ids()))


@dataclass(eq=False)
class Mask:
    """Explanation mask over one graph.

    Discrete kinds carry explicit ``nodes`` and ``edges`` (both are counted by
    the sparsity metric); the continuous kind carries per-edge weights in
    [0, 1] keyed by normalized (u, v) with u < v.
    """

    kind: str
    graph_id: str
    nodes: tuple[int, ...] = ()
    edges: tuple[tuple[int, int], ...] = ()
    weights: dict | None = None

    def __post_init__(self):
        if self.kind not in (NODE_SET, EDGE_SET, CONTINUOUS):
            raise ValueError(f"unknown mask kind {self.kind!r}")
        self.nodes = tuple(sorted(set(self.nodes)))
        self.edges = tuple(sorted({(min(u, v), max(u, v))
                                   for u, v in self.edges}))
        if self.weights is not None:
            self.weights = {(min(u, v), max(u, v)): float(w)
                            for (u, v), w in self.weights.items()}

    def validate(self, g: LabeledGraph) -> None:
        if g.graph_id != self.graph_id:
            raise ValueError(f"mask for {self.graph_id!r} applied to "
                             f"{g.graph_id!r}")
        present = {(u, v) for u, v, _ in g.edges}
        for v in self.nodes:
            if not (0 <= v < g.node_count):
                raise ValueError(f"mask node {v} not in graph")
        for e in self.edges:
            if e not in present:
                raise ValueError(f"mask edge {e} not in graph")
        if self.kind == CONTINUOUS:
            for e, w in (self.weights or {}).items():
                if e not in present:
                    raise ValueError(f"mask edge {e} not in graph")
                if not (0.0 <= w <= 1.0):
                    raise ValueError(f"mask weight {w} outside [0, 1]")

    def size(self) -> int:
        """Nodes + edges counted by the sparsity metric."""
        if self.kind == CONTINUOUS:
            kept = [e for e, w in (self.weights or {}).items() if w > 0.5]
            ends = {u for e in kept for u in e}
            return len(kept) + len(ends)
        return len(self.nodes) + len(self.edges)


def _induced(g: LabeledGraph, keep: list[int], suffix: str) -> LabeledGraph:
    local = {u: i for i, u in enumerate(keep)}
    return LabeledGraph(
        graph_id=g.graph_id + suffix,
        node_count=len(keep),
        node_labels=tuple(g.node_labels[u] for u in keep),
        edges=tuple((local[u], local[v], w) for u, v, w in g.edges
                    if u in local and v in local),
    )


def apply_mask(g: LabeledGraph, m: Mask, mode: str) -> LabeledGraph:
    """Build the masked graph for metric evaluation.

    ``keep-complement`` removes the masked part (fidelity), ``keep-mask``
    retains only it (infidelity). Continuous masks rescale edge weights; a
    rescaled weight of exactly 0 drops the edge but keeps its endpoints.
    Raises :class:`EmptyGraphError` when nothing remains.
    """
    if mode not in ("keep-complement", "keep-mask"):
        raise ValueError(f"unknown mode {mode!r}")
    m.validate(g)
    comp = mode == "keep-complement"

    if m.kind == NODE_SET:
        masked = set(m.nodes)
        keep = [v for v in range(g.node_count)
                if (v not in masked) == comp]
        out = _induced(g, keep, "~masked")
    elif m.kind == EDGE_SET:
        listed = set(m.edges)
        if comp:
            edges = [(u, v, w) for u, v, w in g.edges if (u, v) not in listed]
            alive = {u for u, v, _ in edges} | {v for _, v, _ in edges}
            touched = {x for e in listed for x in e}
            keep = [v for v in range(g.node_count)
                    if v in alive or v not in touched]
        else:
            edges = [(u, v, w) for u, v, w in g.edges if (u, v) in listed]
            keep = sorted({x for u, v, _ in edges for x in (u, v)})
        local = {u: i for i, u in enumerate(keep)}
        out = LabeledGraph(
            graph_id=g.graph_id + "~masked",
            node_count=len(keep),
            node_labels=tuple(g.node_labels[u] for u in keep),
            edges=tuple((local[u], local[v], w) for u, v, w in edges),
        )
    else:  # CONTINUOUS
        wmap = m.weights or {}
        edges = []
        for u, v, w in g.edges:
            wbar = min(1.0, max(0.0, wmap.get((u, v), 0.0)))
            scale = (1.0 - wbar) if comp else wbar
            if w * scale > 0.0:
                edges.append((u, v, w * scale))
        out = LabeledGraph(
            graph_id=g.graph_id + "~masked",
            node_count=g.node_count,
            node_labels=g.node_labels,
            edges=tuple(edges),
        )

    if out.node_count == 0:
        raise EmptyGraphError(f"mask removed all of graph {g.graph_id!r}")
    return out


def masked_prediction(model: GcnModel, g: LabeledGraph, m: Mask,
                      mode: str) -> tuple[np.ndarray, int]:
    """Probabilities and decision after masking, with the empty-graph fallback."""
    try:
        res = forward(model, apply_mask(g, m, mode))
        return res.probabilities, res.decision
    except EmptyGraphError:
        probs = np.array(EMPTY_GRAPH_PROBS)
        return probs, int(np.argmax(probs))


def save_model(model: GcnModel, path) -> None:
    doc = {
        "L": model.layer_count,
        "K": model.width,
        "T": model.label_count,
        "layers": [w.tolist() for w in model.layer_weights],
        "readout": {"W": model.readout_w.tolist(),
                    "b": model.readout_b.tolist()},
    }
    if any(np.any(b != 0.0) for b in model.layer_biases):
        doc["biases"] = [b.tolist() for b in model.layer_biases]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> GcnModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        layers = [np.array(w, dtype=np.float64) for w in doc["layers"]]
        readout = doc["readout"]
        biases = ([np.array(b, dtype=np.float64) for b in doc["biases"]]
                  if "biases" in doc else None)
        model = GcnModel(layer_weights=layers,
                         readout_w=np.array(readout["W"], dtype=np.float64),
                         readout_b=np.array(readout["b"], dtype=np.float64),
                         layer_biases=biases)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    for name, got, want in (("L", doc.get("L"), model.layer_count),
                            ("K", doc.get("K"), model.width),
                            ("T", doc.get("T"), model.label_count)):
        if got != want:
            raise ModelFormatError(
                f"{path}: declared {name}={got} but weights imply {want}")
    if layers[0].shape[0] != doc["K"] or layers[0].shape[1] != doc["T"]:
        raise ModelFormatError(
            f"{path}: first layer must map T={doc['T']} -> K={doc['K']}")
    return model
