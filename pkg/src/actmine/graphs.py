"""Graph data model, dataset I/O and basic topological kernels.

Graphs are undirected, node-labeled, with positive edge weights. Each edge is
stored once with normalized endpoints ``u < v``; self-loops are rejected (the
GCN adds the self-contribution during propagation, see :mod:`actmine.gcn`).
All types are treated as immutable after construction.
"""

from __future__ import annotations

import collections
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

UNREACHABLE = math.inf


class DatasetFormatError(ValueError):
    """Raised when a dataset file violates the schema or a graph invariant."""


@dataclass(eq=False)
class LabeledGraph:
    """Undirected node-labeled graph with weighted edges.

    ``edges`` holds one ``(u, v, w)`` triple per undirected edge with
    ``u < v`` and ``w > 0``.
    """

    graph_id: str
    node_count: int
    node_labels: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        self.node_labels = tuple(self.node_labels)
        norm = []
        seen = set()
        for e in self.edges:
            if len(e) == 2:
                u, v = e
                w = 1.0
            else:
                u, v, w = e
            if u == v:
                raise DatasetFormatError(
                    f"graph {self.graph_id!r}: self-loop on node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise DatasetFormatError(
                    f"graph {self.graph_id!r}: edge ({u},{v}) out of range")
            if w <= 0:
                raise DatasetFormatError(
                    f"graph {self.graph_id!r}: edge ({u},{v}) has weight {w} <= 0")
            if u > v:
                u, v = v, u
            if (u, v) in seen:
                raise DatasetFormatError(
                    f"graph {self.graph_id!r}: duplicate edge ({u},{v})")
            seen.add((u, v))
            norm.append((u, v, float(w)))
        self.edges = tuple(norm)
        if len(self.node_labels) != self.node_count:
            raise DatasetFormatError(
                f"graph {self.graph_id!r}: {len(self.node_labels)} labels "
                f"for {self.node_count} nodes")

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Per-node list of (neighbor, weight) pairs, excluding the node itself."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.node_count)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def neighbor_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(n for n, _ in a) for a in self.adjacency)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def validate_labels(self, alphabet_size: int) -> None:
        for v, lab in enumerate(self.node_labels):
            if not (0 <= lab < alphabet_size):
                raise DatasetFormatError(
                    f"graph {self.graph_id!r}: node {v} has label {lab} "
                    f"outside alphabet of size {alphabet_size}")


@dataclass(eq=False)
class GraphDataset:
    """A set of labeled graphs plus, optionally, one model decision per graph."""

    label_alphabet: tuple[str, ...]
    graphs: tuple[LabeledGraph, ...]
    decisions: tuple[int, ...] | None = None

    def __post_init__(self):
        self.label_alphabet = tuple(self.label_alphabet)
        self.graphs = tuple(self.graphs)
        for g in self.graphs:
            g.validate_labels(len(self.label_alphabet))
        if self.decisions is not None:
            self.decisions = tuple(int(d) for d in self.decisions)
            if len(self.decisions) != len(self.graphs):
                raise DatasetFormatError(
                    f"{len(self.decisions)} decisions for {len(self.graphs)} graphs")
            for d in self.decisions:
                if d not in (0, 1):
                    raise DatasetFormatError(f"decision {d} not in {{0,1}}")

    def __len__(self) -> int:
        return len(self.graphs)

    def node_total(self) -> int:
        return sum(g.node_count for g in self.graphs)

    def graph_ids(self) -> list[str]:
        return [g.graph_id for g in self.graphs]


@dataclass(eq=False)
class EgoGraph:
    """Induced subgraph of all nodes within ``radius`` hops of a center node.

    ``node_map[i]`` is the parent index of ego-local node ``i``; the center is
    always ego-local node 0.
    """

    center: tuple[str, int]
    radius: int
    graph: LabeledGraph
    node_map: tuple[int, ...]


def geodesic_distances(g: LabeledGraph, v: int) -> list[float]:
    """Unweighted BFS hop distances from ``v``; unreachable nodes get ``UNREACHABLE``."""
    if not (0 <= v < g.node_count):
        raise IndexError(f"node {v} out of range for graph {g.graph_id!r}")
    dist = [UNREACHABLE] * g.node_count
    dist[v] = 0.0
    queue = collections.deque([v])
    while queue:
        u = queue.popleft()
        for w, _ in g.adjacency[u]:
            if dist[w] == UNREACHABLE:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def ego_graph(g: LabeledGraph, v: int, radius: int) -> EgoGraph:
    """BFS-induced subgraph of all nodes within ``radius`` hops of ``v``."""
    if not (0 <= v < g.node_count):
        raise IndexError(f"node {v} out of range for graph {g.graph_id!r}")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    dist = geodesic_distances(g, v)
    keep = [u for u in range(g.node_count) if dist[u] <= radius]
    keep.sort(key=lambda u: (u != v, u))  # center first, then parent order
    local = {u: i for i, u in enumerate(keep)}
    edges = [(local[a], local[b], w) for a, b, w in g.edges
             if a in local and b in local]
    sub = LabeledGraph(
        graph_id=f"{g.graph_id}~ego{v}r{radius}",
        node_count=len(keep),
        node_labels=tuple(g.node_labels[u] for u in keep),
        edges=tuple(edges),
    )
    return EgoGraph(center=(g.graph_id, v), radius=radius, graph=sub,
                    node_map=tuple(keep))


def _graph_from_json(obj: dict) -> LabeledGraph:
    try:
        gid = str(obj["id"])
        n = int(obj["n"])
        labels = list(obj["node_labels"])
        edges = [tuple(e) for e in obj["edges"]]
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"malformed graph entry: {exc}") from exc
    return LabeledGraph(graph_id=gid, node_count=n,
                        node_labels=tuple(int(x) for x in labels),
                        edges=tuple(edges))


def load_dataset(path) -> GraphDataset:
    """Load and validate a dataset file (see the JSON schema in the README)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "labels" not in doc or "graphs" not in doc:
        raise DatasetFormatError(f"{path}: missing 'labels' or 'graphs'")
    graphs = tuple(_graph_from_json(g) for g in doc["graphs"])
    ids = [g.graph_id for g in graphs]
    if len(set(ids)) != len(ids):
        raise DatasetFormatError("duplicate graph ids")
    return GraphDataset(
        label_alphabet=tuple(str(s) for s in doc["labels"]),
        graphs=graphs,
        decisions=tuple(doc["decisions"]) if "decisions" in doc else None,
    )


def save_dataset(ds: GraphDataset, path) -> None:
    doc: dict = {
        "labels": list(ds.label_alphabet),
        "graphs": [
            {
                "id": g.graph_id,
                "n": g.node_count,
                "node_labels": list(g.node_labels),
                "edges": [[u, v] if w == 1.0 else [u, v, w]
                          for u, v, w in g.edges],
            }
            for g in ds.graphs
        ],
    }
    if ds.decisions is not None:
        doc["decisions"] = list(ds.decisions)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
