"""Turn activation rules into explanation masks and score them.

Four mask policies are supported per (rule, graph):

* ``node``: the rule's activating nodes plus every edge touching them.
* ``ego``: the union of radius-``layer`` balls around activating nodes, with
  the edges induced on that union.
* ``decay``: a continuous edge mask; a node at hop distance d <= layer from an
  activating node receives weight ``1 / 2**(1 + d)`` summed over activating
  nodes (0 beyond the radius), an edge gets the sum of its endpoint weights,
  and edge weights are divided by the graph maximum before storage.
* ``topk(k)``: the k highest-weight edges of the decay mask, ties broken by
  (u, v) order.

Fidelity removes the mask and watches the prediction; infidelity keeps only
the mask. Sparsity reports the fraction of the graph left unmasked (nodes +
edges). The mimic tree checks how much of the model's behavior the rule set
captures: a small CART over per-rule activating-node counts is trained to
reproduce the model decision.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .gcn import (CONTINUOUS, EDGE_SET, NODE_SET, ForwardResult, GcnModel,
                  Mask, forward, masked_prediction)
from .graphs import GraphDataset, LabeledGraph, geodesic_distances
from .mining import ActivationRule

POLICIES = ("node", "ego", "decay", "topk")


class NoActivationError(Exception):
    """The rule has no activating node in the given graph."""


@dataclass(eq=False)
class Explanation:
    graph_id: str
    rule: ActivationRule
    policy: str
    mask: Mask


@dataclass
class MetricReport:
    fid_acc: float
    fid_prob: float
    infid_acc: float
    infid_prob: float
    sparsity: float
    flip_0_to_1: float | None
    flip_1_to_0: float | None
    n: int

    def to_json_obj(self) -> dict:
        return {
            "Fid_acc": self.fid_acc, "Fid_prob": self.fid_prob,
            "Infid_acc": self.infid_acc, "Infid_prob": self.infid_prob,
            "Sparsity": self.sparsity,
            "F_0_to_1": self.flip_0_to_1, "F_1_to_0": self.flip_1_to_0,
            "N": self.n,
        }


def activating_nodes(rule: ActivationRule, emb: np.ndarray) -> list[int]:
    """Nodes whose layer embedding is strictly positive on every rule component."""
    comps = list(rule.components)
    hits = (emb[:, comps] > 0.0).all(axis=1)
    return [int(v) for v in np.nonzero(hits)[0]]


def decay_node_weights(g: LabeledGraph, centers, radius: int) -> np.ndarray:
    w = np.zeros(g.node_count)
    for a in centers:
        dist = geodesic_distances(g, a)
        for v in range(g.node_count):
            if dist[v] <= radius:
                w[v] += 0.5 ** (1.0 + dist[v])
    return w


def build_mask(rule: ActivationRule, g: LabeledGraph, embeddings: list[np.ndarray],
               policy: str, k: int = 5) -> Mask:
    """Build one policy mask for a rule on one graph.

    ``embeddings`` is the per-layer list from :func:`actmine.gcn.forward`.
    Raises :class:`NoActivationError` when no node activates the rule.
    """
    emb = embeddings[rule.layer - 1]
    centers = activating_nodes(rule, emb)
    if not centers:
        raise NoActivationError(
            f"rule {rule.components} never activates in graph {g.graph_id!r}")

    if policy == "node":
        nodes = set(centers)
        edges = [(u, v) for u, v, _ in g.edges if u in nodes or v in nodes]
        return Mask(kind=NODE_SET, graph_id=g.graph_id,
                    nodes=tuple(nodes), edges=tuple(edges))

    if policy == "ego":
        ball: set[int] = set()
        for a in centers:
            dist = geodesic_distances(g, a)
            ball.update(v for v in range(g.node_count)
                        if dist[v] <= rule.layer)
        edges = [(u, v) for u, v, _ in g.edges if u in ball and v in ball]
        return Mask(kind=NODE_SET, graph_id=g.graph_id,
                    nodes=tuple(ball), edges=tuple(edges))

    w = decay_node_weights(g, centers, rule.layer)
    edge_w = {(u, v): w[u] + w[v] for u, v, _ in g.edges}

    if policy == "decay":
        top = max(edge_w.values(), default=0.0)
        if top > 0:
            edge_w = {e: x / top for e, x in edge_w.items()}
        return Mask(kind=CONTINUOUS, graph_id=g.graph_id, weights=edge_w)

    if policy == "topk":
        ranked = sorted(edge_w.items(), key=lambda it: (-it[1], it[0]))
        chosen = [e for e, _ in ranked[:k]]
        nodes = {u for e in chosen for u in e}
        return Mask(kind=EDGE_SET, graph_id=g.graph_id,
                    nodes=tuple(nodes), edges=tuple(chosen))

    raise ValueError(f"unknown policy {policy!r}")


def build_explanations(model: GcnModel, ds: GraphDataset,
                       rules: list[ActivationRule], policy: str, k: int = 5,
                       results: list[ForwardResult] | None = None
                       ) -> list[Explanation]:
    """One explanation per graph, choosing the rule whose mask moves the
    predicted probability of the original class the most (first rule on ties).

    Graphs in which no rule activates are skipped.
    """
    if results is None:
        results = [forward(model, g) for g in ds.graphs]
    out = []
    for g, res in zip(ds.graphs, results):
        y = res.decision
        base = res.probabilities[y]
        best = None
        for rule in rules:
            try:
                mask = build_mask(rule, g, res.embeddings, policy, k)
            except NoActivationError:
                continue
            probs, _ = masked_prediction(model, g, mask, "keep-complement")
            drop = base - probs[y]
            if best is None or drop > best[0]:
                best = (drop, rule, mask)
        if best is not None:
            out.append(Explanation(graph_id=g.graph_id, rule=best[1],
                                   policy=policy, mask=best[2]))
    return out


def _metric_pass(model, ds, explanations, mode):
    by_id = {g.graph_id: g for g in ds.graphs}
    rows = []
    for ex in explanations:
        g = by_id[ex.graph_id]
        res = forward(model, g)
        y = res.decision
        probs, yhat = masked_prediction(model, g, ex.mask, mode)
        rows.append((ex.graph_id, y, res.probabilities[y], float(probs[y]),
                     yhat))
    return rows


def fidelity(model: GcnModel, ds: GraphDataset,
             explanations: list[Explanation]) -> MetricReport:
    """Prediction change when the mask is removed, plus sparsity and the
    per-direction decision-flip rates."""
    rows = _metric_pass(model, ds, explanations, "keep-complement")
    n = len(rows)
    if n == 0:
        raise ValueError("no explanations to score")
    fid_acc = sum(1 for _, y, _, _, yhat in rows if yhat != y) / n
    fid_prob = sum(py - pm for _, _, py, pm, _ in rows) / n
    flips = {0: [0, 0], 1: [0, 0]}  # class -> [count, flipped]
    for _, y, _, _, yhat in rows:
        flips[y][0] += 1
        flips[y][1] += int(yhat != y)
    f01 = flips[0][1] / flips[0][0] if flips[0][0] else None
    f10 = flips[1][1] / flips[1][0] if flips[1][0] else None
    inf_rows = _metric_pass(model, ds, explanations, "keep-mask")
    infid_acc = sum(1 for _, y, _, _, yhat in inf_rows if yhat != y) / n
    infid_prob = sum(py - pm for _, _, py, pm, _ in inf_rows) / n
    return MetricReport(fid_acc=fid_acc, fid_prob=fid_prob,
                        infid_acc=infid_acc, infid_prob=infid_prob,
                        sparsity=sparsity(ds, explanations),
                        flip_0_to_1=f01, flip_1_to_0=f10, n=n)


def infidelity(model: GcnModel, ds: GraphDataset,
               explanations: list[Explanation]) -> MetricReport:
    """Full report with the keep-mask (infidelity) fields; symmetric to
    :func:`fidelity`, which already computes both directions."""
    return fidelity(model, ds, explanations)


def sparsity(ds: GraphDataset, explanations: list[Explanation]) -> float:
    """Mean over graphs of 1 - |mask| / |graph|, sizes counting nodes + edges."""
    by_id = {g.graph_id: g for g in ds.graphs}
    total = 0.0
    for ex in explanations:
        g = by_id[ex.graph_id]
        gsize = g.node_count + len(g.edges)
        total += 1.0 - ex.mask.size() / gsize
    return total / len(explanations)


def polarized_fidelity(model: GcnModel, ds: GraphDataset,
                       explanations: list[Explanation]
                       ) -> tuple[float | None, float | None]:
    """Decision-flip rates split by original class (0->1 and 1->0)."""
    report = fidelity(model, ds, explanations)
    return report.flip_0_to_1, report.flip_1_to_0


def per_graph_deltas_csv(model: GcnModel, ds: GraphDataset,
                         explanations: list[Explanation], path) -> None:
    rows = _metric_pass(model, ds, explanations, "keep-complement")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph", "decision", "prob", "prob_masked", "flipped"])
        for gid, y, py, pm, yhat in rows:
            w.writerow([gid, y, repr(py), repr(pm), int(yhat != y)])


def load_external_masks(path, ds: GraphDataset) -> list[Explanation]:
    """Read edge-list masks per graph (JSON {graph_id: [[u, v], ...]}) so
    masks produced elsewhere score through the same metric kernels."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    by_id = {g.graph_id: g for g in ds.graphs}
    out = []
    for gid, edge_list in doc.items():
        if gid not in by_id:
            raise ValueError(f"mask references unknown graph {gid!r}")
        edges = tuple((int(u), int(v)) for u, v in edge_list)
        nodes = tuple({x for e in edges for x in e})
        mask = Mask(kind=EDGE_SET, graph_id=gid, nodes=nodes, edges=edges)
        mask.validate(by_id[gid])
        out.append(Explanation(graph_id=gid, rule=None, policy="external",
                               mask=mask))
    return out


# ---------------------------------------------------------------------------
# Mimic decision tree
# ---------------------------------------------------------------------------

class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self, label=None, feature=None, threshold=None,
                 left=None, right=None):
        self.label = label
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right

    def predict(self, x) -> int:
        node = self
        while node.label is None:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.label

    def to_json_obj(self):
        if self.label is not None:
            return {"label": int(self.label)}
        return {"feature": int(self.feature), "threshold": self.threshold,
                "left": self.left.to_json_obj(),
                "right": self.right.to_json_obj()}


def _gini(counts) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float((p * p).sum())


def _grow(x, y, depth, max_depth, min_leaf):
    counts = np.bincount(y, minlength=2)
    if depth >= max_depth or counts.min() == 0 or len(y) < 2 * min_leaf:
        return _TreeNode(label=int(np.argmax(counts)))
    best = None
    parent = _gini(counts)
    for f in range(x.shape[1]):
        vals = np.unique(x[:, f])
        if len(vals) < 2:
            continue
        for t in (vals[:-1] + vals[1:]) / 2.0:
            left = x[:, f] <= t
            nl = int(left.sum())
            if nl < min_leaf or len(y) - nl < min_leaf:
                continue
            gl = _gini(np.bincount(y[left], minlength=2))
            gr = _gini(np.bincount(y[~left], minlength=2))
            score = parent - (nl * gl + (len(y) - nl) * gr) / len(y)
            if best is None or score > best[0] + 1e-15:
                best = (score, f, t, left)
    if best is None or best[0] <= 1e-15:
        return _TreeNode(label=int(np.argmax(counts)))
    _, f, t, left = best
    return _TreeNode(feature=f, threshold=float(t),
                     left=_grow(x[left], y[left], depth + 1, max_depth, min_leaf),
                     right=_grow(x[~left], y[~left], depth + 1, max_depth,
                                 min_leaf))


def rule_count_features(rules: list[ActivationRule],
                        acts: dict[int, "ActivationMatrix"]) -> np.ndarray:
    """Graphs x rules matrix of activating-node counts."""
    from .background import matching_rows
    first = next(iter(acts.values()))
    m = first.n_graphs
    x = np.zeros((m, len(rules)), dtype=np.float64)
    for j, rule in enumerate(rules):
        act = acts[rule.layer]
        rows = matching_rows(act, rule.components).astype(np.int64)
        x[:, j] = np.add.reduceat(rows, act.seg_starts[:-1])
    return x


def mimic_tree(rules, acts, ds: GraphDataset, test_fraction: float = 0.2,
               seed: int = 0, max_depth: int = 8, min_leaf: int = 5):
    """CART over rule activation counts, reproducing the model decision.

    Returns (tree, held-out accuracy); the split is a seeded shuffle.
    """
    if len(rules) < 1:
        raise ValueError("mimic tree needs at least one rule")
    first = next(iter(acts.values()))
    x = rule_count_features(rules, acts)
    y = np.asarray(first.decisions, dtype=np.int64)
    m = len(y)
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    n_test = max(1, int(round(test_fraction * m)))
    test, train = order[:n_test], order[n_test:]
    if len(train) == 0:
        raise ValueError("train split is empty")
    tree = _grow(x[train], y[train], 0, max_depth, min_leaf)
    pred = np.array([tree.predict(x[i]) for i in test])
    return tree, float((pred == y[test]).mean())
