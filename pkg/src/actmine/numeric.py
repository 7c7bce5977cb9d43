"""Describe a rule's activating nodes with interval subgroups over
topological node features.

Every dataset node becomes a table row with degree, betweenness centrality
(exact Brandes, normalized, endpoints excluded), clustering coefficient and
triangle count, plus closed-neighborhood sums (suffix ``2``) and means
(suffix ``2_avg``) of each. The target flags whether the node activates the
rule. A beam search over conjunctions of per-feature conditions (half-open
intervals from equal-frequency cut points, plus exact values for integer
features) ranks subgroups by WRAcc with the activating rows as the positive
class.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .background import matching_rows
from .gcn import ActivationMatrix
from .graphs import GraphDataset, LabeledGraph
from .subgraph import wracc

BASE_FEATURES = ("degree", "betweenness", "clustering", "triangle")


def triangle_counts(g: LabeledGraph) -> np.ndarray:
    """Triangles through each node: adjacent pairs among its neighbors."""
    tri = np.zeros(g.node_count, dtype=np.int64)
    nbr = g.neighbor_sets
    for v in range(g.node_count):
        ns = sorted(nbr[v])
        count = 0
        for i in range(len(ns)):
            for j in range(i + 1, len(ns)):
                if ns[j] in nbr[ns[i]]:
                    count += 1
        tri[v] = count
    return tri


def clustering_coefficients(g: LabeledGraph) -> np.ndarray:
    tri = triangle_counts(g)
    out = np.zeros(g.node_count)
    for v in range(g.node_count):
        d = len(g.neighbor_sets[v])
        if d >= 2:
            out[v] = 2.0 * tri[v] / (d * (d - 1))
    return out


def betweenness_centrality(g: LabeledGraph) -> np.ndarray:
    """Exact unweighted betweenness (Brandes), endpoints excluded,
    normalized by (n-1)(n-2)/2."""
    n = g.node_count
    bc = np.zeros(n)
    adj = [list(s) for s in g.neighbor_sets]
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1)
        dist[s] = 0
        queue = [s]
        qi = 0
        while qi < len(queue):
            v = queue[qi]
            qi += 1
            stack.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    bc /= 2.0  # each unordered pair counted from both endpoints
    norm = (n - 1) * (n - 2) / 2.0
    return bc / norm if norm > 0 else bc


@dataclass(eq=False)
class NodeFeatureTable:
    feature_names: tuple[str, ...]
    values: np.ndarray           # rows x features
    target: np.ndarray           # rows, bool: activates the rule

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=bool)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.feature_names) + ["activates"])
            for row, t in zip(self.values, self.target):
                w.writerow([repr(x) for x in row] + [int(t)])


def graph_features(g: LabeledGraph) -> dict[str, np.ndarray]:
    feats = {
        "degree": np.array([len(s) for s in g.neighbor_sets], dtype=np.float64),
        "betweenness": betweenness_centrality(g),
        "clustering": clustering_coefficients(g),
        "triangle": triangle_counts(g).astype(np.float64),
    }
    for name in BASE_FEATURES:
        base = feats[name]
        sums = np.empty_like(base)
        means = np.empty_like(base)
        for v in range(g.node_count):
            closed = list(g.neighbor_sets[v]) + [v]
            sums[v] = base[closed].sum()
            means[v] = base[closed].mean()
        feats[name + "2"] = sums
        feats[name + "2_avg"] = means
    return feats


FEATURE_ORDER = tuple([f for f in BASE_FEATURES]
                      + [f + "2" for f in BASE_FEATURES]
                      + [f + "2_avg" for f in BASE_FEATURES])


def propositionalize(ds: GraphDataset, rule,
                     act: ActivationMatrix) -> NodeFeatureTable:
    """One row per dataset node, aligned with the activation matrix rows."""
    rows = matching_rows(act, rule.components)
    blocks = []
    for g in ds.graphs:
        feats = graph_features(g)
        blocks.append(np.column_stack([feats[f] for f in FEATURE_ORDER]))
    values = np.vstack(blocks)
    if values.shape[0] != rows.shape[0]:
        raise ValueError("dataset and activation matrix disagree on node count")
    return NodeFeatureTable(feature_names=FEATURE_ORDER, values=values,
                            target=rows)


@dataclass(frozen=True)
class Condition:
    feature: str
    op: str          # "eq" or "in"
    lo: float
    hi: float        # for "eq", lo == hi == the value

    def __str__(self):
        if self.op == "eq":
            return f"{self.feature}={self.lo:g}"
        if self.lo == -np.inf:
            return f"{self.feature} < {self.hi:g}"
        if self.hi == np.inf:
            return f"{self.feature} >= {self.lo:g}"
        return f"{self.feature}: [{self.lo:g}:{self.hi:g}["


@dataclass
class IntervalPattern:
    conditions: tuple[Condition, ...]
    wracc: float
    support: int
    support_pos: int

    def __str__(self):
        return " AND ".join(str(c) for c in self.conditions)

    def to_json_obj(self) -> dict:
        return {"description": str(self),
                "conditions": [{"feature": c.feature, "op": c.op,
                                "lo": c.lo, "hi": c.hi}
                               for c in self.conditions],
                "wracc": self.wracc, "support": self.support,
                "support_pos": self.support_pos}


def _selectors(table: NodeFeatureTable, bins: int):
    """Candidate (condition, row mask) pairs per feature."""
    out = []
    n = table.values.shape[0]
    for j, name in enumerate(table.feature_names):
        col = table.values[:, j]
        uniq = np.unique(col)
        if len(uniq) < 2:
            continue
        conds: list[Condition] = []
        if np.allclose(uniq, np.round(uniq)):
            conds.extend(Condition(name, "eq", v, v) for v in uniq)
        qs = np.quantile(col, [i / bins for i in range(1, bins)])
        edges = sorted(set(float(q) for q in qs) - {float(uniq[0])})
        bounds = [-np.inf] + edges + [np.inf]
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if lo == -np.inf and hi == np.inf:
                continue
            conds.append(Condition(name, "in", lo, hi))
        for e in edges:
            conds.append(Condition(name, "in", -np.inf, e))
            conds.append(Condition(name, "in", e, np.inf))
        seen = set()
        for c in conds:
            key = (c.op, c.lo, c.hi)
            if key in seen:
                continue
            seen.add(key)
            if c.op == "eq":
                mask = col == c.lo
            else:
                mask = (col >= c.lo) & (col < c.hi)
            cnt = int(mask.sum())
            if 0 < cnt < n:
                out.append((c, mask))
    return out


def mine_numeric_subgroup(table: NodeFeatureTable, beam_width: int = 50,
                          max_depth: int = 4, bins: int = 5,
                          top: int = 20) -> list[IntervalPattern]:
    """Beam search over condition conjunctions ranked by WRAcc.

    Returns the ``top`` best patterns; empty when the target is constant
    (every pattern then scores 0).
    """
    n = table.values.shape[0]
    n_pos = int(table.target.sum())
    if n_pos == 0 or n_pos == n:
        return []
    selectors = _selectors(table, bins)
    pos = table.target

    def score(mask):
        supp = int(mask.sum())
        supp_pos = int((mask & pos).sum())
        return wracc(supp, supp_pos, n, n_pos), supp, supp_pos

    def sort_key(item):
        pat, _mask = item
        return (-pat.wracc, len(pat.conditions),
                tuple((c.feature, c.op, c.lo, c.hi) for c in pat.conditions))

    beam: list[tuple[IntervalPattern, np.ndarray]] = [
        (IntervalPattern(conditions=(), wracc=0.0, support=n,
                         support_pos=n_pos), np.ones(n, dtype=bool))]
    pool: dict[tuple, IntervalPattern] = {}
    for _ in range(max_depth):
        grown: dict[tuple, tuple[IntervalPattern, np.ndarray]] = {}
        for pat, mask in beam:
            used = {c.feature for c in pat.conditions}
            for cond, cmask in selectors:
                if cond.feature in used:
                    continue
                conds = tuple(sorted(pat.conditions + (cond,),
                                     key=lambda c: (c.feature, c.op, c.lo,
                                                    c.hi)))
                key = tuple((c.feature, c.op, c.lo, c.hi) for c in conds)
                if key in grown or key in pool:
                    continue
                new_mask = mask & cmask
                q, supp, supp_pos = score(new_mask)
                if supp == 0:
                    continue
                cand = IntervalPattern(conditions=conds, wracc=q,
                                       support=supp, support_pos=supp_pos)
                grown[key] = (cand, new_mask)
        if not grown:
            break
        ranked = sorted(grown.values(), key=sort_key)
        beam = ranked[:beam_width]
        for pat, _ in ranked:
            key = tuple((c.feature, c.op, c.lo, c.hi) for c in pat.conditions)
            pool[key] = pat
    result = sorted(pool.values(),
                    key=lambda p: (-p.wracc, len(p.conditions),
                                   tuple((c.feature, c.op, c.lo, c.hi)
                                         for c in p.conditions)))
    return result[:top]
