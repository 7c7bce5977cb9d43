"""Characterize a rule by the connected subgraph maximizing WRAcc.

The dataset has one instance per graph node: the node's ego-graph with radius
equal to the rule's layer, flagged positive when the node activates the rule.
Connected node-labeled patterns (edges carry a single dummy tag) are
enumerated gSpan-style through rightmost-path extension of minimal DFS codes,
pattern containment is non-induced subgraph isomorphism, and search is pruned
with an anti-monotone upper bound on WRAcc. With pruning disabled the result
is identical, just slower.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import matching_rows
from .gcn import ActivationMatrix
from .graphs import GraphDataset, LabeledGraph, ego_graph


def wracc(supp: int, supp_pos: int, n: int, n_pos: int) -> float:
    """Coverage times the lift of the positive rate over the base rate."""
    if supp == 0:
        return 0.0
    return (supp / n) * (supp_pos / supp - n_pos / n)


def wracc_bounds(supp: int, supp_pos: int, n: int, n_pos: int,
                 min_sup: int) -> float:
    """Anti-monotone upper bound on the WRAcc of every extension (and of the
    pattern itself): min of a coverage-based and a positive-cover-based bound."""
    ub = (supp / n) * (1.0 - max(min_sup, n_pos) / n)
    ub2 = supp_pos / n - (min_sup / n) * (n_pos / n)
    return min(ub, ub2)


@dataclass(eq=False)
class SubgroupDataset:
    """Ego-graph instances, one per dataset node, with the activation flag."""

    instances: list[LabeledGraph]
    positives: np.ndarray

    def __post_init__(self):
        self.positives = np.asarray(self.positives, dtype=bool)
        if len(self.instances) != self.positives.shape[0]:
            raise ValueError("one flag per instance required")

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def n_pos(self) -> int:
        return int(self.positives.sum())


def build_ego_dataset(rule, ds: GraphDataset,
                      act: ActivationMatrix) -> SubgroupDataset:
    """Radius = rule layer; positive iff the center activates the rule."""
    rows = matching_rows(act, rule.components)
    instances = []
    for g in ds.graphs:
        for v in range(g.node_count):
            instances.append(ego_graph(g, v, rule.layer).graph)
    if len(instances) != rows.shape[0]:
        raise ValueError("dataset and activation matrix disagree on node count")
    return SubgroupDataset(instances=instances, positives=rows)


def subgraph_isomorphic(pattern: LabeledGraph, target: LabeledGraph) -> bool:
    """Label-preserving (non-induced) subgraph isomorphism decision."""
    np_, nt = pattern.node_count, target.node_count
    if np_ > nt or len(pattern.edges) > len(target.edges):
        return False
    p_adj = pattern.neighbor_sets
    t_adj = target.neighbor_sets
    order = _connected_order(pattern)
    used = [False] * nt
    assign = [-1] * np_

    def fits(pv, tv):
        if target.node_labels[tv] != pattern.node_labels[pv]:
            return False
        if len(t_adj[tv]) < len(p_adj[pv]):
            return False
        for pn in p_adj[pv]:
            if assign[pn] != -1 and assign[pn] not in t_adj[tv]:
                return False
        return True

    def backtrack(i):
        if i == len(order):
            return True
        pv = order[i]
        for tv in range(nt):
            if not used[tv] and fits(pv, tv):
                used[tv] = True
                assign[pv] = tv
                if backtrack(i + 1):
                    return True
                used[tv] = False
                assign[pv] = -1
        return False

    return backtrack(0)


def _connected_order(g: LabeledGraph) -> list[int]:
    """Visit order where each node (after the first) touches a previous one."""
    if g.node_count == 0:
        return []
    order = [0]
    seen = {0}
    frontier = list(g.neighbor_sets[0])
    while frontier:
        v = frontier.pop(0)
        if v in seen:
            continue
        seen.add(v)
        order.append(v)
        frontier.extend(g.neighbor_sets[v])
    order.extend(v for v in range(g.node_count) if v not in seen)
    return order


# ---------------------------------------------------------------------------
# gSpan machinery
# ---------------------------------------------------------------------------

EDGE_TAG = 0  # single dummy edge label


class _IGraph:
    __slots__ = ("labels", "adj")

    def __init__(self, g: LabeledGraph):
        self.labels = list(g.node_labels)
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(g.node_count)]
        for eid, (u, v, _) in enumerate(g.edges):
            self.adj[u].append((v, eid))
            self.adj[v].append((u, eid))


class _PDFS:
    __slots__ = ("gid", "frm", "to", "eid", "prev")

    def __init__(self, gid, frm, to, eid, prev):
        self.gid = gid
        self.frm = frm
        self.to = to
        self.eid = eid
        self.prev = prev


class _History:
    __slots__ = ("edges", "has_eid", "has_node")

    def __init__(self, p: _PDFS):
        self.edges = []
        self.has_eid = set()
        self.has_node = set()
        while p is not None:
            self.edges.append(p)
            self.has_eid.add(p.eid)
            self.has_node.add(p.frm)
            self.has_node.add(p.to)
            p = p.prev
        self.edges.reverse()


def _rmpath(code) -> list[int]:
    """Indices of the rightmost path edges, rightmost first."""
    path = []
    old_frm = None
    for i in range(len(code) - 1, -1, -1):
        frm, to = code[i][0], code[i][1]
        if frm < to and (old_frm is None or to == old_frm):
            path.append(i)
            old_frm = frm
    return path


def code_to_graph(code, graph_id: str = "pattern") -> LabeledGraph:
    labels: dict[int, int] = {}
    edges = []
    for frm, to, lf, _tag, lt in code:
        if lf >= 0:
            labels[frm] = lf
        if lt >= 0:
            labels[to] = lt
        edges.append((frm, to, 1.0))
    n = max(labels) + 1
    return LabeledGraph(graph_id=graph_id, node_count=n,
                        node_labels=tuple(labels[i] for i in range(n)),
                        edges=tuple(edges))


def min_dfs_code(g: LabeledGraph) -> tuple:
    """Canonical (minimal) DFS code of a connected pattern graph."""
    ig = _IGraph(g)
    code: list = []
    projected = _min_root(ig, code)
    while True:
        ext = _min_extend(ig, code, projected)
        if ext is None:
            return tuple(_expand_code(code))
        code.append(ext[0])
        projected = ext[1]


def _min_root(ig: _IGraph, code: list):
    best = None
    for u in range(len(ig.labels)):
        for v, eid in ig.adj[u]:
            key = (ig.labels[u], ig.labels[v])
            if key[0] > key[1]:
                continue
            if best is None or key < best:
                best = key
    projected = []
    for u in range(len(ig.labels)):
        for v, eid in ig.adj[u]:
            if (ig.labels[u], ig.labels[v]) == best:
                projected.append(_PDFS(0, u, v, eid, None))
    code.append((0, 1, best[0], EDGE_TAG, best[1]))
    return projected


def _min_extend(ig: _IGraph, code: list, projected):
    rmpath = _rmpath(code)
    maxtoc = code[rmpath[0]][1]
    min_label = code[0][2]

    # Backward first: smallest close target wins.
    for i in rmpath[::-1][:-1]:
        target = code[i][0]
        hits = []
        for p in projected:
            hist = _History(p)
            e = _backward_candidate(ig, hist, hist.edges[_pos(rmpath, i, code)],
                                    hist.edges[_pos(rmpath, rmpath[0], code)])
            if e is not None:
                hits.append(_PDFS(p.gid, e[0], e[1], e[2], p))
        if hits:
            return (maxtoc, target, -1, EDGE_TAG, -1), hits

    # Pure forward from the rightmost vertex, then up the rightmost path.
    for anchor, frm_pos in [(rmpath[0], maxtoc)] + [(i, code[i][0])
                                                    for i in rmpath]:
        by_label: dict[int, list] = {}
        for p in projected:
            hist = _History(p)
            if frm_pos == maxtoc and anchor == rmpath[0]:
                cands = _forward_pure(ig, hist, hist.edges[_pos(rmpath, anchor,
                                                                code)],
                                      min_label)
            else:
                cands = _forward_rmpath(ig, hist, hist.edges[_pos(rmpath,
                                                                  anchor,
                                                                  code)],
                                        min_label)
            for e in cands:
                by_label.setdefault(ig.labels[e[1]], []).append(
                    _PDFS(p.gid, e[0], e[1], e[2], p))
        if by_label:
            lab = min(by_label)
            return (frm_pos, maxtoc + 1, -1, EDGE_TAG, lab), by_label[lab]
    return None


def _pos(rmpath, i, code) -> int:
    return i  # history edges align with code order


def _backward_candidate(ig, hist, e1, e2):
    """Close edge from the rightmost vertex back to e1.frm, if canonical."""
    if e1 is e2:
        return None
    for to, eid in ig.adj[e2.to]:
        if eid in hist.has_eid or to != e1.frm:
            continue
        if ig.labels[e1.to] <= ig.labels[e2.to]:
            return (e2.to, to, eid)
    return None


def _forward_pure(ig, hist, rightmost_edge, min_label):
    out = []
    for to, eid in ig.adj[rightmost_edge.to]:
        if ig.labels[to] < min_label or to in hist.has_node:
            continue
        out.append((rightmost_edge.to, to, eid))
    return out


def _forward_rmpath(ig, hist, e, min_label):
    out = []
    for to, eid in ig.adj[e.frm]:
        if to == e.to or ig.labels[to] < min_label or to in hist.has_node:
            continue
        if ig.labels[e.to] <= ig.labels[to]:
            out.append((e.frm, to, eid))
    return out


@dataclass
class GraphPattern:
    """A mined pattern: canonical DFS code plus quality and support counts."""

    code: tuple
    wracc: float
    support: int
    support_pos: int

    def to_graph(self) -> LabeledGraph:
        return code_to_graph(self.code)

    def to_json_obj(self, label_names=None) -> dict:
        g = self.to_graph()
        labels = [label_names[l] if label_names else l for l in g.node_labels]
        return {"nodes": labels, "edges": [[u, v] for u, v, _ in g.edges],
                "wracc": self.wracc, "support": self.support,
                "support_pos": self.support_pos}

    def to_dot(self, label_names=None) -> str:
        g = self.to_graph()
        lines = ["graph pattern {"]
        for v, lab in enumerate(g.node_labels):
            name = label_names[lab] if label_names else str(lab)
            lines.append(f'  n{v} [label="{name}"];')
        for u, v, _ in g.edges:
            lines.append(f"  n{u} -- n{v};")
        lines.append("}")
        return "\n".join(lines)


class _Miner:
    def __init__(self, d: SubgroupDataset, min_sup, max_edges, prune,
                 min_wracc):
        if len(d) == 0:
            raise ValueError("empty subgroup dataset")
        if min_sup < 1 or max_edges < 1:
            raise ValueError("min_sup and max_edges must be >= 1")
        self.graphs = [_IGraph(g) for g in d.instances]
        self.pos = d.positives
        self.n = len(d)
        self.n_pos = d.n_pos
        self.min_sup = min_sup
        self.max_edges = max_edges
        self.prune = prune
        self.min_wracc = min_wracc
        self.best: GraphPattern | None = None
        self.collected: list[GraphPattern] = []

    def run(self):
        roots: dict[tuple[int, int], list[_PDFS]] = {}
        for gid, ig in enumerate(self.graphs):
            for u in range(len(ig.labels)):
                for v, eid in ig.adj[u]:
                    key = (ig.labels[u], ig.labels[v])
                    if key[0] > key[1]:
                        continue
                    roots.setdefault(key, []).append(_PDFS(gid, u, v, eid,
                                                           None))
        for (lu, lv) in sorted(roots):
            code = [(0, 1, lu, EDGE_TAG, lv)]
            self._grow(code, roots[(lu, lv)])
        return self.best, self.collected

    def _counts(self, projected):
        gids = {p.gid for p in projected}
        supp = len(gids)
        supp_pos = sum(1 for gid in gids if self.pos[gid])
        return supp, supp_pos

    def _better(self, cand: GraphPattern) -> bool:
        if self.best is None:
            return True
        a = (-cand.wracc, len(cand.code), cand.code)
        b = (-self.best.wracc, len(self.best.code), self.best.code)
        return a < b

    def _grow(self, code, projected):
        supp, supp_pos = self._counts(projected)
        if supp < self.min_sup:
            return
        if not self._is_min(code):
            return
        q = wracc(supp, supp_pos, self.n, self.n_pos)
        cand = GraphPattern(code=tuple(code), wracc=q, support=supp,
                            support_pos=supp_pos)
        if self._better(cand):
            self.best = cand
        if self.min_wracc is not None and q >= self.min_wracc:
            self.collected.append(cand)
        if len(code) >= self.max_edges:
            return
        if self.prune:
            bound = wracc_bounds(supp, supp_pos, self.n, self.n_pos,
                                 self.min_sup)
            floor = self.best.wracc
            if self.min_wracc is not None:
                floor = min(floor, self.min_wracc)
            if bound < floor:
                return
        rmpath = _rmpath(code)
        maxtoc = code[rmpath[0]][1]
        min_label = code[0][2]
        backward: dict[int, list] = {}
        forward: dict[tuple[int, int], list] = {}
        for p in projected:
            ig = self.graphs[p.gid]
            hist = _History(p)
            for i in rmpath[::-1][:-1]:
                e = _backward_candidate(ig, hist, hist.edges[i],
                                        hist.edges[rmpath[0]])
                if e is not None:
                    backward.setdefault(code[i][0], []).append(
                        _PDFS(p.gid, e[0], e[1], e[2], p))
            for e in _forward_pure(ig, hist, hist.edges[rmpath[0]], min_label):
                forward.setdefault((-maxtoc, ig.labels[e[1]]), []).append(
                    _PDFS(p.gid, e[0], e[1], e[2], p))
            for i in rmpath:
                for e in _forward_rmpath(ig, hist, hist.edges[i], min_label):
                    forward.setdefault((-code[i][0], ig.labels[e[1]]),
                                       []).append(
                        _PDFS(p.gid, e[0], e[1], e[2], p))
        for target in sorted(backward):
            code.append((maxtoc, target, -1, EDGE_TAG, -1))
            self._grow(code, backward[target])
            code.pop()
        for (neg_frm, lab) in sorted(forward):
            code.append((-neg_frm, maxtoc + 1, -1, EDGE_TAG, lab))
            self._grow(code, forward[(neg_frm, lab)])
            code.pop()

    def _is_min(self, code) -> bool:
        if len(code) == 1:
            return True
        full = _expand_code(code)
        return min_dfs_code(code_to_graph(full)) == tuple(full)


def _expand_code(code) -> list:
    """Fill the -1 label placeholders so the code is self-contained."""
    labels: dict[int, int] = {}
    out = []
    for frm, to, lf, tag, lt in code:
        if lf >= 0:
            labels[frm] = lf
        if lt >= 0:
            labels[to] = lt
        out.append((frm, to, labels[frm], tag, labels[to]))
    return out


def mine_top_subgraph(d: SubgroupDataset, min_sup: int = 10,
                      max_edges: int = 6, prune: bool = True,
                      min_wracc: float | None = None):
    """Best pattern by WRAcc (ties: fewer edges, then smaller code), plus all
    patterns above ``min_wracc`` when a floor is given."""
    best, collected = _Miner(d, min_sup, max_edges, prune, min_wracc).run()
    if best is not None:
        best = GraphPattern(code=tuple(_expand_code(list(best.code))),
                            wracc=best.wracc, support=best.support,
                            support_pos=best.support_pos)
        collected = [GraphPattern(code=tuple(_expand_code(list(c.code))),
                                  wracc=c.wracc, support=c.support,
                                  support_pos=c.support_pos)
                     for c in collected]
    return best, collected
