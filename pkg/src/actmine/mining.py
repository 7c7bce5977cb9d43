"""Activation-rule scoring and the iterative branch-and-bound extraction engine.

A rule is a set of embedding components plus a target model decision. Its
quality is the class-weighted difference of subjective interest between the
two decision classes: surprisal of the rule under the background model (per
supporting graph, the best matching node), divided by a description length
that grows with the number of components.

``mine_best`` runs a depth-first include/exclude enumeration over components
in ascending order. At every search node the candidate set is closed by
intersecting all class-``c`` rows that match it; a closure that pulls in a
previously excluded component proves the branch redundant and kills it.
Subtrees are abandoned when an upper bound on the score of every descendant
falls below the best score found so far (or the caller's floor).

``mine_all`` repeats ``mine_best``, absorbing each extracted rule into the
background model so that re-finding it is worthless, until the requested
number of rules is reached or nothing clears the floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .background import BackgroundModel, fit, ic, matching_rows, update
from .gcn import ActivationMatrix


@dataclass
class MinerParams:
    alpha: float = 0.6          # per-component description cost
    beta: float = 1.0           # fixed description cost
    min_si: float = 10.0        # floor on the rule score
    nb_patterns: int = 10       # rules per (layer, class)
    max_visits: int = 100_000_000  # search-node safety valve

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.min_si < 0:
            raise ValueError("min_si must be >= 0")


@dataclass
class ActivationRule:
    """An extracted rule with its score and support at extraction time."""

    layer: int
    target_class: int
    components: tuple[int, ...]          # 0-based component indices
    score: float
    support_pos: tuple[str, ...]         # supporting graphs with the target class
    support_neg: tuple[str, ...]         # supporting graphs with the other class
    activating_nodes: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "layer": self.layer,
            "class": self.target_class,
            "components": list(self.components),
            "si_sg": self.score,
            "support_pos": list(self.support_pos),
            "support_neg": list(self.support_neg),
            "activating_nodes": {g: list(v)
                                 for g, v in self.activating_nodes.items()},
        }


def save_rules(rules, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json_obj() for r in rules], fh, indent=1)
        fh.write("\n")


def load_rules(path) -> list[ActivationRule]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [ActivationRule(
        layer=int(o["layer"]), target_class=int(o["class"]),
        components=tuple(o["components"]), score=float(o["si_sg"]),
        support_pos=tuple(o["support_pos"]),
        support_neg=tuple(o["support_neg"]),
        activating_nodes={g: tuple(v)
                          for g, v in o["activating_nodes"].items()},
    ) for o in doc]


def description_length(components, params: MinerParams) -> float:
    """alpha * number of components + beta."""
    return params.alpha * len(tuple(components)) + params.beta


def class_weights(act: ActivationMatrix) -> tuple[float, float]:
    """Per-class weights that damp the majority class; errors on a missing class."""
    n1 = int(act.decisions.sum())
    n0 = act.n_graphs - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("both decision classes must be present")
    return max(1.0, n1 / n0), max(1.0, n0 / n1)


def subjective_interest(bg: BackgroundModel, act: ActivationMatrix,
                        components, graph_mask, params: MinerParams) -> float:
    return ic(bg, act, components, graph_mask) / description_length(components, params)


def si_sg(bg: BackgroundModel, act: ActivationMatrix, components,
          target_class: int, params: MinerParams) -> float:
    """Class-weighted difference of subjective interest between the classes."""
    w0, w1 = class_weights(act)
    wc = w1 if target_class == 1 else w0
    wn = w0 if target_class == 1 else w1
    own = act.decisions == target_class
    other = ~own
    return (wc * subjective_interest(bg, act, components, own, params)
            - wn * subjective_interest(bg, act, components, other, params))


@dataclass
class SearchNode:
    """Enumeration state: included components and the still-available ones."""

    components_mask: int
    pot_mask: int

    def __post_init__(self):
        if self.components_mask & self.pot_mask:
            raise ValueError("included and potential components must be disjoint")


class _Session:
    """Precomputed arrays shared by every search node of one mine_best call."""

    def __init__(self, act: ActivationMatrix, bg: BackgroundModel,
                 target_class: int, params: MinerParams):
        self.act = act
        self.params = params
        self.c = target_class
        self.k = act.width
        self.full = (1 << self.k) - 1
        self.packed = _kernels.pack_rows(act.bits)
        self.nlp = np.ascontiguousarray(bg.neglog2())
        self.own = act.decisions == target_class
        self.other = ~self.own
        w0, w1 = class_weights(act)
        self.wc = w1 if target_class == 1 else w0
        self.wn = w0 if target_class == 1 else w1

    def stats(self, mask_a: int, mask_u: int):
        return _kernels.node_stats(self.packed, self.act.seg_starts, self.nlp,
                                   np.uint64(mask_a), np.uint64(mask_u))

    def closure_of(self, mask_a: int, match_a, and_a) -> int:
        sel = and_a[match_a & self.own]
        if sel.size == 0:
            return self.full
        out = self.full
        for word in sel:
            out &= int(word)
            if out == mask_a:
                break
        return out


def closure(node: SearchNode, act: ActivationMatrix, bg: BackgroundModel,
            target_class: int, params: MinerParams) -> tuple[SearchNode, bool]:
    """Close a search node over its class-``c`` matching rows.

    Returns the closed node and a validity flag; invalid means the closure
    pulled in a component that an earlier branch excluded, so this subtree
    would only re-enumerate patterns owned by that branch.
    """
    ses = _Session(act, bg, target_class, params)
    match_a, _, and_a, _, _, _ = ses.stats(node.components_mask,
                                           node.components_mask | node.pot_mask)
    closed = ses.closure_of(node.components_mask, match_a, and_a)
    valid = (closed & ~(node.components_mask | node.pot_mask)) == 0
    return SearchNode(components_mask=closed,
                      pot_mask=node.pot_mask & ~closed), valid


def ub_si(node: SearchNode, bg: BackgroundModel, act: ActivationMatrix,
          target_class: int, params: MinerParams) -> float:
    """Upper bound on the score of every pattern reachable below ``node``."""
    ses = _Session(act, bg, target_class, params)
    return _ub(ses, node.components_mask, node.components_mask | node.pot_mask,
               *ses.stats(node.components_mask,
                          node.components_mask | node.pot_mask))


def _ub(ses: _Session, a: int, u: int, match_a, match_u, and_a,
        best_a_a, best_a_u, best_u_a) -> float:
    p = ses.params
    gamma = float(best_a_u[match_a & ses.own].sum())
    eps = float(best_u_a[match_u & ses.other].sum())
    return (ses.wc * gamma / (p.alpha * a.bit_count() + p.beta)
            - ses.wn * eps / (p.alpha * u.bit_count() + p.beta))


def _leaf_score(ses: _Session, a: int, match_a, best_a_a) -> float:
    p = ses.params
    dl = p.alpha * a.bit_count() + p.beta
    ic_own = float(best_a_a[match_a & ses.own].sum())
    ic_other = float(best_a_a[match_a & ses.other].sum())
    return ses.wc * ic_own / dl - ses.wn * ic_other / dl


def _lex_key(mask: int, k: int) -> tuple[int, ...]:
    """Bit-vector read in component order; tuple comparison gives lex order."""
    return tuple((mask >> j) & 1 for j in range(k))


def mine_best(act: ActivationMatrix, bg: BackgroundModel, target_class: int,
              params: MinerParams, min_si: float | None = None,
              stats: dict | None = None):
    """Best closed rule for one class, or None if nothing clears the floor.

    The floor starts at ``min_si`` (default ``params.min_si``) and rises to
    each new best score; exact ties go to the lexicographically smallest bit
    vector. ``stats`` (when given) receives the visited-node count and a
    truncation flag.
    """
    if min_si is None:
        min_si = params.min_si
    ses = _Session(act, bg, target_class, params)
    best_mask: int | None = None
    best_score = -math.inf
    visited = 0
    truncated = False

    def visit(a: int, pot: int):
        nonlocal best_mask, best_score, visited, truncated
        if truncated or visited >= params.max_visits:
            truncated = True
            return
        visited += 1
        u = a | pot
        st = ses.stats(a, u)
        match_a, match_u, and_a, best_a_a, best_a_u, best_u_a = st
        closed = ses.closure_of(a, match_a, and_a)
        if closed & ~u:
            return  # closure re-adds an excluded component
        if closed != a:
            pot &= ~closed
            a = closed
            u = a | pot
            st = ses.stats(a, u)
            match_a, match_u, and_a, best_a_a, best_a_u, best_u_a = st
        if pot == 0:
            if a == 0:
                return
            score = _leaf_score(ses, a, match_a, best_a_a)
            floor = best_score if best_mask is not None else min_si
            if score > floor or (best_mask is not None and score == best_score
                                 and _lex_key(a, ses.k) < _lex_key(best_mask, ses.k)):
                best_mask, best_score = a, score
            return
        bound = _ub(ses, a, u, *st)
        if bound < max(min_si, best_score):
            return
        x = pot & -pot  # lowest still-available component
        visit(a | x, pot & ~x)
        visit(a, pot & ~x)

    visit(0, ses.full)
    if stats is not None:
        stats["visited"] = visited
        stats["truncated"] = truncated
    if truncated:
        import warnings
        warnings.warn(f"search truncated after {visited} nodes; "
                      "result may be suboptimal", RuntimeWarning)
    if best_mask is None:
        return None
    return _finalize_rule(ses, best_mask, best_score)


def _finalize_rule(ses: _Session, mask: int, score: float) -> ActivationRule:
    act = ses.act
    comps = tuple(_kernels.mask_bits(mask, ses.k))
    rows = matching_rows(act, comps)
    activating: dict[str, tuple[int, ...]] = {}
    sup_pos, sup_neg = [], []
    for g, gid in enumerate(act.graph_ids):
        lo, hi = act.seg_starts[g], act.seg_starts[g + 1]
        nodes = np.nonzero(rows[lo:hi])[0]
        if nodes.size == 0:
            continue
        activating[gid] = tuple(int(v) for v in nodes)
        if act.decisions[g] == ses.c:
            sup_pos.append(gid)
        else:
            sup_neg.append(gid)
    return ActivationRule(layer=act.layer, target_class=ses.c,
                          components=comps, score=score,
                          support_pos=tuple(sup_pos),
                          support_neg=tuple(sup_neg),
                          activating_nodes=activating)


def mine_all(act: ActivationMatrix, ds=None, params: MinerParams | None = None,
             target_class: int = 1, bg: BackgroundModel | None = None,
             log: list | None = None) -> list[ActivationRule]:
    """Iteratively extract up to ``params.nb_patterns`` rules for one class.

    A fresh background model is fitted unless one is passed in; after each
    extraction the model absorbs the rule, so rule i+1 can never beat rule i
    as scored at its own extraction state. ``log`` (when given) collects one
    dict per iteration with the score and visit count.
    """
    params = params or MinerParams()
    if ds is not None and len(ds) != act.n_graphs:
        raise ValueError("dataset and activation matrix disagree on graph count")
    if bg is None:
        bg = fit(act)
    rules: list[ActivationRule] = []
    while len(rules) < params.nb_patterns:
        st: dict = {}
        rule = mine_best(act, bg, target_class, params, params.min_si, stats=st)
        if rule is None:
            break
        rules.append(rule)
        update(bg, rule.components, act)
        if log is not None:
            log.append({"class": target_class, "layer": act.layer,
                        "si_sg": rule.score, "visited": st.get("visited"),
                        "components": list(rule.components)})
    return rules
