"""Acceptance gate: worked-example checks plus oracle suites.

Run with ``pytest tests/test_acceptance.py -v -s`` to get one PASS line per
criterion. Every tolerance is pinned here; nothing is calibrated elsewhere.
"""

import numpy as np
import pytest

from actmine.background import fit, ic, update
from actmine.explain import Explanation, fidelity, sparsity
from actmine.gcn import (NODE_SET, ActivationMatrix, GcnModel, Mask, forward,
                         masked_prediction)
from actmine.graphs import GraphDataset, LabeledGraph
from actmine.mining import (MinerParams, SearchNode, description_length,
                            mine_all, mine_best, si_sg, ub_si)
from actmine.numeric import (betweenness_centrality, clustering_coefficients,
                             graph_features, triangle_counts)
from actmine.subgraph import SubgroupDataset, mine_top_subgraph, wracc
from conftest import random_activation
from oracles import (best_closed_rule_bruteforce, betweenness_brute,
                     clustering_brute, connected_subgraphs_upto,
                     si_sg_loops, triangles_brute)
from test_mining import unpack, unpack_p

PARAMS = MinerParams(min_si=0.0)


def ok(msg):
    print(f"ACCEPTANCE PASS: {msg}")


# --- worked-example suite (sub-second) ------------------------------------

def test_worked_example_description_length():
    assert description_length((0, 5), MinerParams()) == pytest.approx(2.2,
                                                                      abs=0.0)
    ok("description length of a 2-component rule at defaults = 2.2")


def test_worked_example_information_content(toy_act, toy_bg_rounded):
    got = ic(toy_bg_rounded, toy_act, (0, 5), toy_act.decisions == 1)
    assert got == pytest.approx(3.13, abs=0.01)
    ok(f"information content of the worked rule = {got:.4f} (3.13 +- 0.01, "
       "base-2 logs)")


def test_worked_example_si_sg(toy_act, toy_bg_rounded):
    got = si_sg(toy_bg_rounded, toy_act, (0, 5), 1, PARAMS)
    assert got == pytest.approx(3.13 / 2.2, abs=0.01)
    neg = ic(toy_bg_rounded, toy_act, (0, 5), toy_act.decisions == 0)
    assert neg == 0.0
    ok(f"contrast score = {got:.4f} (3.13/2.2, zero negative-class term)")


def test_worked_example_support(toy_act):
    bg = fit(toy_act)
    from actmine.background import matching_rows
    rows = matching_rows(toy_act, (0, 5))
    per_graph = {}
    for g, gid in enumerate(toy_act.graph_ids):
        lo, hi = toy_act.seg_starts[g], toy_act.seg_starts[g + 1]
        nodes = np.nonzero(rows[lo:hi])[0]
        if nodes.size:
            per_graph[gid] = [int(v) + 1 for v in nodes]  # 1-based as stated
    assert set(per_graph) == {"G1", "G2"}
    assert per_graph["G1"] == [1, 3]
    assert per_graph["G2"] == [2]
    ok("support of the worked rule = {G1, G2} with nodes G1:1, G1:3, G2:2")


# --- oracle suites ---------------------------------------------------------

def test_maxent_fit_residuals():
    rng = np.random.default_rng(1234)
    done = 0
    while done < 200:
        n = int(rng.integers(2, 51))
        k = int(rng.integers(2, 11))
        bits = (rng.random((n, k)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        rs, cs = bits.sum(1), bits.sum(0)
        if (rs == 0).any() or (rs == k).any() or (cs == 0).any() \
                or (cs == n).any():
            continue
        rows_per = 1
        m = n
        act = ActivationMatrix.from_graph_bits(
            1, [bits[i:i + 1] for i in range(m)],
            [i % 2 for i in range(m)], tuple(f"g{i}" for i in range(m)))
        bg = fit(act)
        p = bg.probabilities
        resid = max(np.abs(p.sum(1) - rs).max(), np.abs(p.sum(0) - cs).max())
        assert resid < 1e-6, f"marginal residual {resid} on {n}x{k}"
        done += 1
    ok("max-entropy fit: 200 random matrices, all marginal residuals < 1e-6")


def _random_instance(rng):
    n_graphs = int(rng.integers(2, 11))
    act = random_activation(rng, n_graphs, 3,
                            int(rng.integers(2, 11)),
                            density=float(rng.uniform(0.2, 0.8)))
    return act


def test_miner_oracle_equivalence_100():
    rng = np.random.default_rng(777)
    checked = 0
    for _ in range(100):
        act = _random_instance(rng)
        bg = fit(act)
        bits, probs = unpack(act), unpack_p(bg, act)
        dec = act.decisions.tolist()
        c = int(rng.integers(0, 2))
        got = mine_best(act, bg, c, PARAMS, 0.0)
        ref = best_closed_rule_bruteforce(bits, probs, dec, c, act.width, 0.0)
        if ref is None:
            assert got is None
        else:
            assert got is not None
            assert got.score == pytest.approx(ref[0], rel=1e-9, abs=1e-12)
            assert got.components == ref[2]
        checked += 1
    assert checked == 100
    ok("miner equals the exhaustive closed-pattern maximum on 100 random "
       "matrices")


def test_ub_soundness_zero_violations():
    rng = np.random.default_rng(4242)
    violations = 0
    for _ in range(40):
        act = _random_instance(rng)
        bg = fit(act)
        bits, probs = unpack(act), unpack_p(bg, act)
        dec = act.decisions.tolist()
        k = act.width
        full = (1 << k) - 1
        for _ in range(5):
            a = int(rng.integers(0, full + 1))
            pot = int(rng.integers(0, full + 1)) & ~a
            while pot.bit_count() > 7:
                pot &= pot - 1
            c = int(rng.integers(0, 2))
            bound = ub_si(SearchNode(a, pot), bg, act, c, PARAMS)
            sub = pot
            while True:
                b = a | sub
                comps = [j for j in range(k) if b >> j & 1]
                if comps:
                    if si_sg_loops(bits, probs, dec, comps, c) > bound + 1e-9:
                        violations += 1
                if sub == 0:
                    break
                sub = (sub - 1) & pot
    assert violations == 0
    ok("upper bound dominates every enumerated descendant (0 violations)")


def test_post_update_nullity():
    rng = np.random.default_rng(31)
    for _ in range(20):
        act = _random_instance(rng)
        bg = fit(act)
        rules = mine_all(act, params=MinerParams(min_si=0.0, nb_patterns=4),
                         target_class=int(rng.integers(0, 2)), bg=bg)
        for r in rules:
            assert si_sg(bg, act, r.components, r.target_class, PARAMS) == 0.0
    ok("every extracted rule re-scores to exactly 0 after the model update")


def _random_subgroup(rng):
    instances, flags = [], []
    for i in range(int(rng.integers(4, 13))):
        n = int(rng.integers(2, 6))
        labels = [int(x) for x in rng.integers(0, 2, n)]
        edges = sorted({(j, j + 1) for j in range(n - 1)}
                       | {(u, v) for u in range(n) for v in range(u + 1, n)
                          if rng.random() < 0.3})
        instances.append(LabeledGraph(f"i{i}", n, tuple(labels),
                                      tuple((u, v, 1.0) for u, v in edges)))
        flags.append(bool(rng.random() < 0.5))
    if not any(flags):
        flags[0] = True
    if all(flags):
        flags[-1] = False
    return SubgroupDataset(instances=instances, positives=flags)


def test_gspan_oracle_equivalence_50():
    rng = np.random.default_rng(555)
    for _ in range(50):
        d = _random_subgroup(rng)
        n, n_pos = len(d), d.n_pos
        per_instance = [connected_subgraphs_upto(i.edges, i.node_labels, 4)
                        for i in d.instances]
        table = {}
        for keys in per_instance:
            for key in keys:
                table.setdefault(key, 0)
        for key in table:
            ids = [i for i, keys in enumerate(per_instance) if key in keys]
            sp = sum(1 for i in ids if d.positives[i])
            table[key] = wracc(len(ids), sp, n, n_pos)
        best_on, _ = mine_top_subgraph(d, min_sup=1, max_edges=4, prune=True)
        best_off, _ = mine_top_subgraph(d, min_sup=1, max_edges=4,
                                        prune=False)
        if not table:
            assert best_on is None and best_off is None
            continue
        top = max(table.values())
        assert best_on is not None
        assert best_on.wracc == pytest.approx(top, abs=1e-12)
        assert best_off.wracc == best_on.wracc
        assert best_off.code == best_on.code
    ok("gSpan top WRAcc equals brute force on 50 datasets; pruning on/off "
       "parity holds")


def test_wracc_bounds_zero_violations():
    from actmine.subgraph import subgraph_isomorphic, wracc_bounds
    rng = np.random.default_rng(99)
    violations = 0
    for _ in range(12):
        d = _random_subgroup(rng)
        n, n_pos = len(d), d.n_pos
        _, collected = mine_top_subgraph(d, min_sup=1, max_edges=3,
                                         min_wracc=-1.0)
        graphs = [(c, c.to_graph()) for c in collected]
        for cp, pg in graphs:
            bound = wracc_bounds(cp.support, cp.support_pos, n, n_pos, 1)
            for cq, qg in graphs:
                if len(cq.code) >= len(cp.code) \
                        and subgraph_isomorphic(pg, qg) \
                        and cq.wracc > bound + 1e-12:
                    violations += 1
    assert violations == 0
    ok("WRAcc bound dominates every enumerated extension (0 violations)")


def test_topological_features_200_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        edges = [p for p in pairs if rng.random() < 0.4]
        g = LabeledGraph("g", n, (0,) * n,
                         tuple((u, v, 1.0) for u, v in edges))
        adj = [set() for _ in range(n)]
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        assert np.allclose(betweenness_centrality(g),
                           betweenness_brute(n, adj), atol=1e-12)
        assert np.array_equal(triangle_counts(g), triangles_brute(n, adj))
        assert np.allclose(clustering_coefficients(g),
                           clustering_brute(n, adj), atol=1e-12)
    ok("degree/betweenness/clustering/triangles match brute force on 200 "
       "graphs")


def test_metric_kernels_exact():
    model = GcnModel(layer_weights=[np.eye(2) * 4.0],
                     readout_w=np.array([[5.0, -5.0], [-5.0, 5.0]]),
                     readout_b=np.zeros(2))
    g1 = LabeledGraph("a", 3, (1, 1, 0), ((0, 1, 1.0), (1, 2, 1.0)))
    g2 = LabeledGraph("b", 3, (0, 0, 1), ((0, 1, 1.0), (1, 2, 1.0)))
    g3 = LabeledGraph("c", 2, (1, 0), ((0, 1, 1.0),))
    ds = GraphDataset(label_alphabet=("x", "y"), graphs=(g1, g2, g3))
    exps = [Explanation(graph_id="a", rule=None, policy="node",
                        mask=Mask(kind=NODE_SET, graph_id="a", nodes=(0,),
                                  edges=((0, 1),))),
            Explanation(graph_id="b", rule=None, policy="node",
                        mask=Mask(kind=NODE_SET, graph_id="b", nodes=(2,))),
            Explanation(graph_id="c", rule=None, policy="node",
                        mask=Mask(kind=NODE_SET, graph_id="c", nodes=(0,),
                                  edges=((0, 1),)))]
    rep = fidelity(model, ds, exps)
    fa = fp = ia = ip = 0.0
    flip = {0: [0, 0], 1: [0, 0]}
    for ex in exps:
        g = {x.graph_id: x for x in ds.graphs}[ex.graph_id]
        res = forward(model, g)
        y = res.decision
        pc, yc = masked_prediction(model, g, ex.mask, "keep-complement")
        pm, ym = masked_prediction(model, g, ex.mask, "keep-mask")
        fa += (yc != y) / 3
        fp += (res.probabilities[y] - pc[y]) / 3
        ia += (ym != y) / 3
        ip += (res.probabilities[y] - pm[y]) / 3
        flip[y][0] += 1
        flip[y][1] += int(yc != y)
    assert rep.fid_acc == pytest.approx(fa, abs=1e-12)
    assert rep.fid_prob == pytest.approx(fp, abs=1e-12)
    assert rep.infid_acc == pytest.approx(ia, abs=1e-12)
    assert rep.infid_prob == pytest.approx(ip, abs=1e-12)
    assert rep.flip_0_to_1 == pytest.approx(flip[0][1] / flip[0][0], abs=1e-12)
    assert rep.flip_1_to_0 == pytest.approx(flip[1][1] / flip[1][0], abs=1e-12)
    spars = sum(1 - (len(e.mask.nodes) + len(e.mask.edges))
                / (g.node_count + len(g.edges))
                for e, g in zip(exps, ds.graphs)) / 3
    assert rep.sparsity == pytest.approx(spars, abs=1e-12)

    # identity masks: zero fidelity deltas, exactly
    empty = [Explanation(graph_id=g.graph_id, rule=None, policy="node",
                         mask=Mask(kind=NODE_SET, graph_id=g.graph_id))
             for g in ds.graphs]
    rep0 = fidelity(model, ds, empty)
    assert rep0.fid_acc == 0.0
    assert rep0.fid_prob == 0.0
    assert rep0.sparsity == 1.0
    ok("metric kernels match the independent recomputation at 1e-12; "
       "identity-mask zero cases are exact")
