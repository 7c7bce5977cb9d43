import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from actmine.graphs import (DatasetFormatError, LabeledGraph, ego_graph,
                            geodesic_distances, load_dataset, save_dataset,
                            UNREACHABLE)


def path_graph(n, gid="p"):
    return LabeledGraph(graph_id=gid, node_count=n,
                        node_labels=(0,) * n,
                        edges=tuple((i, i + 1, 1.0) for i in range(n - 1)))


def test_load_toy(toy_dataset):
    assert len(toy_dataset) == 4
    assert toy_dataset.decisions == (1, 1, 0, 0)
    assert [g.node_count for g in toy_dataset.graphs] == [5, 5, 5, 6]
    assert toy_dataset.node_total() == 21


def test_empty_dataset(tmp_path):
    f = tmp_path / "empty.json"
    f.write_text('{"labels": ["X"], "graphs": []}')
    ds = load_dataset(f)
    assert len(ds) == 0


def test_self_loop_rejected(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({
        "labels": ["X"],
        "graphs": [{"id": "g", "n": 2, "node_labels": [0, 0],
                    "edges": [[0, 0]]}]}))
    with pytest.raises(DatasetFormatError, match="g"):
        load_dataset(f)


def test_duplicate_edge_rejected():
    with pytest.raises(DatasetFormatError, match="duplicate"):
        LabeledGraph("g", 3, (0, 0, 0), ((0, 1, 1.0), (1, 0, 1.0)))


def test_bad_label_rejected(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({
        "labels": ["X"],
        "graphs": [{"id": "g", "n": 1, "node_labels": [3], "edges": []}]}))
    with pytest.raises(DatasetFormatError, match="label"):
        load_dataset(f)


def test_default_weight_and_negative_weight():
    g = LabeledGraph("g", 2, (0, 0), ((0, 1),))
    assert g.edges == ((0, 1, 1.0),)
    with pytest.raises(DatasetFormatError, match="weight"):
        LabeledGraph("g", 2, (0, 0), ((0, 1, -2.0),))


def test_geodesic_path():
    g = path_graph(3)
    assert geodesic_distances(g, 0) == [0.0, 1.0, 2.0]
    assert geodesic_distances(g, 0)[0] == 0.0


def test_geodesic_disconnected():
    g = LabeledGraph("g", 2, (0, 0), ())
    d = geodesic_distances(g, 0)
    assert d[1] == UNREACHABLE and math.isinf(d[1])


def test_ego_radius_zero():
    g = path_graph(4)
    eg = ego_graph(g, 2, 0)
    assert eg.graph.node_count == 1
    assert eg.graph.edges == ()
    assert eg.node_map == (2,)


def test_ego_path_center():
    g = path_graph(3)
    eg = ego_graph(g, 1, 1)
    assert eg.graph.node_count == 3
    assert len(eg.graph.edges) == 2


def test_ego_five_cycle_radius_two():
    g = LabeledGraph("c5", 5, (0,) * 5,
                     tuple((i, (i + 1) % 5, 1.0) for i in range(5)))
    for v in range(5):
        eg = ego_graph(g, v, 2)
        # brute-force BFS oracle: every node is within 2 hops on a 5-cycle
        assert eg.graph.node_count == 5
        assert len(eg.graph.edges) == 5


def test_ego_matches_distance_filter():
    g = LabeledGraph("g", 6, (0,) * 6,
                     ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0),
                      (1, 4, 1.0)))
    dist = geodesic_distances(g, 0)
    for r in range(4):
        eg = ego_graph(g, 0, r)
        assert sorted(eg.node_map) == [u for u in range(6) if dist[u] <= r]


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_roundtrip(tmp_path_factory, data):
    n_graphs = data.draw(st.integers(0, 4))
    graphs = []
    for i in range(n_graphs):
        n = data.draw(st.integers(1, 6))
        possible = [(u, v) for u in range(n) for v in range(u + 1, n)]
        chosen = data.draw(st.lists(st.sampled_from(possible),
                                    unique=True, max_size=len(possible))
                           ) if possible else []
        labels = tuple(data.draw(st.integers(0, 1)) for _ in range(n))
        graphs.append({"id": f"g{i}", "n": n, "node_labels": list(labels),
                       "edges": [list(e) for e in chosen]})
    doc = {"labels": ["a", "b"], "graphs": graphs}
    tmp = tmp_path_factory.mktemp("rt")
    f1, f2 = tmp / "a.json", tmp / "b.json"
    f1.write_text(json.dumps(doc))
    ds = load_dataset(f1)
    save_dataset(ds, f2)
    ds2 = load_dataset(f2)
    assert len(ds) == len(ds2)
    for a, b in zip(ds.graphs, ds2.graphs):
        assert a.graph_id == b.graph_id
        assert a.node_labels == b.node_labels
        assert a.edges == b.edges
