import json
import os
import stat

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpgnn_lab.graph import (
    DatasetFormatError,
    Graph,
    SyntheticConfig,
    add_nodes_with_edges,
    degrees,
    generate_synthetic,
    load_dataset,
    save_dataset,
    top_k_by_degree,
)

from conftest import make_dataset


edge_lists = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]), max_size=40),
    )
)


@given(edge_lists)
def test_from_edges_invariants(case):
    n, edges = case
    g = Graph.from_edges(n, edges)
    g.validate()
    expected = {frozenset(e) for e in edges}
    assert {frozenset(e) for e in g.edge_list().tolist()} == expected
    for u in range(n):
        for v in g.neighbors(u):
            assert u in g.neighbors(v)


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(1, 1)])


def test_validate_catches_asymmetry():
    g = Graph(2, np.array([0, 1, 1]), np.array([1], dtype=np.int32))
    with pytest.raises(ValueError, match="symmetric"):
        g.validate()


def test_degrees(path3, star6):
    assert degrees(path3).tolist() == [1, 2, 1]
    assert degrees(Graph.from_edges(4, [])).tolist() == [0, 0, 0, 0]
    assert degrees(star6).tolist() == [5, 1, 1, 1, 1, 1]


def test_complete_graph():
    g = Graph.complete(5)
    g.validate()
    assert degrees(g).tolist() == [4] * 5
    assert g == Graph.from_edges(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])


def _brute_top_k(g, k):
    deg = degrees(g)
    return sorted(range(g.num_nodes), key=lambda v: (-deg[v], v))[:k]


def test_top_k(path3, star6):
    assert top_k_by_degree(star6, 1) == [0]
    cycle = Graph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    assert top_k_by_degree(cycle, 2) == [0, 1]
    assert top_k_by_degree(path3, 2) == _brute_top_k(path3, 2) == [1, 0]
    with pytest.raises(ValueError):
        top_k_by_degree(path3, 4)


@given(edge_lists)
def test_top_k_full_is_permutation(case):
    n, edges = case
    g = Graph.from_edges(n, edges)
    ranked = top_k_by_degree(g, n)
    assert sorted(ranked) == list(range(n))
    assert ranked == _brute_top_k(g, n)


def test_add_nodes(star6, path3):
    ds = make_dataset(star6)
    out = add_nodes_with_edges(ds, [([1.0, 0.0], 1, [0])])
    out.validate()
    assert degrees(out.graph)[0] == 6
    assert out.num_nodes == 7 and out.train_mask[-1] and not out.val_mask[-1] and not out.test_mask[-1]
    assert add_nodes_with_edges(ds, []) == ds

    ds3 = make_dataset(path3)
    out = add_nodes_with_edges(ds3, [([0.0, 0.0], 0, [1]), ([1.0, 1.0], 1, [1])])
    # recount from the edge list
    assert int(np.sum(out.graph.edge_list() == 1)) == 4 == degrees(out.graph)[1]

    excluded = add_nodes_with_edges(ds3, [([0.0, 0.0], 0, [1])], include_in_train=False)
    assert not excluded.train_mask[-1]


def test_add_nodes_errors(path3):
    ds = make_dataset(path3)
    with pytest.raises(ValueError, match="neighbour"):
        add_nodes_with_edges(ds, [([0.0, 0.0], 0, [3])])
    with pytest.raises(ValueError, match="length"):
        add_nodes_with_edges(ds, [([0.0], 0, [1])])


def test_synthetic_deterministic():
    cfg = SyntheticConfig(num_nodes=120, d=8)
    a, b = generate_synthetic(cfg, 11), generate_synthetic(cfg, 11)
    assert a == b
    assert not a == generate_synthetic(cfg, 12)
    a.validate()


def test_synthetic_two_cliques():
    cfg = SyntheticConfig(num_nodes=30, num_classes=2, d=4, intra_edge_prob=1.0, inter_edge_prob=0.0)
    ds = generate_synthetic(cfg, 3)
    for u, v in ds.graph.edge_list():
        assert ds.labels[u] == ds.labels[v]
    sizes = np.bincount(ds.labels)
    assert degrees(ds.graph).tolist() == [sizes[y] - 1 for y in ds.labels]


def test_synthetic_signal_one():
    cfg = SyntheticConfig(num_nodes=50, num_classes=2, d=6, feature_signal=1.0)
    ds = generate_synthetic(cfg, 0)
    block = np.arange(6) // 3
    own = block[None, :] == ds.labels[:, None]
    assert np.all(ds.features[own] == 1.0)
    assert np.all(ds.features[~own] == 0.0)


def test_synthetic_rejects_indivisible_d():
    with pytest.raises(ValueError, match="divisible"):
        generate_synthetic(SyntheticConfig(d=10, num_classes=4), 0)


def test_round_trip(tmp_path):
    ds = generate_synthetic(SyntheticConfig(num_nodes=60, d=8), 5)
    save_dataset(ds, tmp_path / "syn")
    assert load_dataset(tmp_path / "syn") == ds


@settings(max_examples=25, deadline=None)
@given(edge_lists.filter(lambda c: c[0] >= 3), st.integers(0, 2**32 - 1))
def test_round_trip_property(tmp_path_factory, case, seed):
    n, edges = case
    rng = np.random.default_rng(seed)
    ds = make_dataset(Graph.from_edges(n, edges), d=3, features=rng.uniform(0, 1, (n, 3)), num_classes=3)
    path = tmp_path_factory.mktemp("rt")
    save_dataset(ds, path)
    assert load_dataset(path) == ds


def test_empty_graph_round_trip(tmp_path):
    ds = make_dataset(Graph.from_edges(3, []))
    save_dataset(ds, tmp_path)
    assert (tmp_path / "edges.csv").read_text() == "u,v\n"
    assert load_dataset(tmp_path) == ds


def test_load_minimal_path(tmp_path):
    (tmp_path / "meta.json").write_text(json.dumps({"num_nodes": 3, "d": 1, "num_classes": 2, "alpha": 0, "beta": 1}))
    (tmp_path / "edges.csv").write_text("u,v\n0,1\n1,2\n1,0\n")
    (tmp_path / "features.csv").write_text("0\n1\n0.5\n")
    (tmp_path / "labels.csv").write_text("0\n1\n0\n")
    (tmp_path / "splits.json").write_text(json.dumps({"train": [0], "val": [1], "test": [2]}))
    ds = load_dataset(tmp_path)
    assert degrees(ds.graph).tolist() == [1, 2, 1]


def _write_valid(path):
    ds = make_dataset(Graph.from_edges(3, [(0, 1), (1, 2)]))
    save_dataset(ds, path)


def test_load_feature_out_of_range(tmp_path):
    _write_valid(tmp_path)
    lines = (tmp_path / "features.csv").read_text().splitlines()
    lines[1] = "2.0,0.0"
    (tmp_path / "features.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match=r"features\.csv:2.*row 1") as err:
        load_dataset(tmp_path)
    assert err.value.line == 2


def test_load_label_too_large(tmp_path):
    _write_valid(tmp_path)
    (tmp_path / "labels.csv").write_text("0\n5\n1\n")
    with pytest.raises(DatasetFormatError, match=r"labels\.csv:2"):
        load_dataset(tmp_path)


def test_load_malformed_edge(tmp_path):
    _write_valid(tmp_path)
    (tmp_path / "edges.csv").write_text("u,v\n0,1\n1;2\n")
    with pytest.raises(DatasetFormatError, match=r"edges\.csv:3"):
        load_dataset(tmp_path)


def test_load_missing_file(tmp_path):
    _write_valid(tmp_path)
    os.remove(tmp_path / "splits.json")
    with pytest.raises(DatasetFormatError, match="splits.json: missing file"):
        load_dataset(tmp_path)


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_save_read_only(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(stat.S_IRUSR | stat.S_IXUSR)
    with pytest.raises(OSError):
        save_dataset(make_dataset(Graph.from_edges(3, [])), ro / "x")


def test_save_onto_file_fails(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        save_dataset(make_dataset(Graph.from_edges(3, [])), blocker)
