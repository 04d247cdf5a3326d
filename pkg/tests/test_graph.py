import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paramdf.graph import (
    HOP_INF, Dataset, DatasetFormatError, Graph, adjacency, connected_components, cycle_graph,
    dataset_from_json, dataset_to_json, degree_matrix, hop_distances, kfold_indices, load_json,
    load_tudataset, mean_degree, path_graph, random_graph, save_json, split_indices, synth_dataset,
)


def write_tu(tmp_path, name, a_lines, indicator, labels, node_labels=None):
    (tmp_path / f"{name}_A.txt").write_text("".join(f"{u}, {v}\n" for u, v in a_lines))
    (tmp_path / f"{name}_graph_indicator.txt").write_text("".join(f"{i}\n" for i in indicator))
    (tmp_path / f"{name}_graph_labels.txt").write_text("".join(f"{c}\n" for c in labels))
    if node_labels is not None:
        (tmp_path / f"{name}_node_labels.txt").write_text("".join(f"{c}\n" for c in node_labels))


class TestGraph:
    def test_rejects_bad_endpoints(self):
        with pytest.raises(ValueError):
            Graph(2, ((0, 2, 1.0),))

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Graph(2, ((1, 1, 1.0),))

    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            Graph(2, ((0, 1, -1.0),))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Graph(0, ())

    def test_edges_are_canonical(self):
        g = Graph(3, ((2, 1, 1.0), (1, 0, 2.0)))
        assert g.edges == ((0, 1, 2.0), (1, 2, 1.0))

    def test_permute_conjugates_adjacency(self, rng):
        g = random_graph(rng, 7, 0.4, weighted=True)
        perm = rng.permutation(7)
        a = adjacency(g)
        assert np.array_equal(adjacency(g.permute(perm)), a[np.ix_(perm, perm)])


class TestMatrices:
    def test_single_node(self, single):
        assert np.array_equal(adjacency(single), np.zeros((1, 1)))

    def test_p2(self, p2):
        assert np.array_equal(adjacency(p2), [[0, 1], [1, 0]])

    def test_p3(self, p3):
        assert np.array_equal(adjacency(p3), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])

    def test_degrees(self, p2, single):
        a = adjacency(p2)
        assert np.array_equal(degree_matrix(a, False), [1, 1])
        assert np.array_equal(degree_matrix(a, True), [2, 2])
        assert np.array_equal(degree_matrix(adjacency(single), True), [1])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.floats(0.0, 1.0), st.integers(0, 2**31))
    def test_adjacency_symmetric_nonnegative(self, n, p, seed):
        g = random_graph(np.random.default_rng(seed), n, p, connected=False, weighted=True)
        a = adjacency(g)
        assert np.array_equal(a, a.T)
        assert (a >= 0).all() and np.all(np.diag(a) == 0)


class TestHops:
    def test_p3(self, p3):
        assert np.array_equal(hop_distances(p3, 2), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])

    def test_disconnected(self):
        d = hop_distances(Graph(2, ()), 3)
        assert d[0, 0] == 0 and d[0, 1] == HOP_INF and d[1, 0] == HOP_INF

    def test_single(self, single):
        assert np.array_equal(hop_distances(single, 1), [[0]])

    def test_beyond_radius_is_infinite(self):
        d = hop_distances(path_graph(5), 2)
        assert d[0, 2] == 2 and d[0, 3] == HOP_INF

    def test_components(self):
        g = Graph(5, ((0, 1, 1.0), (3, 4, 1.0)))
        comp = connected_components(g)
        assert comp[0] == comp[1] and comp[3] == comp[4]
        assert len({comp[0], comp[2], comp[3]}) == 3


class TestTUDataset:
    def test_duplicate_directed_pair(self, tmp_path):
        write_tu(tmp_path, "T", [(1, 2), (2, 1)], [1, 1], [1])
        ds = load_tudataset(str(tmp_path), "T")
        assert len(ds) == 1
        g = ds.graphs[0]
        assert g.n == 2 and g.num_edges == 1
        assert ds.targets.tolist() == [0]

    def test_label_remap_sorted(self, tmp_path):
        write_tu(tmp_path, "T", [], [1, 2], [1, -1])
        ds = load_tudataset(str(tmp_path), "T")
        assert ds.targets.tolist() == [1, 0]
        assert ds.num_classes == 2

    def test_empty_edges(self, tmp_path):
        write_tu(tmp_path, "T", [], [1], [3])
        ds = load_tudataset(str(tmp_path), "T")
        assert ds.graphs[0].n == 1 and ds.graphs[0].num_edges == 0

    def test_node_labels_and_offsets(self, tmp_path):
        write_tu(tmp_path, "T", [(1, 2), (3, 4), (4, 5)], [1, 1, 2, 2, 2], [0, 1], node_labels=[5, 6, 5, 5, 7])
        ds = load_tudataset(str(tmp_path), "T")
        assert [g.n for g in ds.graphs] == [2, 3]
        assert ds.graphs[1].edges == ((0, 1, 1.0), (1, 2, 1.0))
        assert ds.graphs[1].node_labels.tolist() == [5, 5, 7]

    def test_malformed_line(self, tmp_path):
        write_tu(tmp_path, "T", [], [1], [0])
        (tmp_path / "T_A.txt").write_text("1, x\n")
        with pytest.raises(DatasetFormatError, match=r"T_A\.txt:1:"):
            load_tudataset(str(tmp_path), "T")

    def test_label_count_mismatch(self, tmp_path):
        write_tu(tmp_path, "T", [], [1, 2], [0])
        with pytest.raises(DatasetFormatError):
            load_tudataset(str(tmp_path), "T")


class TestJson:
    def test_round_trip(self, tmp_path):
        ds = synth_dataset("degree_regression", 5, (3, 6), seed=1)
        path = tmp_path / "ds.json"
        save_json(ds, str(path))
        back = load_json(str(path))
        assert json.dumps(dataset_to_json(back)) == json.dumps(dataset_to_json(ds))

    def test_features_round_trip(self):
        g = Graph(2, ((0, 1, 0.5),), node_features=np.array([[1.0, 2.0], [3.0, 4.0]]))
        ds = Dataset([g], np.array([1.5]), task="regression")
        back = dataset_from_json(dataset_to_json(ds))
        assert np.array_equal(back.graphs[0].node_features, g.node_features)
        assert back.graphs[0].edges == g.edges

    def test_missing_field(self):
        with pytest.raises(DatasetFormatError):
            dataset_from_json({"task": "regression", "graphs": [{"edges": [], "target": 0}]})


class TestSynth:
    def test_deterministic(self):
        a = synth_dataset("cycle_vs_path", 4, (4, 6), seed=7)
        b = synth_dataset("cycle_vs_path", 4, (4, 6), seed=7)
        assert json.dumps(dataset_to_json(a)) == json.dumps(dataset_to_json(b))

    def test_degree_targets(self):
        assert mean_degree(cycle_graph(4)) == 2.0
        assert mean_degree(path_graph(2)) == 1.0
        ds = synth_dataset("degree_regression", 6, (3, 7), seed=2)
        assert [mean_degree(g) for g in ds.graphs] == ds.targets.tolist()

    def test_cycle_vs_path_labels(self):
        ds = synth_dataset("cycle_vs_path", 6, (4, 6), seed=0)
        for g, y in zip(ds.graphs, ds.targets):
            degrees = degree_matrix(adjacency(g))
            assert (y == 1) == bool(np.all(degrees == 2))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            synth_dataset("nope", 3, (3, 4), seed=0)


class TestSplits:
    def test_fractions_disjoint_cover(self):
        s = split_indices(10, (0.6, 0.2, 0.2), seed=0)
        all_idx = s["train"] + s["val"] + s["test"]
        assert sorted(all_idx) == list(range(10))
        assert len(s["train"]) == 6

    def test_kfold_partition(self):
        tests = [kfold_indices(10, 5, f, seed=1)["test"] for f in range(5)]
        assert sorted(i for t in tests for i in t) == list(range(10))
