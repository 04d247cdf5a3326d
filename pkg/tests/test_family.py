import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paramdf.family import (
    FamilySpec, build_base, build_family, commutator_norm, lap_spec, matrix_power, parse_sparsity,
    preset_operator,
)
from paramdf.graph import Graph, adjacency, cycle_graph, hop_distances, path_graph, random_graph


class TestFamilySpec:
    @pytest.mark.parametrize("entries", [(), ((0.1, 1),), ((-0.6, 1),), ((0.0, -1),), ((0.0, 1), (0.0, 1))])
    def test_invalid(self, entries):
        with pytest.raises(ValueError):
            FamilySpec(entries)

    def test_bad_hops(self):
        with pytest.raises(ValueError):
            FamilySpec(((0.0, 1),), hops=0)

    def test_parse_round_trip(self):
        spec = FamilySpec.parse([[0, 1], [-0.5, 2]], "hop:3")
        assert spec.hops == 3 and spec.entries == ((0.0, 1), (-0.5, 2))
        assert FamilySpec.parse(**spec.to_config()) == spec

    def test_parse_sparsity(self):
        assert parse_sparsity("dense") is None
        assert parse_sparsity("hop:2") == 2
        with pytest.raises(ValueError):
            parse_sparsity("sparse")


class TestBase:
    def test_p2_eps0(self, p2):
        assert np.allclose(build_base(p2, 0.0), [[1, 1], [1, 1]], atol=0)

    def test_p2_half(self, p2):
        assert np.allclose(build_base(p2, -0.5), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    @pytest.mark.parametrize("eps", [0.0, -0.2, -0.5])
    def test_single(self, single, eps):
        assert np.array_equal(build_base(single, eps), [[1.0]])

    def test_out_of_range(self, p2):
        with pytest.raises(ValueError):
            build_base(p2, 0.5)


class TestBuildFamily:
    def test_zeroth_power_identity(self, rng):
        g = random_graph(rng, 6, 0.5)
        fam = build_family(g, FamilySpec(((-0.5, 0),)))
        assert np.array_equal(fam.matrices[0], np.eye(6))

    def test_p2_idempotent(self, p2):
        fam = build_family(p2, FamilySpec(((-0.5, 2),)))
        assert np.allclose(fam.matrices[0], 0.5, atol=1e-15)

    def test_p3_hop_mask(self, p3):
        fam = build_family(p3, FamilySpec(((0.0, 2),), hops=1))
        a_t = adjacency(p3) + np.eye(3)
        expected = a_t @ a_t
        expected[0, 2] = expected[2, 0] = 0.0
        assert np.array_equal(fam.matrices[0], expected)

    def test_order_and_tags(self, p3):
        spec = FamilySpec(((-0.5, 2), (0.0, 1)))
        fam = build_family(p3, spec)
        assert fam.tags == spec.entries
        assert np.allclose(fam.matrices[1], adjacency(p3) + np.eye(3))

    def test_dense_support_is_component(self):
        g = Graph(4, ((0, 1, 1.0), (2, 3, 1.0)))
        fam = build_family(g, FamilySpec(((0.0, 3),)))
        assert fam.support[0, 1] and not fam.support[0, 2]
        assert np.all(fam.matrices[0][~fam.support] == 0)

    def test_read_only(self, p2):
        fam = build_family(p2, FamilySpec(((0.0, 1),)))
        with pytest.raises(ValueError):
            fam.matrices[0, 0, 0] = 3.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 2**31), st.sampled_from([None, 1, 2, 3]))
    def test_members_symmetric_and_masked(self, n, seed, hops):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n, 0.3, connected=False, weighted=True)
        spec = FamilySpec(((0.0, 1), (-0.25, 2), (-0.5, 3)), hops)
        fam = build_family(g, spec)
        for m in fam.matrices:
            assert np.array_equal(m, m.T)
        if hops is not None:
            far = hop_distances(g, hops) > hops
            assert np.all(fam.matrices[:, far] == 0)

    def test_matrix_power_matches_numpy(self, rng):
        s = build_base(random_graph(rng, 6, 0.5, weighted=True), -0.3)
        assert np.allclose(matrix_power(s, 4), np.linalg.matrix_power(s, 4), rtol=1e-13, atol=1e-15)


class TestPresets:
    def test_p2(self, p2):
        assert np.array_equal(preset_operator(p2, "laplacian"), [[1, -1], [-1, 1]])
        assert np.allclose(preset_operator(p2, "norm_laplacian_selfloop"), [[0.5, -0.5], [-0.5, 0.5]])

    def test_single(self, single):
        assert np.array_equal(preset_operator(single, "laplacian"), [[0.0]])

    def test_unknown(self, p2):
        with pytest.raises(ValueError):
            preset_operator(p2, "random_walk")

    def test_lap_spec(self):
        assert lap_spec(3).entries == ((-0.5, 1), (-0.5, 2), (-0.5, 3))


class TestCommutators:
    def test_same_base_powers_commute(self, rng):
        g = random_graph(rng, 8, 0.4, weighted=True)
        a, b = build_family(g, FamilySpec(((-0.3, 1), (-0.3, 2)))).matrices
        assert commutator_norm(a, b) <= 1e-12

    def test_regular_graph_commutes(self):
        a, b = build_family(cycle_graph(4), FamilySpec(((0.0, 1), (-0.5, 1)))).matrices
        assert commutator_norm(a, b) <= 1e-10

    def test_p3_value(self):
        # four entries of magnitude 1/6 in the commutator
        a, b = build_family(path_graph(3), FamilySpec(((0.0, 1), (-0.5, 1)))).matrices
        c = a @ b - b @ a
        assert np.allclose(np.abs(c[[0, 1, 1, 2], [1, 0, 2, 1]]), 1 / 6, atol=1e-15)
        assert commutator_norm(a, b) == pytest.approx(1 / 3, rel=1e-12)
