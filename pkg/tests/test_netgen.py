import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterlqr.errors import ArgumentError, GenerationError
from clusterlqr.netgen import (
    ClusterPartition,
    Graph,
    LtiSystem,
    consensus_mode,
    consensus_system,
    generate_clustered_consensus,
    is_almost_equitable,
    pbh_checks,
)

from conftest import consensus_instance


def two_node_graph():
    return Graph(n_nodes=2, edge_weights={(0, 1): 1.0}, node_weights=np.ones(2))


class TestGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ArgumentError):
            Graph(n_nodes=2, edge_weights={(0, 0): 1.0, (0, 1): 1.0}, node_weights=np.ones(2))

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ArgumentError):
            Graph(n_nodes=2, edge_weights={(0, 1): -1.0}, node_weights=np.ones(2))

    def test_rejects_disconnected(self):
        with pytest.raises(ArgumentError):
            Graph(n_nodes=3, edge_weights={(0, 1): 1.0}, node_weights=np.ones(3))

    def test_duplicate_edge_both_orientations(self):
        with pytest.raises(ArgumentError):
            Graph(n_nodes=2, edge_weights={(0, 1): 1.0, (1, 0): 2.0}, node_weights=np.ones(2))

    def test_laplacian_row_sums_zero(self):
        graph, _ = consensus_instance(10, seed=3)
        L = graph.laplacian()
        assert np.abs(L.sum(axis=1)).max() < 1e-12


class TestConsensusSystem:
    def test_two_node_unit_system(self):
        sys_ = consensus_system(two_node_graph())
        assert np.allclose(sys_.A, [[-1.0, 1.0], [1.0, -1.0]])
        assert np.allclose(np.sort(np.linalg.eigvalsh(sys_.A)), [-2.0, 0.0])
        assert np.allclose(consensus_mode(two_node_graph()), np.ones(2) / np.sqrt(2))

    def test_generated_null_mode(self):
        graph, sys_ = consensus_instance(10, seed=7)
        vbar = consensus_mode(graph)
        assert np.linalg.norm(sys_.A @ vbar) <= 1e-12 * max(1.0, np.linalg.norm(sys_.A))

    def test_negative_semidefinite_single_zero(self):
        for seed in range(4):
            graph, sys_ = consensus_instance(24, seed=seed)
            vals = np.linalg.eigvalsh(sys_.A)
            scale = abs(vals).max()
            assert vals.max() <= 1e-10 * scale
            assert (np.abs(vals) <= 1e-10 * scale).sum() == 1

    def test_benchmark_family_shape(self):
        graph, sys_ = generate_clustered_consensus(
            500, 6, 0.5, 100.0, seed=0, b_d_columns=[364]
        )
        assert sys_.n == 500 and sys_.m == 500 and sys_.n_b == 1
        assert np.allclose(sys_.B, np.eye(500))
        assert sys_.B_d[363, 0] == 1.0 and sys_.B_d.sum() == 1.0
        # intra edges dominate inter edges roughly by the requested proportion
        labels = np.zeros(500, dtype=int)
        for g, idx in enumerate(np.array_split(np.arange(500), 6)):
            labels[idx] = g
        intra = sum(1 for (i, j) in graph.edge_weights if labels[i] == labels[j])
        inter = len(graph.edge_weights) - intra
        assert intra > 10 * inter

    def test_bd_column_out_of_range(self):
        with pytest.raises(ArgumentError):
            consensus_system(two_node_graph(), b_d_columns=[3])

    def test_generator_argument_errors(self):
        with pytest.raises(ArgumentError):
            generate_clustered_consensus(4, 5, 0.5, 10.0)
        with pytest.raises(ArgumentError):
            generate_clustered_consensus(4, 2, 0.0, 10.0)
        with pytest.raises(ArgumentError):
            generate_clustered_consensus(4, 2, 0.5, 0.5)
        with pytest.raises(ArgumentError):
            generate_clustered_consensus(4, 2, 0.5, 10.0, weight_range=(0.0, 1.0))

    def test_generation_failure_when_never_connected(self):
        # 40 nodes at edge probability 1e-6 is essentially always disconnected
        with pytest.raises(GenerationError):
            generate_clustered_consensus(40, 1, 1e-6, 1.0, seed=0)

    def test_determinism(self):
        g1, s1 = consensus_instance(20, seed=5)
        g2, s2 = consensus_instance(20, seed=5)
        assert g1.edge_weights == g2.edge_weights
        assert np.array_equal(s1.A, s2.A)


class TestLtiSystem:
    def test_validates_q_psd(self):
        with pytest.raises(ArgumentError):
            LtiSystem(A=-np.eye(2), B=np.eye(2), B_d=np.eye(2), Q=-np.eye(2), R=np.eye(2))

    def test_validates_r_pd(self):
        with pytest.raises(ArgumentError):
            LtiSystem(A=-np.eye(2), B=np.eye(2), B_d=np.eye(2), Q=np.eye(2), R=np.zeros((2, 2)))

    def test_g_symmetric_psd(self):
        sys_ = consensus_instance(8, seed=0)[1]
        G = sys_.G
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G).min() >= -1e-12


class TestClusterPartition:
    def test_round_trip_labels(self):
        p = ClusterPartition([(0, 2), (1, 3, 4)])
        assert p.r == 2 and p.n == 5
        assert np.array_equal(p.labels(), [0, 1, 0, 1, 1])

    def test_rejects_overlap_and_gap(self):
        with pytest.raises(ArgumentError):
            ClusterPartition([(0, 1), (1, 2)])
        with pytest.raises(ArgumentError):
            ClusterPartition([(0,), (2,)])
        with pytest.raises(ArgumentError):
            ClusterPartition([(0, 1), ()])


class TestAlmostEquitable:
    def test_complete_graph_any_partition(self):
        n = 6
        edges = {(i, j): 1.0 for i in range(n) for j in range(i + 1, n)}
        graph = Graph(n_nodes=n, edge_weights=edges, node_weights=np.ones(n))
        assert is_almost_equitable(graph, ClusterPartition([(0, 1), (2, 3, 4), (5,)]))

    def test_four_cycle_alternating(self):
        edges = {(0, 1): 1.0, (1, 2): 1.0, (2, 3): 1.0, (0, 3): 1.0}
        graph = Graph(n_nodes=4, edge_weights=edges, node_weights=np.ones(4))
        assert is_almost_equitable(graph, ClusterPartition([(0, 2), (1, 3)]))

    def test_path_graph_not_equitable(self):
        edges = {(0, 1): 1.0, (1, 2): 1.0}
        graph = Graph(n_nodes=3, edge_weights=edges, node_weights=np.ones(3))
        assert not is_almost_equitable(graph, ClusterPartition([(0,), (1, 2)]))

    def test_trivial_partition_always_equitable(self):
        graph, _ = consensus_instance(12, seed=2)
        singles = ClusterPartition([(i,) for i in range(12)])
        assert is_almost_equitable(graph, singles)

    def test_partition_mismatch_raises(self):
        graph, _ = consensus_instance(6, seed=0)
        with pytest.raises(ArgumentError):
            is_almost_equitable(graph, ClusterPartition([(0, 1), (2, 3)]))


class TestPbh:
    def test_hurwitz_system_passes(self):
        sys_ = LtiSystem(A=-np.eye(3), B=np.ones((3, 1)), B_d=np.eye(3), Q=np.eye(3), R=np.eye(1))
        rep = pbh_checks(sys_)
        assert rep.stabilizable and rep.detectable

    def test_consensus_with_identity_input(self):
        _, sys_ = consensus_instance(12, seed=1)
        rep = pbh_checks(sys_)
        assert rep.stabilizable and rep.detectable and rep.controllable_from_Bd

    def test_zero_input_map_not_stabilizable(self):
        sys_ = LtiSystem(
            A=np.array([[0.0, 1.0], [0.0, 0.0]]),
            B=np.zeros((2, 1)),
            B_d=np.eye(2),
            Q=np.eye(2),
            R=np.eye(1),
        )
        assert not pbh_checks(sys_).stabilizable

    @settings(max_examples=10, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_invariant_under_orthonormal_state_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = 5
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, 2))
        W, _ = np.linalg.qr(rng.standard_normal((n, n)))
        base = LtiSystem(A=A, B=B, B_d=np.eye(n), Q=np.eye(n), R=np.eye(2))
        rotated = LtiSystem(A=W @ A @ W.T, B=W @ B, B_d=np.eye(n), Q=np.eye(n), R=np.eye(2))
        a, b = pbh_checks(base), pbh_checks(rotated)
        assert a.stabilizable == b.stabilizable
        assert a.detectable == b.detectable
