import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterlqr.errors import (
    ArgumentError,
    AssumptionViolationError,
    DegenerateWeightError,
)
from clusterlqr.lqr import closed_loop_gramian, solve_are_full, stable_eigenbasis
from clusterlqr.netgen import ClusterPartition, LtiSystem, consensus_mode
from clusterlqr.projection import (
    ReducedSystem,
    build_projection,
    control_inversion,
    count_links,
    invert_controller,
    projection_mismatch,
    reduce_system,
    screen_projection_weights,
    solve_reduced_lqr,
    weighted_error_bound,
)
from clusterlqr.lqr import are_solution_bound_matrices

from conftest import consensus_instance, random_stable_system

EXAMPLE_W = np.array([1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
EXAMPLE_PARTITION = ClusterPartition([(0, 1), (2, 3, 4), (5, 6, 7, 8, 9)])


def example_projection():
    return build_projection(EXAMPLE_PARTITION, EXAMPLE_W)


def random_partition(n, r, rng):
    labels = np.concatenate([np.arange(r), rng.integers(0, r, n - r)])
    rng.shuffle(labels)
    return ClusterPartition.from_labels(labels)


class TestBuildProjection:
    def test_worked_example_entries(self):
        P = example_projection().P
        s2, s6, s5 = 1 / np.sqrt(2), 1 / np.sqrt(6), 1 / np.sqrt(5)
        expected = np.array(
            [
                [s2, s2, 0, 0, 0, 0, 0, 0, 0, 0],
                [0, 0, s6, 2 * s6, s6, 0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, s5, s5, s5, s5, s5],
            ]
        )
        assert np.allclose(P, expected, atol=1e-15)

    def test_singletons_give_sign_identity(self):
        n = 5
        w = np.array([1.0, -2.0, 3.0, -4.0, 5.0])
        proj = build_projection(ClusterPartition([(i,) for i in range(n)]), w)
        assert np.allclose(proj.P, np.diag(np.sign(w)))
        assert np.allclose(proj.P.T @ proj.P, np.eye(n))

    def test_single_cluster_uniform(self):
        n = 9
        proj = build_projection(ClusterPartition([tuple(range(n))]), np.ones(n))
        assert np.allclose(proj.P, np.ones((1, n)) / np.sqrt(n))

    def test_zero_block_rejected(self):
        with pytest.raises(DegenerateWeightError):
            build_projection(ClusterPartition([(0, 1), (2,)]), np.array([0.0, 0.0, 1.0]))

    def test_variants(self):
        proj = example_projection()
        B = proj.binary()
        assert set(np.unique(B)) == {0.0, 1.0}
        assert np.array_equal(B != 0, proj.P != 0)
        N = proj.nominal()
        assert N[1, 2] == pytest.approx(1 / np.sqrt(6))
        w_hat = proj.normalized_weights()
        for cell in proj.partition.sets:
            assert np.linalg.norm(w_hat[list(cell)]) == pytest.approx(1.0, abs=1e-12)
        # P equals binary times diag(normalized weights)
        assert np.allclose(B @ np.diag(w_hat), proj.P)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(2, 10))
    def test_defining_properties(self, seed, n):
        rng = np.random.default_rng(seed)
        r = int(rng.integers(1, n + 1))
        part = random_partition(n, r, rng)
        w = rng.standard_normal(n)
        w[np.abs(w) < 1e-3] = 1.0
        proj = build_projection(part, w)
        assert np.abs(proj.P @ proj.P.T - np.eye(r)).max() <= 1e-12
        assert np.linalg.norm(proj.P.T @ (proj.P @ w) - w) <= 1e-12 * np.linalg.norm(w)
        for i, cell in enumerate(part.sets):
            outside = sorted(set(range(n)) - set(cell))
            if outside:
                assert np.abs(proj.P[i, outside]).max() == 0.0


class TestReduceSystem:
    def test_identity_projection(self):
        sys_ = random_stable_system(5, seed=0)
        proj = build_projection(ClusterPartition([(i,) for i in range(5)]), np.ones(5))
        red = reduce_system(sys_, proj)
        assert np.allclose(red.A, sys_.A)
        assert np.allclose(red.Q, sys_.Q)
        assert np.allclose(red.G, sys_.G)

    def test_consensus_reduced_semidefinite_with_null_mode(self):
        graph, sys_ = consensus_instance(12, seed=5)
        vbar = consensus_mode(graph)
        rng = np.random.default_rng(0)
        part = random_partition(12, 3, rng)
        proj = build_projection(part, vbar)
        red = reduce_system(sys_, proj)
        vals = np.linalg.eigvalsh((red.A + red.A.T) / 2)
        assert vals.max() <= 1e-10
        assert np.linalg.norm(red.A @ (proj.P @ vbar)) <= 1e-10

    def test_single_cluster_laplacian_collapses_to_zero(self):
        graph, sys_ = consensus_instance(8, seed=1)
        graph.node_weights[:] = 1.0  # unweighted: A = -L exactly
        from clusterlqr.netgen import consensus_system

        sys_ = consensus_system(graph)
        proj = build_projection(ClusterPartition([tuple(range(8))]), np.ones(8))
        red = reduce_system(sys_, proj)
        assert abs(red.A[0, 0]) <= 1e-12


class TestSolveReducedLqr:
    def test_consensus_never_needs_shift(self):
        graph, sys_ = consensus_instance(14, seed=2, q=10.0)
        vbar = consensus_mode(graph)
        rng = np.random.default_rng(3)
        for r in (1, 3, 7):
            proj = build_projection(random_partition(14, r, rng), vbar)
            x_t, alpha = solve_reduced_lqr(reduce_system(sys_, proj))
            assert alpha == 0.0
            assert np.linalg.eigvalsh(x_t).min() >= -1e-10

    def test_scalar_reduced(self):
        red = ReducedSystem(
            A=np.array([[-1.0]]), B=np.array([[1.0]]), B_d=np.array([[1.0]]),
            Q=np.array([[1.0]]), G=np.array([[1.0]]), R=np.array([[1.0]]),
        )
        x_t, alpha = solve_reduced_lqr(red)
        assert alpha == 0.0
        assert x_t[0, 0] == pytest.approx(np.sqrt(2) - 1, abs=1e-12)

    def test_unstabilizable_pair_engages_shift(self):
        red = ReducedSystem(
            A=np.array([[1.0]]), B=np.array([[0.0]]), B_d=np.array([[1.0]]),
            Q=np.array([[1.0]]), G=np.array([[0.0]]), R=np.array([[1.0]]),
        )
        alpha = 1e-6
        x_t, used = solve_reduced_lqr(red, alpha_policy=alpha)
        assert used == alpha
        expected = (1.0 + np.sqrt(1.0 + alpha)) / alpha
        assert x_t[0, 0] == pytest.approx(expected, rel=1e-9)

    def test_off_policy_raises(self):
        from clusterlqr.errors import SynthesisError

        red = ReducedSystem(
            A=np.array([[1.0]]), B=np.array([[0.0]]), B_d=np.array([[1.0]]),
            Q=np.array([[1.0]]), G=np.array([[0.0]]), R=np.array([[1.0]]),
        )
        with pytest.raises(SynthesisError):
            solve_reduced_lqr(red, alpha_policy="off")


class TestInvertController:
    def test_full_resolution_recovers_exact(self):
        sys_ = random_stable_system(6, seed=7)
        sol = solve_are_full(sys_)
        proj = build_projection(ClusterPartition([(i,) for i in range(6)]), np.ones(6))
        ctrl = control_inversion(sys_, proj, x_full=sol.X)
        assert np.linalg.norm(ctrl.X_hat - sol.X) <= 1e-8 * np.linalg.norm(sol.X)
        assert np.linalg.norm(ctrl.K_hat - sol.K) <= 1e-8 * max(1.0, np.linalg.norm(sol.K))

    def test_example_projection_times_identity(self):
        proj = example_projection()
        sys_ = consensus_instance(10, seed=0)[1]
        ctrl = invert_controller(np.eye(3), proj, sys_)
        assert np.allclose(ctrl.X_hat, proj.P.T @ proj.P)
        assert np.linalg.matrix_rank(ctrl.X_hat) == 3

    def test_identity_inputs_make_gain_equal_solution(self):
        _, sys_ = consensus_instance(10, seed=4, q=100.0)
        proj = example_projection()
        ctrl = control_inversion(sys_, proj)
        assert np.allclose(ctrl.K_hat, ctrl.X_hat)

    def test_lifted_spectrum_matches_reduced(self):
        _, sys_ = consensus_instance(9, seed=6, q=10.0)
        rng = np.random.default_rng(1)
        proj = build_projection(random_partition(9, 3, rng), consensus_mode(consensus_instance(9, seed=6)[0]))
        red = reduce_system(sys_, proj)
        x_t, _ = solve_reduced_lqr(red)
        ctrl = invert_controller(x_t, proj, sys_)
        lifted = np.sort(np.linalg.eigvalsh(ctrl.X_hat))[-3:]
        reduced = np.sort(np.linalg.eigvalsh(x_t))
        assert np.allclose(lifted, reduced, atol=1e-10 * max(1.0, reduced.max()))


class TestScreening:
    def test_rejects_orthogonal_block(self):
        A = np.array([[0.5, 0.0], [0.0, -1.0]])
        sys_ = LtiSystem(A=A, B=np.eye(2), B_d=np.eye(2), Q=np.eye(2), R=np.eye(2))
        part = ClusterPartition([(0,), (1,)])
        with pytest.raises(AssumptionViolationError):
            screen_projection_weights(sys_, part, np.array([0.0, 1.0]))

    def test_accepts_aligned_weights(self):
        graph, sys_ = consensus_instance(8, seed=9)
        part = ClusterPartition([(0, 1, 2, 3), (4, 5, 6, 7)])
        screen_projection_weights(sys_, part, consensus_mode(graph))


class TestMismatch:
    def test_identity_projection_zero(self):
        sys_ = random_stable_system(6, seed=3)
        factor = closed_loop_gramian(sys_, stable_eigenbasis(sys_))
        proj = build_projection(ClusterPartition([(i,) for i in range(6)]), np.ones(6))
        assert projection_mismatch(proj, factor) <= 1e-10

    def test_factor_in_weight_span_single_cluster(self):
        n = 6
        w = np.abs(np.random.default_rng(2).standard_normal(n)) + 0.5
        proj = build_projection(ClusterPartition([tuple(range(n))]), w)
        F = np.outer(w, [1.0, -2.0, 0.5])
        assert projection_mismatch(proj, F) <= 1e-10 * np.linalg.norm(F)

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(8)
        n, r = 8, 3
        F = rng.standard_normal((n, 5))
        proj = build_projection(random_partition(n, r, rng), rng.standard_normal(n) + 3.0)
        fast = projection_mismatch(proj, F)
        dense = np.linalg.norm(F - proj.P.T @ (proj.P @ F))
        assert fast == pytest.approx(dense, rel=1e-10, abs=1e-12)

    def test_squared_identity_with_traces(self):
        _, sys_ = consensus_instance(12, seed=11, q=10.0)
        factor = closed_loop_gramian(sys_, stable_eigenbasis(sys_))
        rng = np.random.default_rng(4)
        proj = build_projection(random_partition(12, 4, rng), np.ones(12))
        xi = projection_mismatch(proj, factor)
        Phi = factor.gramian()
        identity = np.trace(Phi) - np.trace(proj.P @ Phi @ proj.P.T)
        assert xi**2 == pytest.approx(identity, rel=1e-10)

    def test_refinement_never_increases(self):
        rng = np.random.default_rng(5)
        _, sys_ = consensus_instance(12, seed=13, q=10.0)
        factor = closed_loop_gramian(sys_, stable_eigenbasis(sys_))
        w = np.ones(12)
        for _ in range(10):
            r = int(rng.integers(1, 6))
            part = random_partition(12, r, rng)
            coarse = projection_mismatch(build_projection(part, w), factor)
            # split the largest cluster in two
            sets = list(part.sets)
            big = max(range(len(sets)), key=lambda i: len(sets[i]))
            if len(sets[big]) < 2:
                continue
            cell = list(sets[big])
            sets[big] = tuple(cell[: len(cell) // 2])
            sets.append(tuple(cell[len(cell) // 2 :]))
            fine = projection_mismatch(build_projection(ClusterPartition(sets), w), factor)
            assert fine <= coarse * (1 + 1e-9)


class TestWeightedErrorBound:
    def test_zero_at_identity_projection(self):
        sys_ = random_stable_system(5, seed=10)
        sol = solve_are_full(sys_)
        factor = closed_loop_gramian(sys_, stable_eigenbasis(sys_))
        proj = build_projection(ClusterPartition([(i,) for i in range(5)]), np.ones(5))
        value = weighted_error_bound(proj, sys_, sol.X, factor, alpha=0.0, beta_tilde=1.0)
        assert value <= 1e-9

    def test_scalar_dominates_error(self):
        sys_ = LtiSystem(A=[[-1.0]], B=[[1.0]], B_d=[[1.0]], Q=[[1.0]], R=[[1.0]])
        sol = solve_are_full(sys_)
        factor = closed_loop_gramian(sys_, stable_eigenbasis(sys_))
        proj = build_projection(ClusterPartition([(0,)]), np.ones(1))
        red = reduce_system(sys_, proj)
        beta_t = are_solution_bound_matrices(red.A, red.G, red.Q)
        x_t, alpha = solve_reduced_lqr(red)
        x_hat = proj.P.T @ x_t @ proj.P
        measured = abs((sol.X - x_hat)[0, 0] * factor.factor[0, 0])
        bound = weighted_error_bound(proj, sys_, sol.X, factor, alpha, beta_t)
        assert bound >= measured - 1e-12

    def test_dominates_error_on_consensus(self):
        for seed in range(10):
            graph, sys_ = consensus_instance(10, seed=seed, q=50.0)
            vbar = consensus_mode(graph)
            sol = solve_are_full(sys_)
            factor = closed_loop_gramian(sys_, stable_eigenbasis(sys_))
            rng = np.random.default_rng(seed)
            proj = build_projection(random_partition(10, 3, rng), vbar)
            red = reduce_system(sys_, proj)
            x_t, alpha = solve_reduced_lqr(red)
            beta_t = are_solution_bound_matrices(
                red.A, red.G + alpha * np.eye(3), red.Q + alpha * np.eye(3)
            )
            x_hat = proj.P.T @ x_t @ proj.P
            measured = np.linalg.norm((sol.X - x_hat) @ factor.factor)
            bound = weighted_error_bound(proj, sys_, sol.X, factor, alpha, beta_t)
            assert bound >= measured * (1 - 1e-9)


class TestCountLinks:
    def test_benchmark_values(self):
        assert count_links(500, 6) == {"two_layer": 515, "full_lqr": 124750}
        assert count_links(500, 9)["two_layer"] == 536

    def test_single_cluster(self):
        assert count_links(20, 1)["two_layer"] == 20

    def test_range_check(self):
        with pytest.raises(ArgumentError):
            count_links(5, 6)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 400), st.integers(1, 400))
    def test_formulas(self, n, r):
        if r > n:
            n, r = r, n
        counts = count_links(n, r)
        assert counts["two_layer"] == n + r * (r - 1) // 2
        assert counts["full_lqr"] == n * (n - 1) // 2
