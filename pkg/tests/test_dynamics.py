import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwdegroot.dynamics import (
    BeliefVector,
    ConsensusError,
    ConstructionError,
    build_learning_matrix,
    consensus_limit,
    convergence_distance,
    iterate_beliefs,
    matrix_power,
    write_trajectory_csv,
)
from dwdegroot.netgen import EliteGrassrootsSpec, Graph, degrees, expected_adjacency, sample_adjacency
from dwdegroot.spectra import eigen_symmetrized
from dwdegroot.weightfn import WeightDomainError, power
from oracles import (
    euclidean_operator_norm,
    learning_matrix_loops,
    limit_matrix_from_stationary,
    second_eigenvalue,
    stationary_by_power_iteration,
    weighted_operator_norm,
)

PATH = np.array([[0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]], dtype=float)
STAR = np.array([[0, 1, 1, 1], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]], dtype=float)
K3 = np.ones((3, 3)) - np.eye(3)


def graph(A):
    return Graph.from_adjacency(A)


@pytest.fixture(scope="module")
def two_group_graph():
    return sample_adjacency(EliteGrassrootsSpec(200, 800, 2, 0.4, 0.2), 2024)


class TestBuild:
    def test_uniform_weighting_at_zero(self, two_group_graph):
        T = build_learning_matrix(two_group_graph, power(0))
        A = two_group_graph.weights
        np.testing.assert_allclose(T.entries, A / A.sum(axis=1, keepdims=True), rtol=0, atol=1e-15)

    def test_path_row(self):
        T = build_learning_matrix(graph(PATH), power(1))
        np.testing.assert_allclose(T.entries[1], [1 / 3, 0, 2 / 3, 0], atol=1e-15)

    @pytest.mark.parametrize("alpha", [-2.0, 0.0, 1.5])
    def test_star_rows(self, alpha):
        T = build_learning_matrix(graph(STAR), power(alpha)).entries
        np.testing.assert_allclose(T[0], [0, 1 / 3, 1 / 3, 1 / 3], atol=1e-15)
        np.testing.assert_array_equal(T[1:, 0], [1, 1, 1])

    def test_factors_reconstruct_entries(self, two_group_graph):
        phi = power(1.3)
        T = build_learning_matrix(two_group_graph, phi)
        A = two_group_graph.weights
        w = degrees(two_group_graph) ** 1.3
        np.testing.assert_array_equal(T.diag2, w)
        np.testing.assert_array_equal(T.entries, A * w[None, :] / T.diag1[:, None])
        assert np.max(np.abs(T.entries.sum(axis=1) - 1)) <= 1e-12
        assert T.entries.min() >= 0
        assert T.source == "realized" and T.alpha == 1.3

    def test_matches_loop_oracle(self):
        A = sample_adjacency(EliteGrassrootsSpec(12, 20, 3, 0.6, 0.3), 5).weights
        for alpha in (-1.5, 0.0, 2.0):
            T = build_learning_matrix(graph(A), power(alpha)).entries
            np.testing.assert_allclose(T, learning_matrix_loops(A, alpha), rtol=0, atol=1e-14)

    def test_isolated_vertex(self):
        A = np.zeros((4, 4))
        A[0, 1] = A[1, 0] = A[2, 3] = A[3, 2] = 1
        A[3, 3] = 1
        B = np.pad(A, ((0, 1), (0, 1)))
        with pytest.raises(ConstructionError, match=r"\[4\]"):
            build_learning_matrix(graph(B), power(1))

    def test_zero_degree_neighbour_negative_alpha(self):
        B = np.pad(PATH, ((0, 1), (0, 1)))
        with pytest.raises(WeightDomainError):
            build_learning_matrix(graph(B), power(-1))

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 25), seed=st.integers(0, 10**6), alpha=st.floats(-4, 4))
    def test_row_stochastic(self, n, seed, alpha):
        rng = np.random.default_rng(seed)
        U = np.triu(rng.random((n, n)) < 0.5)
        A = (U | U.T).astype(float)
        np.fill_diagonal(A, 1.0)
        T = build_learning_matrix(graph(A), power(alpha))
        assert np.max(np.abs(T.entries.sum(axis=1) - 1)) <= 1e-12
        assert T.entries.min() >= 0
        P = matrix_power(T, 100)
        assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-10


class TestIterate:
    def test_t_zero(self):
        T = build_learning_matrix(graph(K3), power(1))
        b = iterate_beliefs(T, BeliefVector([1.0, 2.0, 3.0]), 0)
        np.testing.assert_array_equal(b.values, [1, 2, 3])

    def test_constant_preserved(self, two_group_graph):
        T = build_learning_matrix(two_group_graph, power(2))
        b = iterate_beliefs(T, np.full(1000, 0.7), 30)
        assert np.max(np.abs(b.values - 0.7)) <= 1e-12
        assert b.time == 30

    def test_reaches_consensus(self, two_group_graph):
        T = build_learning_matrix(two_group_graph, power(0))
        b0 = np.random.default_rng(0).random(1000)
        w = consensus_limit(two_group_graph, power(0)).weights
        b = iterate_beliefs(T, b0, 200)
        assert np.max(np.abs(b.values - w @ b0)) <= 1e-6

    def test_bad_inputs(self):
        T = build_learning_matrix(graph(K3), power(1))
        with pytest.raises(ValueError):
            iterate_beliefs(T, [1.0, 2.0], 1)
        with pytest.raises(ValueError):
            iterate_beliefs(T, [1.0, 2.0, 3.0], -1)
        with pytest.raises(ValueError):
            BeliefVector([1.0, np.nan])

    def test_trajectory_csv(self):
        T = build_learning_matrix(graph(K3), power(0))
        buf = io.StringIO()
        write_trajectory_csv(T, [0.0, 0.0, 3.0], 1, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "t,vertex_id,belief"
        assert lines[1:4] == ["0,0,0.0", "0,1,0.0", "0,2,3.0"]
        assert lines[4:] == ["1,0,1.5", "1,1,1.5", "1,2,0.0"]


class TestConsensus:
    def test_triangle(self):
        for alpha in (-1, 0, 2):
            w = consensus_limit(graph(K3), power(alpha)).weights
            np.testing.assert_allclose(w, [1 / 3] * 3, atol=1e-15)

    def test_star_against_power_iteration(self):
        T = build_learning_matrix(graph(STAR), power(1)).entries
        oracle = stationary_by_power_iteration(T)
        w = consensus_limit(graph(STAR), power(1), check_aperiodic=False).weights
        np.testing.assert_allclose(oracle, [1 / 2, 1 / 6, 1 / 6, 1 / 6], atol=1e-12)
        np.testing.assert_allclose(w, oracle, atol=1e-12)

    def test_star_is_periodic(self):
        with pytest.raises(ConsensusError, match="bipartite"):
            consensus_limit(graph(STAR), power(1))

    def test_degree_proportional_at_zero(self, two_group_graph):
        w = consensus_limit(two_group_graph, power(0)).weights
        d = degrees(two_group_graph)
        np.testing.assert_allclose(w, d / d.sum(), rtol=1e-12)
        T = build_learning_matrix(two_group_graph, power(0)).entries
        np.testing.assert_allclose(w, stationary_by_power_iteration(T, tol=1e-14), atol=1e-12)

    def test_left_fixed_point(self, two_group_graph):
        for alpha in (-3, 0.5, 3):
            T = build_learning_matrix(two_group_graph, power(alpha))
            w = consensus_limit(two_group_graph, power(alpha)).weights
            assert abs(w.sum() - 1) <= 1e-12 and w.min() >= 0
            assert np.max(np.abs(w @ T.entries - w)) <= 1e-10

    def test_disconnected(self):
        A = np.zeros((5, 5))
        A[:2, :2] = 1
        A[2:, 2:] = 1
        with pytest.raises(ConsensusError, match=r"sizes \[3, 2\]"):
            consensus_limit(graph(A), power(0))

    def test_odd_cycle_is_aperiodic(self):
        C5 = np.roll(np.eye(5), 1, axis=1) + np.roll(np.eye(5), -1, axis=1)
        w = consensus_limit(graph(C5), power(1)).weights
        np.testing.assert_allclose(w, [0.2] * 5)

    def test_shift_towards_high_degree(self):
        g = sample_adjacency(EliteGrassrootsSpec(30, 70, 2, 0.3, 0.1), 8, self_loops=False)
        top = int(np.argmax(degrees(g)))
        shares = [consensus_limit(g, power(a)).weights[top] for a in range(-3, 4)]
        assert shares == sorted(shares)


@pytest.fixture(scope="module")
def small():
    g = sample_adjacency(EliteGrassrootsSpec(60, 140, 2, 0.3, 0.1), 17)
    return build_learning_matrix(g, power(0.8))


class TestDistance:
    def test_t1_equals_lambda2(self, small):
        lam2 = abs(second_eigenvalue(small.entries))
        assert convergence_distance(small, 1) == pytest.approx(lam2, abs=1e-8)

    def test_geometric_decay(self, small):
        lam2 = eigen_symmetrized(small, vectors=False).abs_lambda2
        dist = [convergence_distance(small, t) for t in range(1, 22)]
        ratios = np.array(dist[1:]) / np.array(dist[:-1])
        assert np.max(np.abs(ratios - lam2)) <= 1e-6

    def test_against_generalized_eigenproblem(self, small):
        w = small.metric / small.metric.sum()
        for t in (1, 3, 7):
            B = np.linalg.matrix_power(small.entries, t) - limit_matrix_from_stationary(w)
            assert convergence_distance(small, t) == pytest.approx(weighted_operator_norm(B, small.metric), rel=1e-9)
            assert convergence_distance(small, t, "euclidean") == pytest.approx(euclidean_operator_norm(B), rel=1e-12)

    def test_euclidean_sandwich(self, small):
        lam2 = eigen_symmetrized(small, vectors=False).abs_lambda2
        kappa = small.condition()
        for t in (1, 5, 10):
            e = convergence_distance(small, t, "euclidean")
            assert lam2**t / kappa <= e <= kappa * lam2**t

    def test_power_routes_agree_at_switch(self, small):
        direct = np.linalg.matrix_power(small.entries, 65)
        np.testing.assert_allclose(matrix_power(small, 65), direct, rtol=0, atol=1e-12)
        np.testing.assert_allclose(matrix_power(small, 64), direct @ np.linalg.inv(small.entries), atol=1e-9)

    def test_errors(self, small):
        with pytest.raises(ValueError):
            convergence_distance(small, -1)
        with pytest.raises(ValueError):
            convergence_distance(small, 1, "l1")

    def test_expected_matrix(self):
        spec = EliteGrassrootsSpec(20, 30, 3, 0.5, 0.2)
        T = build_learning_matrix(expected_adjacency(spec), power(1))
        assert T.source == "expected"
        lam2 = eigen_symmetrized(T, vectors=False).abs_lambda2
        assert convergence_distance(T, 4) == pytest.approx(lam2**4, abs=1e-12)
