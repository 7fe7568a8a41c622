import numpy as np
import pytest

from lapembed.graph import (
    GraphError,
    Partition,
    WeightedGraph,
    build_augmentation_graph,
    build_kernel_graph,
    indicator_matrix,
    load_edge_csv,
    median_bandwidth,
    partition_cut_objective,
    random_walk_matrix,
    save_edge_csv,
    stationary_distribution,
    subset_transition_probability,
    volume,
)


def triangle():
    return WeightedGraph(np.array([[0.0, 1.0, 1.0],
                                   [1.0, 0.0, 1.0],
                                   [1.0, 1.0, 0.0]]))


class TestWeightedGraph:
    def test_degrees_and_laplacian(self):
        g = triangle()
        assert np.allclose(g.degrees, [2.0, 2.0, 2.0])
        lap = g.laplacian()
        assert np.allclose(lap, 2 * np.eye(3) - (1 - np.eye(3)))
        assert np.allclose(lap.sum(axis=1), 0.0)

    def test_rejects_asymmetry(self):
        s = np.array([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(GraphError):
            WeightedGraph(s)

    def test_rejects_negative_weight(self):
        s = np.array([[0.0, -1.0], [-1.0, 0.0]])
        with pytest.raises(GraphError):
            WeightedGraph(s)

    def test_rejects_isolated_vertex(self):
        s = np.zeros((3, 3))
        s[0, 1] = s[1, 0] = 1.0
        with pytest.raises(GraphError):
            WeightedGraph(s)


class TestAugmentationGraph:
    def test_two_pairs_make_two_edges(self):
        views = [("a", [0.0]), ("a", [1.0]), ("b", [2.0]), ("b", [3.0])]
        g = build_augmentation_graph(views)
        expected = np.zeros((4, 4))
        expected[0, 1] = expected[1, 0] = 1.0
        expected[2, 3] = expected[3, 2] = 1.0
        assert np.array_equal(g.similarity, expected)

    def test_single_pair_weight_two(self):
        # A lone pair would make the second source isolated, so anchor it
        # with another pair and check the weighted degrees.
        views = [("a", [0.0]), ("a", [1.0]), ("b", [2.0]), ("b", [3.0])]
        g = build_augmentation_graph(views, same_source_weight=2.0)
        assert np.allclose(g.degrees, [2.0, 2.0, 2.0, 2.0])
        assert volume(g, [0, 1]) == pytest.approx(4.0)

    def test_unpaired_view_is_isolated(self):
        views = [("a", [0.0]), ("a", [1.0]), ("b", [2.0])]
        with pytest.raises(GraphError):
            build_augmentation_graph(views)


class TestKernelGraph:
    def test_identical_points_weight_one(self):
        g = build_kernel_graph([[0.0, 0.0], [0.0, 0.0], [3.0, 0.0]], 1.0)
        assert g.similarity[0, 1] == pytest.approx(1.0)

    def test_distance_sqrt2(self):
        g = build_kernel_graph([[0.0, 0.0], [1.0, 1.0]], 1.0)
        assert g.similarity[0, 1] == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_collinear_points(self):
        g = build_kernel_graph([[0.0], [1.0], [2.0]], 1.0)
        assert g.similarity[0, 2] == pytest.approx(np.exp(-2.0), rel=1e-12)

    def test_zero_diagonal(self):
        g = build_kernel_graph(np.random.default_rng(0).normal(size=(5, 2)), 1.0)
        assert np.all(np.diag(g.similarity) == 0.0)

    def test_rejects_nonpositive_bandwidth(self):
        with pytest.raises(GraphError):
            build_kernel_graph([[0.0], [1.0]], 0.0)


def test_median_bandwidth_regular_grid():
    # On a 1-D grid with spacing h the 7th-neighbour distance of interior
    # points is 4h (neighbours alternate sides), so the median is a small
    # multiple of the local spacing rather than the diameter.
    pts = np.arange(50.0)[:, None]
    bw = median_bandwidth(pts)
    assert 1.0 <= bw <= 5.0

    with pytest.raises(GraphError):
        median_bandwidth(pts[:4])  # fewer points than neighbour index


class TestWalkQuantities:
    def test_volume_triangle_subset(self):
        assert volume(triangle(), [1, 2]) == pytest.approx(4.0)

    def test_volume_full_set(self):
        g = triangle()
        assert volume(g, range(3)) == pytest.approx(g.degrees.sum())

    def test_volume_rejects_empty(self):
        with pytest.raises(GraphError):
            volume(triangle(), [])

    def test_random_walk_rows_sum_to_one(self):
        p = random_walk_matrix(triangle())
        assert np.allclose(p.sum(axis=1), 1.0)
        assert np.allclose(p, (1 - np.eye(3)) / 2)

    def test_stationary_is_left_fixed_point(self):
        rng = np.random.default_rng(4)
        s = rng.uniform(0.1, 1.0, size=(6, 6))
        s = (s + s.T) / 2
        np.fill_diagonal(s, 0.0)
        g = WeightedGraph(s)
        pi = stationary_distribution(g)
        p = random_walk_matrix(g)
        assert np.allclose(pi @ p, pi, atol=1e-12)
        assert pi.sum() == pytest.approx(1.0)

    def test_subset_transition_triangle(self):
        g = triangle()
        # From {0}: both unit edges leave, degree volume 2.
        assert subset_transition_probability(g, [0], [1, 2]) == pytest.approx(1.0)
        # From {1,2}: two of four degree units cross.
        assert subset_transition_probability(g, [1, 2], [0]) == pytest.approx(0.5)


class TestPartitionObjective:
    def test_indicator_is_degree_orthonormal(self):
        rng = np.random.default_rng(7)
        s = rng.uniform(0.1, 1.0, size=(8, 8))
        s = (s + s.T) / 2
        np.fill_diagonal(s, 0.0)
        g = WeightedGraph(s)
        p = Partition(np.array([0, 0, 1, 1, 2, 2, 0, 1]), 3)
        z = indicator_matrix(g, p)
        assert np.allclose(z.T @ g.degree_matrix() @ z, np.eye(3), atol=1e-12)

    def test_triangle_split_value(self):
        # {0} vs {1,2}: escape mass 1.0 + 0.5.
        g = triangle()
        p = Partition(np.array([0, 1, 1]), 2)
        assert partition_cut_objective(g, p) == pytest.approx(1.5, abs=1e-12)

    def test_objective_equals_escape_probability_sum(self):
        rng = np.random.default_rng(11)
        s = rng.uniform(0.05, 1.0, size=(7, 7))
        s = (s + s.T) / 2
        np.fill_diagonal(s, 0.0)
        g = WeightedGraph(s)
        p = Partition(np.array([0, 1, 2, 0, 1, 2, 0]), 3)
        total = sum(
            subset_transition_probability(
                g, p.members(c), np.setdiff1d(np.arange(7), p.members(c)))
            for c in range(3))
        assert partition_cut_objective(g, p) == pytest.approx(total, abs=1e-12)

    def test_rejects_empty_cluster(self):
        with pytest.raises(GraphError):
            Partition(np.array([0, 0, 0]), 2)


class TestEdgeCsv:
    def test_round_trip(self, tmp_path):
        g = triangle()
        path = tmp_path / "g.csv"
        save_edge_csv(g, path)
        g2 = load_edge_csv(path)
        assert np.allclose(g.similarity, g2.similarity)

    def test_duplicate_edge_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("0,1,1.0\n1,0,2.0\n1,2,1.0\n")
        with pytest.raises(GraphError):
            load_edge_csv(path)

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1,1.0\n0,2\n")
        with pytest.raises(GraphError, match="line 2"):
            load_edge_csv(path)
