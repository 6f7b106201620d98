import math

import numpy as np
import pytest

from proofspace.errors import DataError
from proofspace.corpus import DegenerateDistribution, DistanceMatrix, cosine_distance_matrix
from proofspace.geometry import (
    MdsSolution,
    NonFiniteInput,
    TooFewPoints,
    classical_mds,
    distance_correlation,
    double_center,
    jacobi_eigh,
    smacof_refine,
)

from _oracles import brute_force_eigenvalues, pairwise_euclidean, planar_cosine_embeddings


def matrix_from_points(points: np.ndarray, scale: float = 1.0) -> DistanceMatrix:
    distances = pairwise_euclidean(np.asarray(points, dtype=float)) * scale
    return DistanceMatrix(n=len(points), entries=distances)


def embedded_distances(solution: MdsSolution) -> np.ndarray:
    return pairwise_euclidean(solution.coordinates)


class TestClassicalMds:
    def test_two_points(self):
        distances = DistanceMatrix(2, np.array([[0.0, 2.0], [2.0, 0.0]]))
        # Double-centering by hand: squared distances [[0,4],[4,0]], row means
        # [2,2], grand mean 2, so B = [[1,-1],[-1,1]] with top eigenvalue 2.
        gram = double_center(distances)
        assert np.allclose(gram, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-12)
        solution = classical_mds(distances, 1)
        assert sorted(solution.coordinates.ravel()) == pytest.approx([-1.0, 1.0], abs=1e-9)
        assert solution.r == 1.0

    def test_equilateral_triangle(self):
        distances = DistanceMatrix(3, np.ones((3, 3)) - np.eye(3))
        solution = classical_mds(distances, 2)
        embedded = embedded_distances(solution)[np.triu_indices(3, 1)]
        assert np.abs(embedded - 1.0).max() <= 1e-9
        assert solution.r == 1.0

    def test_unit_square(self):
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        distances = matrix_from_points(corners)
        solution = classical_mds(distances, 2)
        # Brute-force check of all 6 pairs against the inputs.
        embedded = embedded_distances(solution)
        for i in range(4):
            for j in range(i + 1, 4):
                assert embedded[i, j] == pytest.approx(
                    distances.entries[i, j], abs=1e-9
                )

    def test_coordinates_centered_and_sign_convention(self):
        rng = np.random.default_rng(21)
        distances = matrix_from_points(rng.normal(size=(9, 3)), scale=0.2)
        solution = classical_mds(distances, 3)
        assert np.abs(solution.coordinates.sum(axis=0)).max() <= 1e-9 * 9
        for j in range(3):
            column = solution.coordinates[:, j]
            nonzero = column[column != 0.0]
            if nonzero.size:
                assert nonzero[0] > 0

    def test_eigenvalues_descending_and_negative_clamped(self):
        # A triangle-inequality violation forces a negative eigenvalue.
        entries = np.array(
            [
                [0.0, 2.0, 0.1],
                [2.0, 0.0, 0.1],
                [0.1, 0.1, 0.0],
            ]
        )
        distances = DistanceMatrix(3, entries)
        solution = classical_mds(distances, 2)
        values = list(solution.eigenvalues_used)
        assert values == sorted(values, reverse=True)
        assert solution.clamped_count == 1
        assert np.all(solution.coordinates[:, 1] == 0.0)

    def test_monotone_fidelity_random_corpora(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            embeddings = rng.normal(size=(rng.integers(6, 20), rng.integers(4, 12)))
            distances = cosine_distance_matrix(embeddings)
            rs = [classical_mds(distances, k).r for k in (1, 2, 3)]
            assert rs[0] <= rs[1] + 1e-9
            assert rs[1] <= rs[2] + 1e-9

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(5)
        distances = matrix_from_points(rng.normal(size=(10, 2)), scale=0.3)
        solution = classical_mds(distances, 2)
        theta = 0.7
        rotation = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        moved = solution.coordinates @ rotation.T + np.array([3.5, -1.25])
        baseline = distances.upper_triangle()

        def raw_stress(coords):
            diff = baseline - pairwise_euclidean(coords)[np.triu_indices(10, 1)]
            return float((diff ** 2).sum())

        assert raw_stress(moved) == pytest.approx(solution.stress, abs=1e-9)
        assert distance_correlation(distances, moved) == pytest.approx(solution.r, abs=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        distances = matrix_from_points(rng.normal(size=(8, 2)), scale=0.25)
        first = classical_mds(distances, 2)
        second = classical_mds(distances, 2)
        assert np.array_equal(first.coordinates, second.coordinates)
        assert first.to_json_text() == second.to_json_text()

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            classical_mds(DistanceMatrix(1, np.zeros((1, 1))), 1)
        with pytest.raises(TooFewPoints):
            classical_mds(DistanceMatrix(2, np.array([[0.0, 1.0], [1.0, 0.0]])), 2)

    def test_non_finite_rejected(self):
        distances = DistanceMatrix(3, np.ones((3, 3)) - np.eye(3))
        bad = distances.entries.copy()
        with pytest.raises(NonFiniteInput):
            object.__setattr__(distances, "entries", bad * np.nan)
            classical_mds(distances, 1)


class TestJacobi:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_matches_characteristic_polynomial_roots(self, n):
        rng = np.random.default_rng(100 + n)
        for _ in range(5):
            base = rng.normal(size=(n, n))
            symmetric = 0.5 * (base + base.T)
            values, vectors, _ = jacobi_eigh(symmetric)
            mine = np.sort(values)[::-1]
            oracle = brute_force_eigenvalues(symmetric)
            assert np.abs(mine - oracle).max() <= 1e-9

    def test_eigenpairs_satisfy_definition(self):
        rng = np.random.default_rng(33)
        base = rng.normal(size=(5, 5))
        symmetric = 0.5 * (base + base.T)
        values, vectors, _ = jacobi_eigh(symmetric)
        residual = symmetric @ vectors - vectors * values[None, :]
        assert np.abs(residual).max() <= 1e-10
        assert np.abs(vectors.T @ vectors - np.eye(5)).max() <= 1e-10

    def test_fixture_gram_matrices(self):
        triangle = DistanceMatrix(3, np.ones((3, 3)) - np.eye(3))
        gram = double_center(triangle)
        values, _, _ = jacobi_eigh(gram)
        assert np.abs(np.sort(values)[::-1] - brute_force_eigenvalues(gram)).max() <= 1e-9

    def test_zero_matrix(self):
        values, vectors, sweeps = jacobi_eigh(np.zeros((3, 3)))
        assert np.array_equal(values, np.zeros(3))
        assert np.array_equal(vectors, np.eye(3))


class TestDistanceCorrelation:
    def test_exact_reproduction(self):
        points = np.array([[0.0, 0.0], [0.4, 0.0], [0.1, 0.7], [0.5, 0.9]])
        distances = matrix_from_points(points)
        centered = points - points.mean(axis=0)
        assert distance_correlation(distances, centered) == pytest.approx(1.0, abs=1e-12)

    def test_coincident_coordinates_degenerate(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        distances = matrix_from_points(points)
        with pytest.raises(DegenerateDistribution):
            distance_correlation(distances, np.zeros((3, 2)))

    def test_both_constant_is_perfect(self):
        distances = DistanceMatrix(3, np.ones((3, 3)) - np.eye(3))
        triangle = np.array(
            [[0.0, 1.0 / math.sqrt(3.0)],
             [-0.5, -0.5 / math.sqrt(3.0)],
             [0.5, -0.5 / math.sqrt(3.0)]]
        )
        assert distance_correlation(distances, triangle) == 1.0

    def test_synthetic_manifold(self):
        embeddings, _ = planar_cosine_embeddings(50, 100, seed=17)
        distances = cosine_distance_matrix(embeddings)
        r2 = classical_mds(distances, 2).r
        r1 = classical_mds(distances, 1).r
        assert r2 >= 0.999
        assert r1 < r2


class TestSmacof:
    def _line_solution(self):
        coords = np.array([[-1.0], [0.0], [1.0]])
        distances = matrix_from_points(coords)
        return distances, MdsSolution(
            k=1, coordinates=coords, stress=0.0, r=1.0, eigenvalues_used=(2.0,)
        )

    def test_perfect_embedding_is_fixed_point(self):
        distances, init = self._line_solution()
        refined = smacof_refine(distances, init, max_iters=50, tol=1e-9)
        assert np.array_equal(refined.coordinates, init.coordinates)
        assert refined.stress == 0.0
        assert len(refined.stress_trace) == 2  # initial stress + one transform

    def test_stress_non_increasing_on_noisy_configuration(self):
        rng = np.random.default_rng(40)
        points = rng.normal(size=(20, 2))
        distances = pairwise_euclidean(points)
        noise = 1.0 + rng.uniform(-0.2, 0.2, size=distances.shape)
        noisy = 0.05 * distances * (0.5 * (noise + noise.T))
        np.fill_diagonal(noisy, 0.0)
        matrix = DistanceMatrix(20, noisy)
        init = classical_mds(matrix, 2)
        refined = smacof_refine(matrix, init, max_iters=100, tol=1e-12)
        trace = refined.stress_trace
        assert all(later <= earlier + 1e-12 for earlier, later in zip(trace, trace[1:]))
        assert refined.stress <= init.stress + 1e-12
        assert -1.0 <= refined.r <= 1.0

    def test_tol_one_stops_after_first_check(self):
        rng = np.random.default_rng(41)
        points = rng.normal(size=(8, 2))
        matrix = matrix_from_points(points, scale=0.2)
        init = classical_mds(matrix, 1)
        refined = smacof_refine(matrix, init, max_iters=500, tol=1.0)
        assert len(refined.stress_trace) == 2

    def test_tol_must_be_positive(self):
        distances, init = self._line_solution()
        with pytest.raises(DataError):
            smacof_refine(distances, init, max_iters=5, tol=0.0)


class TestSerialization:
    def test_roundtrip_17_digits(self, tmp_path):
        rng = np.random.default_rng(50)
        distances = matrix_from_points(rng.normal(size=(6, 2)), scale=0.3)
        solution = classical_mds(distances, 2)
        path = tmp_path / "mds_k2.json"
        solution.save(path)
        reread = MdsSolution.load(path)
        assert np.array_equal(reread.coordinates, solution.coordinates)
        assert reread.stress == solution.stress
        assert reread.r == solution.r
        assert reread.eigenvalues_used == solution.eigenvalues_used
        assert reread.to_json_text() == solution.to_json_text()
