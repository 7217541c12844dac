import numpy as np
import pytest

from pksvd.errors import NoViolationFound, NotGeneralPosition, TooLarge
from pksvd.frames import Dictionary, canonical_dual, random_dual
from pksvd.theory_lab import (
    cosparsity_floor_check,
    min_norm_codes,
    nonexistence_search,
    projection_identity_check,
    proxy_trial,
    spark,
)


def general_position_frame(seed, n, m):
    rng = np.random.default_rng(seed)
    while True:
        mat = rng.standard_normal((n, m))
        mat /= np.linalg.norm(mat, axis=0, keepdims=True)
        d = Dictionary(mat)
        if spark(d) == n + 1:
            return d


class TestSpark:
    def test_identity_full_rank(self):
        assert spark(Dictionary(np.eye(3))) == 4

    def test_dependent_triple(self):
        mat = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        assert spark(Dictionary(mat)) == 3

    def test_parallel_pair(self):
        mat = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
        assert spark(Dictionary(mat)) == 2

    def test_too_large(self):
        rng = np.random.default_rng(0)
        with pytest.raises(TooLarge):
            spark(Dictionary(rng.standard_normal((3, 15))))


class TestCosparsityFloor:
    def test_square_orthonormal_reaches_one(self):
        # for m = n the floor is 1 and the adversarial signals reach it
        d = Dictionary(np.eye(3))
        got = cosparsity_floor_check(d, trials=50, seed=0)
        assert got >= 1

    def test_floor_on_random_frame(self):
        d = general_position_frame(1, 3, 5)
        got = cosparsity_floor_check(d, trials=1000, seed=2)
        assert got >= 3  # m - n + 1

    def test_floor_is_attained(self):
        # the adversarial construction should touch the bound exactly
        d = general_position_frame(3, 3, 5)
        got = cosparsity_floor_check(d, trials=200, seed=4)
        assert got == 3

    def test_not_general_position_rejected(self):
        mat = np.array([[1.0, 0.0, 1.0, 0.5], [0.0, 1.0, 1.0, 0.5],
                        [0.0, 0.0, 0.0, 1.0]])
        # columns 0, 1, 2 are linearly dependent in the first two coords?
        # build an explicit dependency: third column = first + second
        mat[:, 2] = mat[:, 0] + mat[:, 1]
        with pytest.raises(NotGeneralPosition):
            cosparsity_floor_check(Dictionary(mat), trials=10, seed=0)


class TestProxyTrial:
    def test_canonical_never_worse_than_sampled_duals(self):
        rng = np.random.default_rng(5)
        for seed in range(20):
            d = general_position_frame(100 + seed, 3, 6)
            x = rng.standard_normal(3)
            trial = proxy_trial(d, x, n_alt_duals=10, seed=seed)
            for dist in trial.alt_dual_distances:
                assert trial.canonical_distance <= dist + 1e-9

    def test_canonical_codes_equal_min_norm(self):
        rng = np.random.default_rng(6)
        for seed in range(20):
            d = general_position_frame(200 + seed, 3, 6)
            x = rng.standard_normal(3)
            trial = proxy_trial(d, x, n_alt_duals=1, seed=seed)
            assert np.linalg.norm(
                trial.canonical_codes - min_norm_codes(d, x)
            ) <= 1e-10

    def test_square_frame_codes_coincide(self):
        rng = np.random.default_rng(7)
        mat = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        d = Dictionary(mat)
        x = rng.standard_normal(3)
        trial = proxy_trial(d, x, n_alt_duals=0, seed=0)
        assert np.linalg.norm(trial.l1_codes - trial.canonical_codes) <= 1e-8

    def test_dual_deviation_lies_in_null_space(self):
        d = general_position_frame(8, 3, 6)
        rng = np.random.default_rng(9)
        x = rng.standard_normal(3)
        base = canonical_dual(d).mat.T @ x
        for seed in range(5):
            alt = random_dual(d, seed).mat.T @ x
            assert np.linalg.norm(d.mat @ (alt - base)) <= 1e-9 * max(
                1.0, np.linalg.norm(alt)
            )

    def test_min_norm_orthogonal_to_null_deviation(self):
        # the canonical codes are the projection of any synthesis codes
        # onto the row space, hence orthogonal to every null-space shift
        d = general_position_frame(10, 3, 6)
        rng = np.random.default_rng(11)
        x = rng.standard_normal(3)
        trial = proxy_trial(d, x, n_alt_duals=6, seed=3)
        w = trial.canonical_codes - trial.l1_codes
        assert abs(trial.canonical_codes @ w) <= 1e-9 * max(
            1.0, np.linalg.norm(w)
        )
        # Pythagoras: the l1 codes are never shorter than the l2-minimal ones
        assert np.linalg.norm(trial.l1_codes) >= np.linalg.norm(
            trial.canonical_codes
        ) - 1e-12

    def test_too_large(self):
        rng = np.random.default_rng(12)
        d = Dictionary(rng.standard_normal((3, 13)))
        with pytest.raises(TooLarge):
            proxy_trial(d, np.ones(3), 1, 0)


class TestNonexistenceSearch:
    def test_hand_built_frame_violation(self):
        from pksvd.sparse_solvers import bp_bruteforce_oracle

        mat = np.hstack([np.eye(2), np.array([[1.0], [1.0]]) / np.sqrt(2)])
        d = Dictionary(mat)
        u1 = bp_bruteforce_oracle(d, np.array([1.0, 0.0])).entries
        u2 = bp_bruteforce_oracle(d, np.array([0.0, 1.0])).entries
        u12 = bp_bruteforce_oracle(d, np.array([1.0, 1.0])).entries
        assert np.allclose(u1, [1, 0, 0], atol=1e-10)
        assert np.allclose(u2, [0, 1, 0], atol=1e-10)
        assert np.allclose(u12, [0, 0, np.sqrt(2)], atol=1e-10)
        violation = np.linalg.norm(u12 - u1 - u2)
        assert violation == pytest.approx(2.0, abs=1e-10)

    def test_random_overcomplete_finds_violation(self):
        report = nonexistence_search(3, 5, trials=100, seed=0)
        assert report.violation > 1e-6

    def test_square_case_finds_none(self):
        with pytest.raises(NoViolationFound):
            nonexistence_search(3, 3, trials=30, seed=0)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            nonexistence_search(3, 11, trials=1, seed=0)


class TestProjectionIdentity:
    def test_identity_frame_zero_residuals(self):
        res = projection_identity_check(Dictionary(np.eye(4)))
        assert res.idempotence <= 1e-12
        assert res.symmetry <= 1e-12
        assert res.rank_gap == 0

    def test_random_frames_tiny_residuals(self):
        for seed in range(10):
            d = general_position_frame(300 + seed, 3, 6)
            res = projection_identity_check(d)
            assert res.idempotence <= 1e-10
            assert res.symmetry <= 1e-10
            assert res.rank_gap == 0

    def test_non_canonical_dual_not_symmetric(self):
        hits = 0
        for seed in range(20):
            d = general_position_frame(400 + seed, 3, 6)
            k = random_dual(d, seed).mat.T @ d.mat
            if np.linalg.norm(k.T - k) > 1e-3:
                hits += 1
        assert hits >= 19
