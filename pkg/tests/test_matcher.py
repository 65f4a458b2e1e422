import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowcam.errors import RangeError
from flowcam.feature_engine import Feature
from flowcam.matcher import (
    FlowVector,
    hamming,
    match_features,
    match_features_bruteforce,
    ratio_filter,
)


def feat(x, y, descriptor, score=10, orientation=0.0):
    return Feature(x, y, score, orientation, descriptor)


def desc_from_int(value):
    return value.to_bytes(32, "little")


def random_features(rng, n, span=64):
    feats = []
    for _ in range(n):
        feats.append(
            feat(
                int(rng.integers(0, span)),
                int(rng.integers(0, span)),
                rng.integers(0, 256, size=32, dtype=np.uint8).tobytes(),
            )
        )
    return feats


class TestHamming:
    def test_identity(self):
        d = bytes(range(32))
        assert hamming(d, d) == 0

    def test_complement(self):
        d = bytes(range(32))
        inv = bytes(255 - b for b in d)
        assert hamming(d, inv) == 256

    def test_two_bit_difference(self):
        assert hamming(desc_from_int(0x01), desc_from_int(0x07)) == 2

    def test_wrong_width_rejected(self):
        with pytest.raises(RangeError):
            hamming(b"\x00" * 16, b"\x00" * 32)


class TestMatchFeatures:
    def test_self_match(self):
        rng = np.random.default_rng(0)
        feats = random_features(rng, 10)
        vectors = match_features(feats, feats, 4)
        assert len(vectors) == len(feats)
        assert all(v.dx == 0 and v.dy == 0 and v.best_score == 0 for v in vectors)

    def test_empty_prev(self):
        rng = np.random.default_rng(1)
        assert match_features([], random_features(rng, 5), 8) == []

    def test_rigid_translation_recovered(self):
        rng = np.random.default_rng(2)
        prev = []
        taken = set()
        while len(prev) < 12:
            x, y = int(rng.integers(10, 40)), int(rng.integers(10, 40))
            if (x, y) in taken:
                continue
            taken.add((x, y))
            prev.append(feat(x, y, rng.integers(0, 256, size=32, dtype=np.uint8).tobytes()))
        curr = [feat(f.x + 3, f.y - 2, f.descriptor) for f in prev]
        vectors = match_features(prev, curr, 8)
        assert vectors == match_features_bruteforce(prev, curr, 8)
        assert len(vectors) == 12
        assert all((v.dx, v.dy) == (3, -2) for v in vectors)

    def test_no_candidate_emits_nothing(self):
        prev = [feat(5, 5, desc_from_int(1))]
        curr = [feat(50, 50, desc_from_int(1))]
        assert match_features(prev, curr, 8) == []

    def test_single_candidate_second_score_is_256(self):
        prev = [feat(5, 5, desc_from_int(1))]
        curr = [feat(7, 5, desc_from_int(3))]
        [v] = match_features(prev, curr, 8)
        assert v.best_score == 1
        assert v.second_score == 256

    def test_tie_breaks_prefer_smaller_displacement(self):
        d = desc_from_int(0)
        prev = [feat(10, 10, d)]
        curr = [feat(14, 10, d), feat(11, 10, d)]
        [v] = match_features(prev, curr, 8)
        assert (v.dx, v.dy) == (1, 0)
        assert v.best_score == 0 and v.second_score == 0

    def test_tie_breaks_then_row_major(self):
        d = desc_from_int(0)
        prev = [feat(10, 10, d)]
        curr = [feat(10, 12, d), feat(10, 8, d)]  # same Hamming, same Chebyshev
        [v] = match_features(prev, curr, 8)
        assert (v.dx, v.dy) == (0, -2)  # (10, 8) is earlier in row-major order

    def test_output_ordered_by_prev_row_major(self):
        rng = np.random.default_rng(3)
        prev = random_features(rng, 30)
        curr = random_features(rng, 30)
        vectors = match_features(prev, curr, 12)
        keys = [(v.y_prev, v.x_prev) for v in vectors]
        assert keys == sorted(keys)

    def test_non_injective(self):
        d = desc_from_int(0xFFFF)
        prev = [feat(10, 10, d), feat(12, 10, d)]
        curr = [feat(11, 10, d)]
        vectors = match_features(prev, curr, 4)
        assert len(vectors) == 2
        assert {v.x_curr for v in vectors} == {11}

    def test_count_never_exceeds_prev(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            prev = random_features(rng, int(rng.integers(0, 30)))
            curr = random_features(rng, int(rng.integers(0, 30)))
            assert len(match_features(prev, curr, 6)) <= len(prev)

    def test_wider_gate_never_loses_vectors(self):
        rng = np.random.default_rng(5)
        prev = random_features(rng, 25)
        curr = random_features(rng, 25)
        counts = [len(match_features(prev, curr, d)) for d in (1, 2, 4, 8, 16, 64)]
        assert counts == sorted(counts)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(6)
        prev = random_features(rng, 20)
        curr = random_features(rng, 20)
        base = match_features(prev, curr, 10)
        perm = list(rng.permutation(len(prev)))
        shuffled = match_features([prev[i] for i in perm], curr, 10)
        assert shuffled == base

    @given(
        n_prev=st.integers(0, 64),
        n_curr=st.integers(0, 64),
        gate=st.integers(1, 70),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=250, deadline=None)
    def test_grid_matches_bruteforce(self, n_prev, n_curr, gate, seed):
        rng = np.random.default_rng(seed)
        prev = random_features(rng, n_prev)
        curr = random_features(rng, n_curr)
        assert match_features(prev, curr, gate) == match_features_bruteforce(
            prev, curr, gate
        )

    def test_duplicate_positions_handled(self):
        rng = np.random.default_rng(7)
        prev = random_features(rng, 8, span=3)
        curr = random_features(rng, 8, span=3)
        assert match_features(prev, curr, 2) == match_features_bruteforce(prev, curr, 2)


class TestRatioFilter:
    def vec(self, best, second):
        return FlowVector(5, 5, 1, 0, best, second)

    def test_equal_scores_suppressed(self):
        assert ratio_filter([self.vec(100, 100)], 0.8) == []

    def test_perfect_match_always_kept(self):
        kept = ratio_filter([self.vec(0, 0), self.vec(0, 10)], 0.5)
        assert len(kept) == 2

    def test_threshold_inequality(self):
        assert ratio_filter([self.vec(40, 100)], 0.8) == [self.vec(40, 100)]
        assert ratio_filter([self.vec(90, 100)], 0.8) == []

    def test_subsequence_preserved(self):
        rng = np.random.default_rng(8)
        vectors = []
        for _ in range(50):
            best = int(rng.integers(0, 200))
            second = int(rng.integers(best, 257)) if best < 256 else 256
            vectors.append(self.vec(best, min(second, 256)))
        kept = ratio_filter(vectors, 0.7)
        it = iter(vectors)
        assert all(v in it for v in kept)  # order-preserving subsequence

    def test_threshold_one_removes_exact_ties_only(self):
        vectors = [self.vec(10, 10), self.vec(10, 11), self.vec(0, 0), self.vec(255, 255)]
        kept = ratio_filter(vectors, 1.0)
        assert kept == [self.vec(10, 11), self.vec(0, 0)]

    def test_invalid_threshold(self):
        with pytest.raises(RangeError):
            ratio_filter([], 0.0)
        with pytest.raises(RangeError):
            ratio_filter([], 1.5)


class TestFlowVectorInvariants:
    def test_best_cannot_exceed_second(self):
        with pytest.raises(RangeError):
            FlowVector(0, 0, 0, 0, 10, 5)

    def test_score_bounds(self):
        with pytest.raises(RangeError):
            FlowVector(0, 0, 0, 0, -1, 5)
        with pytest.raises(RangeError):
            FlowVector(0, 0, 0, 0, 0, 300)
