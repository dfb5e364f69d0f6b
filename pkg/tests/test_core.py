from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mvcate.core import (
    ObservationalSample,
    TreatmentLevels,
    affine_basis,
    clip_probabilities,
    make_basis,
    split_by_treatment,
)
from mvcate.harness.sample_io import sample_from_csv, sample_to_csv


def _sample(idx, K=2, d=1):
    n = len(idx)
    return ObservationalSample(np.zeros((n, d)), np.asarray(idx, dtype=np.int64), np.zeros(n), TreatmentLevels.grid(K))


class TestTreatmentLevels:
    def test_grid(self):
        assert TreatmentLevels.grid(4).values == (0.0, 0.25, 0.5, 0.75, 1.0)

    @pytest.mark.parametrize("vals", [(0.0,), (0.0, 0.0), (1.0, 0.5), (0.0, float("nan"))])
    def test_rejects_invalid(self, vals):
        with pytest.raises(ValueError):
            TreatmentLevels(vals)


class TestObservationalSample:
    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            ObservationalSample(np.zeros((3, 1)), [0, 1], np.zeros(3), TreatmentLevels.grid(1))

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            _sample([0, 3], K=2)

    def test_immutable(self):
        s = _sample([0, 1, 2])
        with pytest.raises(ValueError):
            s.outcome[0] = 1.0

    def test_underpopulated(self):
        assert _sample([0, 0, 1], K=2).underpopulated_levels(1) == [2]


class TestSplitByTreatment:
    def test_partition_example(self):
        parts = split_by_treatment(_sample([0, 1, 0, 2]))
        assert {k: v.tolist() for k, v in parts.items()} == {0: [0, 2], 1: [1], 2: [3]}

    def test_single_stratum(self):
        parts = split_by_treatment(_sample([0] * 5))
        assert parts[0].tolist() == list(range(5))
        assert parts[1].size == 0 and parts[2].size == 0

    def test_empty(self):
        parts = split_by_treatment(_sample([]))
        assert all(v.size == 0 for v in parts.values())

    @given(st.integers(1, 6).flatmap(lambda K: st.tuples(st.just(K), st.lists(st.integers(0, K), max_size=60))))
    def test_disjoint_cover(self, case):
        K, idx = case
        parts = split_by_treatment(_sample(idx, K=K))
        rows = np.concatenate(list(parts.values()))
        assert sorted(rows.tolist()) == list(range(len(idx)))
        for k, v in parts.items():
            assert all(idx[i] == k for i in v)


class TestClipProbabilities:
    def test_floor_example(self):
        np.testing.assert_allclose(clip_probabilities([0.0, 1.0], 0.01), [0.01 / 1.01, 1.0 / 1.01], rtol=1e-15)

    @pytest.mark.parametrize("p,floor", [([0.5, 0.5], 0.01), ([1 / 3, 1 / 3, 1 / 3], 0.1)])
    def test_unchanged(self, p, floor):
        np.testing.assert_allclose(clip_probabilities(p, floor), p, rtol=0, atol=1e-15)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            clip_probabilities([np.nan, 1.0], 0.01)

    def test_rejects_large_floor(self):
        with pytest.raises(ValueError):
            clip_probabilities([0.5, 0.5], 0.5)

    @given(
        hnp.arrays(float, st.tuples(st.integers(1, 8), st.integers(2, 8)),
                   elements=st.floats(0, 1, allow_subnormal=False)),
        st.floats(1e-4, 0.05),
    )
    def test_sums_to_one_and_idempotent(self, raw, floor):
        raw = raw + 1e-12
        raw = raw / raw.sum(axis=1, keepdims=True)
        floor = min(floor, 0.99 / raw.shape[1])
        q = clip_probabilities(raw, floor)
        np.testing.assert_allclose(q.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        assert np.all(q >= floor / (1 + raw.shape[1] * floor) - 1e-15)
        np.testing.assert_allclose(clip_probabilities(q, floor), q, rtol=0, atol=1e-15)


class TestBasis:
    def test_intercept_first(self):
        for name in ("intercept", "affine", "norm", "quadratic", "default"):
            H = make_basis(name, 3)(np.random.default_rng(0).normal(size=(4, 3)))
            np.testing.assert_array_equal(H[:, 0], 1.0)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            affine_basis(2)(np.zeros((3, 1)))

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown basis"):
            make_basis("spline", 1)


class TestSampleCsv:
    @given(
        st.integers(1, 3).flatmap(
            lambda d: st.lists(
                st.tuples(
                    st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=d, max_size=d),
                    st.integers(0, 3),
                    st.floats(allow_nan=False, allow_infinity=False),
                ),
                min_size=1, max_size=20,
            )
        )
    )
    def test_round_trip_bit_exact(self, rows):
        X = np.array([r[0] for r in rows])
        s = ObservationalSample(X, [r[1] for r in rows], [r[2] for r in rows], TreatmentLevels.grid(3))
        back = sample_from_csv(sample_to_csv(s), s.levels)
        assert back.covariates.tobytes() == s.covariates.tobytes()
        assert back.outcome.tobytes() == s.outcome.tobytes()
        np.testing.assert_array_equal(back.treatment_idx, s.treatment_idx)

    def test_infers_levels(self, tmp_path):
        s = ObservationalSample([[0.1], [0.2], [0.3]], [0, 1, 2], [1.0, 2.0, 3.0], TreatmentLevels((0.0, 0.3, 0.7)))
        path = tmp_path / "sample.csv"
        sample_to_csv(s, path)
        assert sample_from_csv(path).levels == s.levels

    def test_missing_level_needs_explicit_levels(self):
        s = _sample([0, 2])
        with pytest.raises(ValueError, match="pass levels"):
            sample_from_csv(sample_to_csv(s))
