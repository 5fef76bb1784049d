import numpy as np
import pytest
from scipy import stats as scipy_stats

from etrep.stats import (
    FeatureMatrix,
    bh_adjust,
    direction_projection_test,
    partial_tests,
    permutation_pvalue,
    thread_count,
    two_sample_report,
    _pooled_t,
)
from helpers import bh_oracle


def gaussian_groups(rng, m1=12, m2=10, dim=8, shift=0.0):
    a = rng.normal(size=(m1, dim))
    b = rng.normal(size=(m2, dim)) + shift
    return a, b


class TestPermutationPvalue:
    def test_hand_example(self):
        assert permutation_pvalue(2.0, [1.0, 3.0, 2.0]) == 3.0 / 4.0

    def test_observed_beats_all(self):
        # nothing as extreme as the observed value: add-one floor 1/(N+1)
        assert permutation_pvalue(10.0, np.linspace(0.0, 9.0, 999)) == 1 / 1000
        assert permutation_pvalue(1e9, np.zeros(999)) == 1.0 / 1000.0

    def test_all_equal(self):
        assert permutation_pvalue(1.0, np.ones(10)) == 1.0

    def test_half_exceed(self):
        permuted = [0.0] * 5 + [2.0] * 5
        assert permutation_pvalue(1.0, permuted) == 6.0 / 11.0

    def test_two_sided_via_absolute_value(self):
        assert permutation_pvalue(-2.0, [1.0, -3.0]) == 2.0 / 3.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            permutation_pvalue(1.0, [])


class TestPooledT:
    def test_hand_example(self):
        a = np.array([[1.0], [2.0], [3.0]])
        b = np.array([[4.0], [5.0], [6.0]])
        t = _pooled_t(a, b)[0]
        assert np.isclose(t, -3.0 / np.sqrt(2.0 / 3.0), atol=1e-12)
        assert np.isclose(t, -3.6742, atol=1e-4)

    def test_matches_scipy(self, rng):
        for _ in range(20):
            a, b = gaussian_groups(rng)
            expected = scipy_stats.ttest_ind(a, b, equal_var=True).statistic
            assert np.allclose(_pooled_t(a, b), expected, atol=1e-10)

    def test_constant_equal_columns_give_zero(self):
        a = np.full((4, 2), 3.0)
        b = np.full((5, 2), 3.0)
        assert np.array_equal(_pooled_t(a, b), np.zeros(2))

    def test_constant_unequal_columns_give_inf(self):
        a = np.full((4, 1), 3.0)
        b = np.full((5, 1), 1.0)
        assert _pooled_t(a, b)[0] == np.inf


class TestDirectionProjectionTest:
    def test_statistic_is_squared_mean_gap(self, rng):
        a, b = gaussian_groups(rng, shift=0.7)
        result = direction_projection_test(a, b, n_permutations=99, seed=0)
        expected = float(np.sum((a.mean(axis=0) - b.mean(axis=0)) ** 2))
        assert np.isclose(result.statistic, expected, atol=1e-10)

    def test_separated_clouds_reject(self, rng):
        a, b = gaussian_groups(rng, m1=20, m2=20, dim=10, shift=5.0)
        result = direction_projection_test(a, b, n_permutations=999, seed=1)
        assert result.p_value == 1.0 / 1000.0

    def test_null_is_calibrated(self, rng):
        # any single draw may land in the 5% tail; demand it stays rare
        kept = 0
        for trial in range(10):
            a, b = gaussian_groups(rng, m1=15, m2=15, dim=10, shift=0.0)
            result = direction_projection_test(a, b, n_permutations=999, seed=trial)
            kept += result.p_value > 0.05
        assert kept >= 8

    def test_deterministic_given_seed(self, rng):
        a, b = gaussian_groups(rng)
        one = direction_projection_test(a, b, n_permutations=199, seed=7)
        two = direction_projection_test(a, b, n_permutations=199, seed=7)
        assert one.p_value == two.p_value and one.statistic == two.statistic

    def test_seed_matters(self, rng):
        a, b = gaussian_groups(rng, shift=0.4)
        one = direction_projection_test(a, b, n_permutations=199, seed=1)
        two = direction_projection_test(a, b, n_permutations=199, seed=2)
        assert one.p_value != two.p_value  # generically different

    def test_small_group_rejected(self, rng):
        a, b = gaussian_groups(rng, m1=1)
        with pytest.raises(ValueError, match="two rows"):
            direction_projection_test(a, b)

    def test_width_mismatch_rejected(self, rng):
        a, _ = gaussian_groups(rng, dim=4)
        _, b = gaussian_groups(rng, dim=5)
        with pytest.raises(ValueError, match="widths"):
            direction_projection_test(a, b)


class TestPartialTests:
    def test_p_value_range(self, rng):
        a, b = gaussian_groups(rng, shift=0.5)
        result = partial_tests(a, b, n_permutations=99, seed=0)
        low = 1.0 / 100.0
        assert np.all(result.p_raw >= low) and np.all(result.p_raw <= 1.0)

    def test_shifted_feature_detected(self, rng):
        a, b = gaussian_groups(rng, m1=15, m2=15, dim=5)
        b[:, 2] += 4.0
        result = partial_tests(a, b, n_permutations=999, seed=3)
        assert result.p_raw[2] == 1.0 / 1000.0
        assert result.p_raw[2] < min(np.delete(result.p_raw, 2))

    def test_degenerate_feature_flagged(self, rng):
        a, b = gaussian_groups(rng, dim=3)
        a[:, 1] = 7.0
        b[:, 1] = 7.0
        result = partial_tests(a, b, n_permutations=99, seed=0)
        assert result.degenerate[1]
        assert result.p_raw[1] == 1.0
        assert not result.degenerate[0] and not result.degenerate[2]

    def test_constant_but_different_groups_not_degenerate(self, rng):
        a, b = gaussian_groups(rng, m1=6, m2=6, dim=2)
        a[:, 0] = 1.0
        b[:, 0] = 2.0
        result = partial_tests(a, b, n_permutations=999, seed=0)
        assert not result.degenerate[0]
        assert result.t[0] == -np.inf  # sign follows the mean difference 1 - 2
        assert result.p_raw[0] < 0.05  # only the original split reproduces +/-inf

    def test_deterministic(self, rng):
        a, b = gaussian_groups(rng)
        one = partial_tests(a, b, n_permutations=199, seed=11)
        two = partial_tests(a, b, n_permutations=199, seed=11)
        assert np.array_equal(one.p_raw, two.p_raw)

    def test_permutation_stream_derivation_is_pinned(self, rng):
        # permutation h must draw from SeedSequence(seed, spawn_key=(h,)),
        # shared by the global and partial tests — recompute by hand
        a, b = gaussian_groups(rng, m1=5, m2=4, dim=3)
        pooled = np.vstack([a, b])
        observed = _pooled_t(a, b)
        result = partial_tests(a, b, n_permutations=5, seed=23)
        counts = np.zeros(3)
        gap_counts = 0
        observed_gap = float(np.sum((a.mean(axis=0) - b.mean(axis=0)) ** 2))
        for h in range(5):
            stream = np.random.default_rng(np.random.SeedSequence(entropy=23, spawn_key=(h,)))
            order = stream.permutation(9)
            pa, pb = pooled[order[:5]], pooled[order[5:]]
            counts += np.abs(_pooled_t(pa, pb)) >= np.abs(observed)
            direction = pa.mean(axis=0) - pb.mean(axis=0)
            gap = float((pa @ direction).mean() - (pb @ direction).mean())
            gap_counts += abs(gap) >= abs(observed_gap)
        assert np.array_equal(result.p_raw, (1 + counts) / 6)
        global_result = direction_projection_test(a, b, n_permutations=5, seed=23)
        assert global_result.p_value == (1 + gap_counts) / 6


class TestThreads:
    def test_default_single(self, monkeypatch):
        monkeypatch.delenv("ETREP_THREADS", raising=False)
        assert thread_count() == 1

    def test_env_parsed(self, monkeypatch):
        monkeypatch.setenv("ETREP_THREADS", "4")
        assert thread_count() == 4

    def test_invalid_env_rejected(self, monkeypatch):
        monkeypatch.setenv("ETREP_THREADS", "zero")
        with pytest.raises(ValueError):
            thread_count()
        monkeypatch.setenv("ETREP_THREADS", "0")
        with pytest.raises(ValueError):
            thread_count()

    def test_thread_count_does_not_change_results(self, rng, monkeypatch):
        a, b = gaussian_groups(rng, shift=0.3)
        monkeypatch.setenv("ETREP_THREADS", "1")
        sequential = partial_tests(a, b, n_permutations=299, seed=17)
        monkeypatch.setenv("ETREP_THREADS", "6")
        threaded = partial_tests(a, b, n_permutations=299, seed=17)
        assert np.array_equal(sequential.p_raw, threaded.p_raw)
        assert np.array_equal(sequential.t, threaded.t)


class TestBhAdjust:
    def test_hand_example(self):
        # sorted scaling gives (0.03, 0.045, 0.04); the trailing minimum
        # pulls rank two down to 0.04 before mapping back
        adjusted = bh_adjust([0.01, 0.04, 0.03])
        assert np.allclose(adjusted, [0.03, 0.04, 0.04], atol=1e-12)

    def test_matches_oracle(self, rng):
        for _ in range(50):
            p = rng.uniform(size=int(rng.integers(1, 40)))
            assert np.array_equal(bh_adjust(p), bh_oracle(p))

    def test_matches_statsmodels(self, rng):
        from statsmodels.stats.multitest import multipletests

        for _ in range(20):
            p = rng.uniform(size=25)
            expected = multipletests(p, method="fdr_bh")[1]
            assert np.allclose(bh_adjust(p), expected, atol=1e-12)

    def test_never_decreases(self, rng):
        p = rng.uniform(size=30)
        assert np.all(bh_adjust(p) >= p - 1e-15)

    def test_ties(self):
        assert np.allclose(bh_adjust([0.5, 0.5]), [0.5, 0.5], atol=1e-15)

    def test_single_and_empty(self):
        assert bh_adjust([0.2]) == pytest.approx([0.2])
        assert bh_adjust([]).size == 0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            bh_adjust([0.5, 1.5])
        with pytest.raises(ValueError):
            bh_adjust([-0.1])


class TestTwoSampleReport:
    def build(self, rng, **kwargs):
        a, b = gaussian_groups(rng, m1=10, m2=10, dim=4, shift=kwargs.pop("shift", 0.8))
        names = tuple(f"f{k}" for k in range(4))
        return two_sample_report(
            FeatureMatrix(a, names), FeatureMatrix(b, names),
            n_permutations=199, seed=5, **kwargs,
        )

    def test_invariants(self, rng):
        report = self.build(rng)
        low = 1.0 / 200.0
        assert low <= report.global_p <= 1.0
        assert np.all(report.p_adjusted >= report.p_raw - 1e-15)
        assert np.all(report.p_adjusted <= 1.0)

    def test_to_dict_is_json_ready(self, rng):
        import json

        report = self.build(rng)
        text = json.dumps(report.to_dict(), sort_keys=True)
        assert "features" in text and "global" in text

    def test_inf_t_rendered_as_string(self, rng):
        a = np.column_stack([np.full(6, 1.0), np.random.default_rng(0).normal(size=6)])
        b = np.column_stack([np.full(6, 2.0), np.random.default_rng(1).normal(size=6)])
        names = ("const", "noise")
        report = two_sample_report(
            FeatureMatrix(a, names), FeatureMatrix(b, names), n_permutations=99, seed=0
        )
        entry = report.to_dict()["features"][0]
        assert entry["t"] in ("inf", "-inf")

    def test_alpha_masks(self, rng):
        report = self.build(rng, alpha=0.5)
        assert np.array_equal(report.significant_raw, report.p_raw <= 0.5)
        assert np.array_equal(report.significant_adjusted, report.p_adjusted <= 0.5)

    def test_alpha_validated(self, rng):
        with pytest.raises(ValueError):
            self.build(rng, alpha=0.0)

    def test_name_mismatch_rejected(self, rng):
        a, b = gaussian_groups(rng, dim=2)
        with pytest.raises(ValueError, match="names"):
            two_sample_report(
                FeatureMatrix(a, ("x", "y")), FeatureMatrix(b, ("x", "z")), n_permutations=99
            )


class TestFeatureMatrixType:
    def test_name_width_checked(self, rng):
        with pytest.raises(ValueError):
            FeatureMatrix(rng.normal(size=(3, 2)), ("only_one",))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.array([[np.inf, 0.0]]), ("a", "b"))
