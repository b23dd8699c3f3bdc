from itertools import combinations

import numpy as np
import pytest
from scipy import special, stats as scipy_stats
from statsmodels.stats.diagnostic import lilliefors as statsmodels_lilliefors
from statsmodels.stats.weightstats import ttest_ind as statsmodels_ttest_ind

from posture.errors import DimensionMismatchError, NonFiniteInputError, TooFewDistinctError, TooFewSamplesError
from posture.hand_model import HandModel
from posture.prior import PoseSet
from posture.stats import (
    ErrorSummary,
    TestKind,
    TestResult,
    levene_variance_test,
    lilliefors_normality,
    lilliefors_null_table,
    mann_whitney_u,
    pose_errors,
    reported_p_value,
    select_and_compare,
    t_test_equal_var,
    t_test_welch,
    welch_satterthwaite_df,
)

SMALL_A = np.array([8.1, 9.3, 7.6, 10.2, 9.9, 8.8])
SMALL_B = np.array([12.4, 6.1, 14.0, 9.2, 4.7, 11.8, 13.5])


def _generator(seed):
    return np.random.Generator(np.random.PCG64(seed))


# Errores

def test_identical_estimates_have_zero_error(hand, rng):
    poses = PoseSet(hand, rng.normal(30, 10, size=(6, 15)))
    summary = pose_errors(poses, poses)
    assert summary.pose_mean == 0.0 and summary.pose_max == 0.0
    np.testing.assert_array_equal(summary.per_dof_errors, np.zeros((15, 6)))


def test_constant_offset(hand, rng):
    reference = PoseSet(hand, rng.normal(30, 10, size=(6, 15)))
    shifted = PoseSet(hand, reference.poses + 1.0)
    summary = pose_errors(shifted, reference)
    np.testing.assert_allclose(summary.per_pose_errors, np.ones(6))
    assert summary.pose_std == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(summary.dof_mean, np.ones(15))


def test_single_dof_error_is_averaged(hand):
    reference = PoseSet(hand, np.zeros((1, 15)))
    estimate = np.zeros((1, 15))
    estimate[0, 14] = -15.0
    summary = pose_errors(PoseSet(hand, estimate), reference)
    np.testing.assert_allclose(summary.per_pose_errors, [1.0])
    assert summary.dof_max[14] == 15.0
    assert summary.pose_std == 0.0


def test_summary_statistics(hand, rng):
    reference = PoseSet(hand, rng.normal(30, 10, size=(20, 15)))
    estimates = PoseSet(hand, reference.poses + rng.normal(0, 5, size=(20, 15)))
    summary = pose_errors(estimates, reference)
    assert summary.dof_names == hand.names
    assert np.all(summary.per_dof_errors >= 0)
    assert summary.pose_mean <= summary.pose_max
    assert np.all(summary.dof_mean <= summary.dof_max)
    assert summary.pose_std == pytest.approx(np.std(summary.per_pose_errors, ddof=1))

    restored = ErrorSummary.from_dict(summary.to_dict())
    np.testing.assert_array_equal(restored.per_dof_errors, summary.per_dof_errors)
    np.testing.assert_array_equal(restored.per_pose_errors, summary.per_pose_errors)
    assert restored.dof_names == summary.dof_names


def test_pose_errors_dimension_checks(hand, two_dof):
    with pytest.raises(DimensionMismatchError):
        pose_errors(PoseSet(hand, np.zeros((3, 15))), PoseSet(hand, np.zeros((4, 15))))
    other = HandModel.from_names(list(hand.names[::-1]))
    with pytest.raises(DimensionMismatchError):
        pose_errors(PoseSet(other, np.zeros((3, 15))), PoseSet(hand, np.zeros((3, 15))))


# Convención de p-valores

@pytest.mark.parametrize("p, expected", [
    (5e-5, 0.0),
    (0.0, 0.0),
    (1e-4, 0.0001),
    (0.034567, 0.0346),
    (0.99996, 1.0),
])
def test_reported_p_value(p, expected):
    assert reported_p_value(p) == expected


def test_result_flags_and_serialization():
    result = TestResult(statistic=2.5, p_value=0.012345, test_kind=TestKind.TNEQ, df=17.3)
    assert result.significant_at_5pct
    assert result.reported_p == 0.0123
    data = result.to_dict()
    assert data["test_kind"] == "Tneq"
    assert TestResult.from_dict(data) == result
    assert not TestResult(0.0, 0.05, TestKind.U).significant_at_5pct


# Lilliefors

def test_lilliefors_statistic_matches_statsmodels(rng):
    sample = rng.normal(10.0, 3.0, size=40)
    expected, _ = statsmodels_lilliefors(sample, dist="norm", pvalmethod="table")
    result = lilliefors_normality(sample)
    assert result.test_kind is TestKind.LILLIEFORS
    assert result.statistic == pytest.approx(expected, rel=1e-10)


def test_lilliefors_p_value_matches_independent_simulation(rng):
    sample = rng.normal(size=20)
    result = lilliefors_normality(sample)

    other = _generator(777)
    reps = 5000
    exceed = 0
    for _ in range(reps):
        draw = other.standard_normal(20)
        statistic = scipy_stats.kstest(draw, "norm", args=(draw.mean(), draw.std(ddof=1))).statistic
        exceed += statistic >= result.statistic
    assert result.p_value == pytest.approx(exceed / reps, abs=0.03)


def test_lilliefors_rejects_exponential(rng):
    assert lilliefors_normality(rng.exponential(size=200)).p_value < 0.05


def test_lilliefors_degenerate_inputs():
    with pytest.raises(TooFewSamplesError):
        lilliefors_normality([1.0, 2.0, 3.0])
    with pytest.raises(TooFewDistinctError):
        lilliefors_normality(np.full(10, 4.2))
    with pytest.raises(NonFiniteInputError):
        lilliefors_normality([1.0, 2.0, np.nan, 4.0])


def test_null_table_is_cached_on_disk(cache_dir):
    table = lilliefors_null_table(8, replicates=1000, seed=7)
    path = cache_dir / "lilliefors_n8_r1000_s7.npy"
    assert path.exists()
    assert table.shape == (1000,)
    assert np.all(np.diff(table) >= 0)
    assert not table.flags.writeable
    assert lilliefors_null_table(8, replicates=1000, seed=7) is table

    lilliefors_null_table.cache_clear()
    np.testing.assert_array_equal(lilliefors_null_table(8, replicates=1000, seed=7), table)
    np.testing.assert_array_equal(np.load(path), table)


def test_null_table_depends_on_seed():
    first = lilliefors_null_table(8, replicates=1000, seed=7)
    second = lilliefors_null_table(8, replicates=1000, seed=8)
    assert not np.array_equal(first, second)


def test_lilliefors_extreme_statistic_gives_zero_p():
    sample = np.array([0.0] * 30 + [100.0] * 2)
    result = lilliefors_normality(sample)
    assert result.p_value == 0.0
    assert result.reported_p == 0.0


# Levene

def test_levene_same_sample(rng):
    sample = rng.normal(size=30)
    result = levene_variance_test(sample, sample)
    assert result.p_value == pytest.approx(1.0, abs=1e-12)
    assert result.test_kind is TestKind.LEVENE
    assert result.df == 58


def test_levene_detects_different_variances(rng):
    assert levene_variance_test(rng.normal(0, 1, 200), rng.normal(0, 5, 200)).p_value < 0.01


def test_levene_matches_anova_on_deviations():
    groups = [SMALL_A, SMALL_B]
    deviations = [np.abs(g - g.mean()) for g in groups]
    total = np.concatenate(deviations)
    N, k = total.size, 2
    between = sum(d.size * (d.mean() - total.mean()) ** 2 for d in deviations)
    within = sum(np.sum((d - d.mean()) ** 2) for d in deviations)
    F = (N - k) * between / ((k - 1) * within)

    result = levene_variance_test(SMALL_A, SMALL_B)
    assert result.statistic == pytest.approx(F, rel=1e-10)
    assert result.p_value == pytest.approx(special.fdtrc(k - 1, N - k, F), abs=1e-6)


def test_levene_median_variant():
    expected = scipy_stats.levene(SMALL_A, SMALL_B, center="median")
    result = levene_variance_test(SMALL_A, SMALL_B, center="median")
    assert result.p_value == pytest.approx(expected.pvalue)


def test_levene_constant_samples():
    result = levene_variance_test(np.ones(5), np.full(6, 3.0))
    assert result.statistic == 0.0
    assert result.p_value == 1.0


# t de Student

def test_t_tests_on_identical_samples(rng):
    sample = rng.normal(size=12)
    for test in (t_test_equal_var, t_test_welch):
        result = test(sample, sample)
        assert result.statistic == pytest.approx(0.0, abs=1e-12)
        assert result.p_value == pytest.approx(1.0)


def test_welch_df_reduces_with_equal_variances():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert welch_satterthwaite_df(a, a + 10.0) == pytest.approx(8.0, rel=1e-12)
    assert t_test_welch(a, a + 10.0).df == pytest.approx(8.0, rel=1e-12)


def test_equal_variance_t_matches_closed_form():
    n1, n2 = SMALL_A.size, SMALL_B.size
    pooled = ((n1 - 1) * SMALL_A.var(ddof=1) + (n2 - 1) * SMALL_B.var(ddof=1)) / (n1 + n2 - 2)
    t = (SMALL_A.mean() - SMALL_B.mean()) / np.sqrt(pooled * (1 / n1 + 1 / n2))

    result = t_test_equal_var(SMALL_A, SMALL_B)
    assert result.test_kind is TestKind.TEQ
    assert result.df == n1 + n2 - 2
    assert result.statistic == pytest.approx(t, rel=1e-12)
    assert result.p_value == pytest.approx(2 * special.stdtr(n1 + n2 - 2, -abs(t)), abs=1e-8)


def test_welch_t_matches_closed_form():
    _, _, df = statsmodels_ttest_ind(SMALL_A, SMALL_B, usevar="unequal")
    t = (SMALL_A.mean() - SMALL_B.mean()) / np.sqrt(
        SMALL_A.var(ddof=1) / SMALL_A.size + SMALL_B.var(ddof=1) / SMALL_B.size)

    result = t_test_welch(SMALL_A, SMALL_B)
    assert result.test_kind is TestKind.TNEQ
    assert result.df == pytest.approx(df, rel=1e-10)
    assert result.statistic == pytest.approx(t, rel=1e-12)
    assert result.p_value == pytest.approx(2 * special.stdtr(df, -abs(t)), abs=1e-8)


def test_t_tests_on_constant_samples():
    same = t_test_equal_var(np.full(4, 2.0), np.full(5, 2.0))
    assert same.statistic == 0.0 and same.p_value == 1.0
    apart = t_test_welch(np.full(4, 1.0), np.full(5, 2.0))
    assert apart.statistic == -np.inf and apart.p_value == 0.0


def test_t_tests_need_two_samples():
    with pytest.raises(TooFewSamplesError):
        t_test_equal_var([1.0], [1.0, 2.0])


# Mann-Whitney

def _brute_force_p(a, b):
    pooled = np.concatenate([a, b])
    doubled = np.rint(2 * scipy_stats.rankdata(pooled)).astype(int)
    observed = doubled[:len(a)].sum()
    sums = np.array([doubled[list(chosen)].sum() for chosen in combinations(range(pooled.size), len(a))])
    lower = np.mean(sums <= observed)
    upper = np.mean(sums >= observed)
    return min(1.0, 2 * min(lower, upper))


def test_mann_whitney_identical_samples():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    result = mann_whitney_u(a, a.copy())
    assert result.statistic == 12.5
    assert result.p_value == pytest.approx(1.0)
    assert result.test_kind is TestKind.U


def test_mann_whitney_complete_separation():
    result = mann_whitney_u([1.0, 2.0, 3.0, 4.0, 5.0], [6.0, 7.0, 8.0, 9.0, 10.0])
    assert result.statistic == 0.0
    assert result.p_value == pytest.approx(2 / 252, rel=1e-12)


@pytest.mark.parametrize("a, b", [
    ([1.1, 2.4, 3.9], [0.5, 2.8, 4.4, 5.0]),
    ([3.0, 3.0, 1.0, 2.0], [3.0, 4.0, 4.0, 0.5, 2.0]),
    ([10.0, 11.0, 12.0, 13.0, 14.0, 15.0], [1.0, 12.0, 12.0, 20.0, 21.0, 22.0]),
    ([5.0, 5.0, 5.0, 6.0, 7.0], [5.0, 6.0, 6.0, 8.0, 9.0, 9.0, 2.0]),
    ([0.2, 0.9], [0.1, 0.4, 0.7, 0.8, 1.5, 1.6, 1.7, 2.5, 3.0, 3.3]),
])
def test_mann_whitney_exact_matches_enumeration(a, b):
    a, b = np.array(a), np.array(b)
    assert a.size + b.size <= 12
    assert mann_whitney_u(a, b).p_value == pytest.approx(_brute_force_p(a, b), rel=1e-12, abs=1e-15)


def test_mann_whitney_asymptotic_with_ties(rng):
    a = np.round(rng.normal(10, 3, size=15))
    b = np.round(rng.normal(12, 3, size=12))
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    N = pooled.size
    ranks = scipy_stats.rankdata(pooled)
    u1 = ranks[:n1].sum() - n1 * (n1 + 1) / 2
    _, counts = np.unique(pooled, return_counts=True)
    variance = n1 * n2 / 12 * ((N + 1) - np.sum(counts ** 3 - counts) / (N * (N - 1)))
    z = (abs(u1 - n1 * n2 / 2) - 0.5) / np.sqrt(variance)
    expected = min(1.0, 2 * scipy_stats.norm.sf(z))

    result = mann_whitney_u(a, b)
    assert result.statistic == min(u1, n1 * n2 - u1)
    assert result.p_value == pytest.approx(expected, rel=1e-10)


def test_mann_whitney_constant_large_samples():
    result = mann_whitney_u(np.ones(15), np.ones(15))
    assert result.p_value == 1.0


def test_tests_are_symmetric():
    for test in (levene_variance_test, t_test_equal_var, t_test_welch, mann_whitney_u):
        forward = test(SMALL_A, SMALL_B)
        backward = test(SMALL_B, SMALL_A)
        assert forward.p_value == pytest.approx(backward.p_value, rel=1e-12, abs=1e-15)


def test_p_values_are_probabilities(rng):
    for _ in range(20):
        a = rng.normal(size=8)
        b = rng.normal(1.0, 2.0, size=9)
        for test in (levene_variance_test, t_test_equal_var, t_test_welch, mann_whitney_u, select_and_compare):
            assert 0.0 <= test(a, b).p_value <= 1.0


# Cascada

def test_cascade_needs_four_samples():
    with pytest.raises(TooFewSamplesError):
        select_and_compare([1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0])


def test_cascade_constant_sample_goes_to_u(rng):
    result = select_and_compare(np.zeros(10), rng.normal(size=10))
    assert result.test_kind is TestKind.U


def test_cascade_equal_variances():
    kinds = [select_and_compare(rng.normal(0, 1, 200), rng.normal(0.3, 1, 200)).test_kind
             for rng in map(_generator, range(40))]
    assert kinds.count(TestKind.TEQ) >= 28


def test_cascade_different_variances():
    kinds = [select_and_compare(rng.normal(0, 1, 200), rng.normal(0, 5, 200)).test_kind
             for rng in map(_generator, range(100, 140))]
    assert kinds.count(TestKind.TNEQ) >= 30


def test_cascade_non_normal_sample():
    kinds = [select_and_compare(rng.uniform(0, 1, 1000), rng.normal(0.5, 0.3, 1000)).test_kind
             for rng in map(_generator, range(200, 220))]
    assert kinds.count(TestKind.U) >= 18


# Tamaño y potencia

@pytest.mark.slow
def test_lilliefors_size_and_power():
    rng = _generator(2024)
    rejections = np.mean([lilliefors_normality(rng.normal(size=500)).p_value < 0.05 for _ in range(1000)])
    assert rejections <= 0.07
    power = np.mean([lilliefors_normality(rng.uniform(size=500)).p_value < 0.05 for _ in range(200)])
    assert power >= 0.95


@pytest.mark.slow
@pytest.mark.parametrize("test", [
    lambda a, b: lilliefors_normality(a),
    levene_variance_test,
    t_test_equal_var,
    t_test_welch,
    mann_whitney_u,
], ids=["lilliefors", "levene", "teq", "tneq", "u"])
def test_null_rejection_rate(test):
    rng = _generator(99)
    rejections = 0
    for _ in range(1000):
        a = rng.normal(20.0, 4.0, size=30)
        b = rng.normal(20.0, 4.0, size=30)
        rejections += test(a, b).p_value < 0.05
    assert 0.03 <= rejections / 1000 <= 0.07
