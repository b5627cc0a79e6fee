import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pairedlab.errors import DegenerateSampleError, ParameterDomainError
from pairedlab.significance import (
    PairedSample,
    WilcoxonOptions,
    signed_ranks,
    t_cdf,
    t_statistic,
    t_test,
    t_test_pvalues,
    t_two_sided_p,
    w_plus,
    wilcoxon_exact_cdf,
    wilcoxon_exact_tail,
    wilcoxon_normal_approx,
    wilcoxon_null_counts,
    wilcoxon_pvalues,
    wilcoxon_test,
    z_statistic,
)

FOOTNOTE = [-0.4, -0.1, 0.4, 0.8]

mpmath.mp.dps = 40


def mp_two_sided(t, df):
    x = mpmath.mpf(df) / (df + mpmath.mpf(t) ** 2)
    return float(mpmath.betainc(mpmath.mpf(df) / 2, mpmath.mpf(1) / 2, 0, x, regularized=True))


def brute_counts(n):
    counts = np.zeros(n * (n + 1) // 2 + 1, dtype=np.int64)
    for signs in itertools.product((0, 1), repeat=n):
        counts[sum(r for r, s in zip(range(1, n + 1), signs) if s)] += 1
    return counts


finite_diffs = arrays(np.float64, st.integers(5, 40),
                      elements=st.floats(-1, 1, allow_nan=False).map(lambda v: round(v, 3)))


# ---------------------------------------------------------------- samples

def test_sample_validation():
    with pytest.raises(ParameterDomainError):
        PairedSample([1.0])
    with pytest.raises(ParameterDomainError):
        PairedSample([1.0, float("nan")])
    with pytest.raises(ParameterDomainError):
        PairedSample.from_scores([1, 2], [1, 2, 3])
    s = PairedSample.from_scores([0.5, 0.7], [0.2, 0.9])
    np.testing.assert_allclose(s.values, [0.3, -0.2])
    assert -(-s) == s


# ---------------------------------------------------------------- t / z

def test_four_topic_t():
    t, df = t_statistic(PairedSample(FOOTNOTE))
    assert df == 3
    assert t == pytest.approx(0.175 / (math.sqrt(np.var(FOOTNOTE, ddof=1)) / 2), rel=1e-12)
    assert t == pytest.approx(0.658504607868518, rel=1e-12)


def test_z_statistic():
    assert z_statistic(PairedSample(FOOTNOTE), 0.5) == pytest.approx(0.175 / 0.25)
    with pytest.raises(ParameterDomainError):
        z_statistic(PairedSample(FOOTNOTE), 0.0)


def test_zero_variance_is_degenerate():
    with pytest.raises(DegenerateSampleError):
        t_test(PairedSample([0.1, 0.1, 0.1]))


@pytest.mark.parametrize("df", [1, 2, 3, 5, 10, 30, 100, 1000, 5000])
@pytest.mark.parametrize("t", [0.0, 0.01, 0.5, 1.96, 3.0, 8.0, 25.0, 50.0])
def test_t_pvalue_matches_mpmath(t, df):
    assert abs(t_two_sided_p(t, df) - mp_two_sided(t, df)) < 1e-10


def test_t_cdf_symmetry():
    for df in (1, 4, 40):
        for t in (0.3, 2.0, 7.0):
            assert t_cdf(t, df) + t_cdf(-t, df) == pytest.approx(1.0, abs=1e-15)
            assert t_two_sided_p(t, df) == pytest.approx(2 * t_cdf(-t, df), rel=1e-12)


def test_one_sided_t():
    s = PairedSample(FOOTNOTE)
    two = t_test(s).p_value
    assert t_test(s, "greater").p_value == pytest.approx(two / 2, rel=1e-12)
    assert t_test(s, "less").p_value == pytest.approx(1 - two / 2, rel=1e-12)
    with pytest.raises(ParameterDomainError):
        t_test(s, "sideways")


# ---------------------------------------------------------------- ranks

def test_four_topic_ranks():
    sr = signed_ranks(PairedSample(FOOTNOTE))
    np.testing.assert_array_equal(sr.ranks, [2.5, 1, 2.5, 4])
    assert w_plus(PairedSample(FOOTNOTE)) == 6.5
    res = wilcoxon_test(PairedSample(FOOTNOTE))
    assert res.statistic == 6.5
    assert res.companion == 3.5
    assert res.tie_groups == (2,)
    # a tie among |D| routes to the approximation
    assert res.method == "wilcoxon-normal-approx"


def test_zero_policies():
    d = PairedSample([0.0, 0.0, 0.3, -0.1, 0.5])
    drop = signed_ranks(d, "drop")
    assert drop.dropped_zeros == 2 and drop.n_effective == 3
    np.testing.assert_array_equal(np.sort(drop.ranks), [1, 2, 3])
    pratt = signed_ranks(d, "pratt")
    np.testing.assert_array_equal(np.sort(pratt.ranks), [3, 4, 5])
    assert w_plus(d, WilcoxonOptions(zero_policy="pratt")) == 9
    with pytest.raises(DegenerateSampleError):
        wilcoxon_test(PairedSample([0.0, 0.0]))


def test_pratt_null_moments():
    # n=5 with 2 zeros: W+ over ranks {3,4,5}, each present with prob 1/2
    p = wilcoxon_normal_approx(6.0, 3, (), False, zeros=2)
    mean, var = 6.0, (9 + 16 + 25) / 4
    assert p == pytest.approx(1.0)
    p = wilcoxon_normal_approx(12.0, 3, (), False, zeros=2)
    assert p == pytest.approx(2 * (1 - 0.5 * (1 + math.erf((12 - mean) / math.sqrt(var) / math.sqrt(2)))))


# ---------------------------------------------------------------- exact distribution

@pytest.mark.parametrize("n", range(0, 13))
def test_null_counts_equal_brute_force(n):
    np.testing.assert_array_equal(np.asarray(wilcoxon_null_counts(n), dtype=np.int64), brute_counts(n))


def test_exact_tail_values():
    assert wilcoxon_exact_tail(4, 10) == 1 / 16
    assert wilcoxon_exact_tail(4, 0) == 1.0
    assert wilcoxon_exact_tail(5, 16) == 0.0
    assert wilcoxon_exact_cdf(5, 15) == 1.0


def test_n5_minimum_two_sided_p():
    ps = [wilcoxon_test(PairedSample(np.array(s) * np.arange(1, 6))).p_value
          for s in itertools.product((-1, 1), repeat=5)]
    assert min(ps) == 0.0625


def test_large_n_counts_stay_exact():
    c = wilcoxon_null_counts(70)
    assert sum(int(v) for v in c) == 2**70
    assert int(c[len(c) // 2]) == int(c[len(c) // 2 - 1 + (len(c) % 2)])


def test_normal_approx_close_to_exact_n30():
    n, top = 30, 30 * 31 // 2
    worst = 0.0
    for w in range(top + 1):
        exact = min(1.0, 2 * min(wilcoxon_exact_tail(n, w), wilcoxon_exact_cdf(n, w)))
        worst = max(worst, abs(exact - wilcoxon_normal_approx(w, n)))
    # the largest gap with continuity correction, found by this same sweep
    assert worst == pytest.approx(0.0055243315, abs=1e-9)


def test_null_mean_gives_p_one():
    assert wilcoxon_normal_approx(30 * 31 / 4, 30, (), False) == 1.0


def test_single_tie_group_variance_is_positive():
    # all |D| tied: W+ = (n+1)/2 * #positives, which still varies under the null
    p = wilcoxon_normal_approx(3 * 2.5, 4, (4,), False)
    assert 0 < p < 1


def test_exact_method_and_scale_invariance():
    d = np.array([0.31, -0.12, 0.05, 0.44, -0.27, 0.19, 0.08])
    a, b = wilcoxon_test(PairedSample(d)), wilcoxon_test(PairedSample(3.7 * d))
    assert a.method == "wilcoxon-exact"
    assert a == b


# ---------------------------------------------------------------- vectorized paths

def test_vectorized_matches_scalar():
    rng = np.random.default_rng(8)
    d = rng.normal(size=(300, 25))
    d[:40] = np.round(d[:40], 1)
    d[40:45, :4] = 0.0
    d[45] = 0.0
    d[46] = 0.3
    for opts in (WilcoxonOptions(), WilcoxonOptions(zero_policy="pratt"),
                 WilcoxonOptions(continuity_correction=False, exact_threshold=0)):
        p, deg = wilcoxon_pvalues(d, opts)
        for i, row in enumerate(d):
            try:
                want = wilcoxon_test(PairedSample(row), opts).p_value
            except DegenerateSampleError:
                assert deg[i]
                continue
            assert not deg[i]
            assert p[i] == pytest.approx(want, abs=1e-12)
    pt, degt = t_test_pvalues(d)
    assert degt[45] and degt[46]
    for i in range(45):
        assert pt[i] == pytest.approx(t_test(PairedSample(d[i])).p_value, abs=1e-12)


def test_result_serialization():
    res = wilcoxon_test(PairedSample(FOOTNOTE))
    d = res.to_dict()
    assert d["statistic"] == 6.5 and d["tie_groups"] == [2]
    assert '"method": "wilcoxon-normal-approx"' in res.to_json()
    assert res.reject(0.99) and not res.reject(0.05)


# ---------------------------------------------------------------- properties

@settings(max_examples=150, deadline=None)
@given(finite_diffs)
def test_negation_leaves_two_sided_p(d):
    assume(np.any(d != 0))
    s = PairedSample(d)
    assert wilcoxon_test(s).p_value == pytest.approx(wilcoxon_test(-s).p_value, abs=1e-12)
    if np.std(d) > 0:
        assert t_test(s).p_value == pytest.approx(t_test(-s).p_value, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(finite_diffs, st.floats(0.01, 100))
def test_positive_scaling_invariance(d, c):
    assume(np.any(d != 0))
    a = wilcoxon_test(PairedSample(d))
    b = wilcoxon_test(PairedSample(d * c))
    assert (a.statistic, a.method, a.tie_groups) == (b.statistic, b.method, b.tie_groups)
    assert a.p_value == pytest.approx(b.p_value, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(finite_diffs)
def test_rank_sums(d):
    assume(np.any(d != 0))
    res = wilcoxon_test(PairedSample(d))
    m = res.df_or_n
    assert res.statistic + res.companion == pytest.approx(m * (m + 1) / 2)
    assert 0 <= res.p_value <= 1


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40))
def test_exact_tail_nonincreasing(n):
    tails = [wilcoxon_exact_tail(n, w) for w in range(n * (n + 1) // 2 + 2)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    assert tails[0] == 1.0 and tails[-1] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.floats(0, 50), st.floats(0, 50))
def test_t_p_nonincreasing_in_abs_t(df, a, b):
    lo, hi = sorted((a, b))
    assert t_two_sided_p(lo, df) >= t_two_sided_p(hi, df)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000), st.floats(-50, 50))
def test_t_p_matches_mpmath_property(df, t):
    assert abs(t_two_sided_p(t, df) - mp_two_sided(t, df)) < 1e-10


def test_null_uniformity_n50():
    from scipy import stats
    rng = np.random.default_rng(20260417)
    d = rng.standard_normal((100_000, 50))
    pt, _ = t_test_pvalues(d)
    pw, _ = wilcoxon_pvalues(d)
    assert stats.kstest(pt, "uniform").pvalue > 1e-3
    # the exact p-values live on a lattice; jitter within one lattice step
    step = 2.0 / 2**50 * float(wilcoxon_null_counts(50).max())
    jitter = rng.uniform(-step / 2, step / 2, size=pw.size)
    assert stats.kstest(np.clip(pw + jitter, 0, 1), "uniform").pvalue > 1e-3
