"""Paired t-test and Wilcoxon signed-rank test.

Scalar entry points (``t_test``, ``wilcoxon_test`` and their building blocks)
work on one :class:`PairedSample` and return a :class:`TestResult`. The
``*_pvalues`` functions at the bottom are their vectorized counterparts for
a ``(replicates, n)`` array and are what the Monte Carlo engine calls; both
paths share the null distributions defined here.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.special import betainc, ndtr

from .errors import DegenerateSampleError, ParameterDomainError

ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True, eq=False)
class PairedSample:
    """Per-topic differences D_i = X_i - Y_i (at least two, all finite)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 2:
            raise ParameterDomainError(f"a paired sample needs n >= 2, got n={values.size}")
        if not np.all(np.isfinite(values)):
            raise ParameterDomainError("paired sample contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_scores(cls, x, y) -> "PairedSample":
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise ParameterDomainError("paired scores must have the same length")
        return cls(x - y)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return isinstance(other, PairedSample) and np.array_equal(self.values, other.values)

    def __neg__(self):
        return PairedSample(-self.values)


def as_sample(sample) -> PairedSample:
    return sample if isinstance(sample, PairedSample) else PairedSample(sample)


@dataclass(frozen=True)
class WilcoxonOptions:
    zero_policy: str = "drop"
    exact_threshold: int = 50
    continuity_correction: bool = True

    def __post_init__(self):
        if self.zero_policy not in ("drop", "pratt"):
            raise ParameterDomainError(f"zero_policy must be 'drop' or 'pratt', got {self.zero_policy!r}")
        if self.exact_threshold < 0:
            raise ParameterDomainError("exact_threshold must be >= 0")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    alternative: str = "two-sided"
    df_or_n: float = 0
    companion: float | None = None
    dropped_zeros: int = 0
    tie_groups: tuple[int, ...] = field(default_factory=tuple)

    __test__ = False  # keep pytest from collecting this class

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_value"] = float(f"{self.p_value:.6g}")
        d["tie_groups"] = list(self.tie_groups)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __str__(self):
        return f"{self.method}: statistic={self.statistic:.6g}, p={self.p_value:.6g} ({self.alternative})"


def _check_alternative(alternative: str) -> None:
    if alternative not in ALTERNATIVES:
        raise ParameterDomainError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


def _combine_tails(lower: float, upper: float, alternative: str) -> float:
    if alternative == "greater":
        p = upper
    elif alternative == "less":
        p = lower
    else:
        p = 2.0 * min(lower, upper)
    return min(1.0, max(0.0, p))


# --------------------------------------------------------------------------
# z and t


def z_statistic(sample, sigma: float) -> float:
    """Mean difference over its known standard error sigma / sqrt(n)."""
    sample = as_sample(sample)
    if not sigma > 0:
        raise ParameterDomainError(f"sigma must be > 0, got {sigma}")
    return float(np.mean(sample.values) / (sigma / math.sqrt(sample.n)))


# an sd this small relative to the data is rounding noise from a constant sample
_SD_RELATIVE_ZERO = 1e-13


def degenerate_sd(sd, scale):
    return sd <= _SD_RELATIVE_ZERO * scale


def t_statistic(sample) -> tuple[float, int]:
    sample = as_sample(sample)
    d = sample.values
    sd = float(np.std(d, ddof=1))
    if degenerate_sd(sd, float(np.max(np.abs(d)))):
        raise DegenerateSampleError("zero-variance sample: the t statistic is undefined")
    return float(np.mean(d) / (sd / math.sqrt(d.size))), d.size - 1


def t_cdf(t, df):
    """CDF of Student's t through the regularized incomplete beta function."""
    t = np.asarray(t, dtype=float)
    df = np.asarray(df, dtype=float)
    tail = 0.5 * t_two_sided_p(t, df)
    return np.where(t < 0, tail, 1.0 - tail)


def t_two_sided_p(t, df):
    """2 * P(T > |t|), computed directly (no 1 - cdf cancellation).

    Near t = 0 the argument df / (df + t^2) is close to 1 and loses digits,
    so whenever p > 1/2 the complementary form in t^2 / (df + t^2) is used.
    """
    t = np.asarray(t, dtype=float)
    df = np.asarray(df, dtype=float)
    t2 = t * t
    with np.errstate(invalid="ignore"):
        near = 1.0 - betainc(0.5, df / 2.0, t2 / (df + t2))
        far = betainc(df / 2.0, 0.5, df / (df + t2))
    return np.where(far < 0.5, far, near)


def t_test(sample, alternative: str = "two-sided") -> TestResult:
    _check_alternative(alternative)
    t, df = t_statistic(sample)
    small_tail = 0.5 * float(t_two_sided_p(t, df))
    if alternative == "two-sided":
        p = 2.0 * small_tail
    else:
        lower = small_tail if t < 0 else 1.0 - small_tail
        upper = small_tail if t > 0 else 1.0 - small_tail
        p = upper if alternative == "greater" else lower
    return TestResult(t, min(1.0, p), "t", alternative, df)


# --------------------------------------------------------------------------
# signed ranks


@dataclass(frozen=True)
class SignedRanks:
    ranks: np.ndarray  # midranks of |D_i| for the retained observations
    signs: np.ndarray  # +1 / -1 for the retained observations
    dropped_zeros: int
    tie_groups: tuple[int, ...]  # sizes of tie groups (> 1) among nonzero |D_i|
    n_ranked: int  # observations that took part in the ranking (incl. zeros under pratt)

    @property
    def n_effective(self) -> int:
        return self.ranks.size


def _midranks(a: np.ndarray) -> np.ndarray:
    order = np.argsort(a, kind="stable")
    s = a[order]
    new = np.r_[True, s[1:] != s[:-1]]
    starts = np.flatnonzero(new)
    lengths = np.diff(np.r_[starts, s.size])
    avg = starts + (lengths + 1) / 2.0
    ranks = np.empty(a.size)
    ranks[order] = np.repeat(avg, lengths)
    return ranks


def signed_ranks(sample, zero_policy: str = "drop") -> SignedRanks:
    """Midranks of |D_i| with their signs, after zero handling.

    ``drop`` removes zeros before ranking; ``pratt`` ranks them with the rest
    and then discards their ranks.
    """
    if zero_policy not in ("drop", "pratt"):
        raise ParameterDomainError(f"unknown zero policy {zero_policy!r}")
    d = as_sample(sample).values
    nonzero = d != 0
    zeros = int(d.size - nonzero.sum())
    if zeros == d.size:
        raise DegenerateSampleError("all differences are zero")
    if zero_policy == "drop":
        ranked = d[nonzero]
        ranks = _midranks(np.abs(ranked))
        n_ranked = ranked.size
    else:
        ranks = _midranks(np.abs(d))[nonzero]
        n_ranked = d.size
    kept = d[nonzero]
    _, counts = np.unique(np.abs(kept), return_counts=True)
    ties = tuple(int(c) for c in counts if c > 1)
    return SignedRanks(ranks, np.sign(kept), zeros, ties, n_ranked)


def w_plus(sample, options: WilcoxonOptions | None = None) -> float:
    """Sum of the midranks of the positive differences."""
    options = options or WilcoxonOptions()
    sr = signed_ranks(sample, options.zero_policy)
    return float(sr.ranks[sr.signs > 0].sum())


# --------------------------------------------------------------------------
# exact null distribution


def _counts_dtype(n: int):
    return np.int64 if n <= 62 else object


@lru_cache(maxsize=256)
def _null_counts(n: int) -> np.ndarray:
    counts = np.zeros(n * (n + 1) // 2 + 1, dtype=_counts_dtype(n))
    counts[0] = 1
    top = 0
    for r in range(1, n + 1):
        # include rank r or not: c_new[w] = c[w] + c[w - r]
        counts[r : top + r + 1] += counts[: top + 1].copy()
        top += r
    counts.setflags(write=False)
    return counts


def wilcoxon_null_counts(n: int) -> np.ndarray:
    """Number of sign patterns giving each W+ = 0..n(n+1)/2 (no ties).

    Standard O(n * W) dynamic programme; ``counts.sum() == 2**n``.
    """
    n = int(n)
    if n < 0:
        raise ParameterDomainError(f"n must be >= 0, got {n}")
    return _null_counts(n)


@lru_cache(maxsize=256)
def _null_tails(n: int) -> tuple[np.ndarray, np.ndarray]:
    counts = _null_counts(n)
    total = float(2**n)
    le = np.cumsum(counts.astype(float)) / total
    ge = np.cumsum(counts[::-1].astype(float))[::-1] / total
    return le, ge


def wilcoxon_exact_tail(n: int, w: float) -> float:
    """P(W+ >= w) under the exact no-ties null with n observations."""
    n = int(n)
    top = n * (n + 1) // 2
    k = math.ceil(w - 1e-9)
    if k <= 0:
        return 1.0
    if k > top:
        return 0.0
    return float(_null_tails(n)[1][k])


def wilcoxon_exact_cdf(n: int, w: float) -> float:
    """P(W+ <= w) under the exact no-ties null."""
    n = int(n)
    top = n * (n + 1) // 2
    k = math.floor(w + 1e-9)
    if k < 0:
        return 0.0
    if k >= top:
        return 1.0
    return float(_null_tails(n)[0][k])


# --------------------------------------------------------------------------
# normal approximation


def _normal_null(n_eff: int, tie_term: float, zeros: int = 0) -> tuple[float, float]:
    """Null mean and variance of W+; ``zeros`` > 0 only under pratt ranking."""
    n = n_eff + zeros
    mean = (n * (n + 1) - zeros * (zeros + 1)) / 4.0
    var = (n * (n + 1) * (2 * n + 1) - zeros * (zeros + 1) * (2 * zeros + 1)) / 24.0
    return mean, var - tie_term / 48.0


def wilcoxon_normal_approx(
    w_plus: float,
    n_eff: int,
    tie_groups: Iterable[int] = (),
    continuity_correction: bool = True,
    alternative: str = "two-sided",
    zeros: int = 0,
) -> float:
    """Large-sample p-value for W+ with tie-corrected variance.

    ``zeros`` is the number of zeros that were *ranked* (pratt policy); leave
    it at 0 when zeros were dropped.
    """
    _check_alternative(alternative)
    if n_eff < 1:
        raise DegenerateSampleError("no effective observations")
    tie_term = float(sum(t**3 - t for t in tie_groups))
    mean, var = _normal_null(n_eff, tie_term, zeros)
    if not var > 0:
        raise DegenerateSampleError("null variance of W+ is zero after tie correction")
    sd = math.sqrt(var)
    cc = 0.5 if continuity_correction else 0.0
    upper = float(ndtr(-(w_plus - mean - cc) / sd))
    lower = float(ndtr((w_plus - mean + cc) / sd))
    return _combine_tails(lower, upper, alternative)


def wilcoxon_test(sample, options: WilcoxonOptions | None = None, alternative: str = "two-sided") -> TestResult:
    """Signed-rank test, exact when small and free of ties/zeros."""
    _check_alternative(alternative)
    options = options or WilcoxonOptions()
    sr = signed_ranks(sample, options.zero_policy)
    m = sr.n_effective
    wp = float(sr.ranks[sr.signs > 0].sum())
    wm = float(sr.ranks[sr.signs < 0].sum())
    if not sr.tie_groups and sr.dropped_zeros == 0 and m <= options.exact_threshold:
        p = _combine_tails(wilcoxon_exact_cdf(m, wp), wilcoxon_exact_tail(m, wp), alternative)
        method = "wilcoxon-exact"
    else:
        zeros = sr.dropped_zeros if options.zero_policy == "pratt" else 0
        p = wilcoxon_normal_approx(
            wp, m, sr.tie_groups, options.continuity_correction, alternative, zeros
        )
        method = "wilcoxon-normal-approx"
    return TestResult(wp, p, method, alternative, m, wm, sr.dropped_zeros, sr.tie_groups)


# --------------------------------------------------------------------------
# vectorized versions for (replicates, n) arrays


def t_test_pvalues(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided t-test p-values per row, plus a mask of degenerate rows.

    Degenerate (zero-variance) rows get p = 1.
    """
    d = np.atleast_2d(np.asarray(d, dtype=float))
    n = d.shape[1]
    mean = d.mean(axis=1)
    sd = d.std(axis=1, ddof=1)
    degenerate = degenerate_sd(sd, np.abs(d).max(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = mean / (sd / math.sqrt(n))
    p = t_two_sided_p(np.where(degenerate, 0.0, t), n - 1)
    return np.where(degenerate, 1.0, p), degenerate


def _row_midranks(a: np.ndarray):
    """Midranks per row plus per-row tie statistics.

    Returns ranks, the number of zeros per row and sum(t**3 - t) over tie
    groups of nonzero values, for a non-negative array ``a``.
    """
    rows, n = a.shape
    order = np.argsort(a, axis=1, kind="stable")
    s = np.take_along_axis(a, order, axis=1)
    new = np.ones((rows, n), dtype=bool)
    new[:, 1:] = s[:, 1:] != s[:, :-1]
    flat_new = new.ravel()
    run_id = np.cumsum(flat_new) - 1
    starts = np.flatnonzero(flat_new)
    lengths = np.diff(np.append(starts, rows * n))
    avg = (starts % n) + (lengths + 1) / 2.0
    ranks = np.empty((rows, n))
    np.put_along_axis(ranks, order, avg[run_id].reshape(rows, n), axis=1)
    run_rows = starts // n
    run_is_zero = s.ravel()[starts] == 0
    zeros = np.bincount(run_rows[run_is_zero], weights=lengths[run_is_zero], minlength=rows)
    tie_w = np.where(run_is_zero, 0.0, lengths.astype(float) ** 3 - lengths)
    ties = np.bincount(run_rows, weights=tie_w, minlength=rows)
    return ranks, zeros.astype(np.int64), ties


def wilcoxon_pvalues(d: np.ndarray, options: WilcoxonOptions | None = None):
    """Two-sided signed-rank p-values per row, plus a mask of degenerate rows.

    Follows exactly the routing of :func:`wilcoxon_test`. All-zero rows are
    degenerate and get p = 1.
    """
    options = options or WilcoxonOptions()
    d = np.atleast_2d(np.asarray(d, dtype=float))
    rows, n = d.shape
    ranks, zeros, ties = _row_midranks(np.abs(d))
    positive = d > 0
    pratt = options.zero_policy == "pratt"
    if pratt:
        wp = (ranks * positive).sum(axis=1)
    else:
        # zeros occupy the lowest ranks; shifting by their count re-ranks the rest
        wp = ((ranks - zeros[:, None]) * positive).sum(axis=1)
    m = n - zeros
    degenerate = m == 0
    p = np.ones(rows)

    exact = (zeros == 0) & (ties == 0) & (n <= options.exact_threshold)
    if exact.any():
        le, ge = _null_tails(n)
        k = np.rint(wp[exact]).astype(np.int64)
        p[exact] = np.minimum(1.0, 2.0 * np.minimum(le[k], ge[k]))

    approx = ~exact & ~degenerate
    if approx.any():
        mm = m[approx].astype(float)
        zz = zeros[approx].astype(float) if pratt else np.zeros_like(mm)
        nn = mm + zz
        mean = (nn * (nn + 1) - zz * (zz + 1)) / 4.0
        var = (nn * (nn + 1) * (2 * nn + 1) - zz * (zz + 1) * (2 * zz + 1)) / 24.0 - ties[approx] / 48.0
        bad = ~(var > 0)
        sd = np.sqrt(np.where(bad, 1.0, var))
        cc = 0.5 if options.continuity_correction else 0.0
        w = wp[approx]
        upper = ndtr(-(w - mean - cc) / sd)
        lower = ndtr((w - mean + cc) / sd)
        pa = np.minimum(1.0, 2.0 * np.minimum(lower, upper))
        p[approx] = np.where(bad, 1.0, pa)
        idx = np.flatnonzero(approx)
        degenerate[idx[bad]] = True
    return p, degenerate
