"""Sampling mechanisms and exact moments for the paired-difference variable.

Every continuous family is parameterized by its shape parameters only; the
raw variate is then standardized and mapped through ``loc + scale * z`` so
that ``loc`` and ``scale`` are exactly the mean and standard deviation of the
draws. Families:

``normal``
    standard normal, no shape parameters.
``sgn``
    symmetric generalized normal with density proportional to
    ``exp(-|x|**beta)``; ``beta = 2`` is the normal, ``beta = 1`` the Laplace
    and ``beta = inf`` the uniform limit.
``agn``
    asymmetric generalized normal: the two-piece (inverse scale factor)
    skewing of an ``sgn`` base with tail parameter ``nu`` by ``xi``;
    ``xi = 1`` is symmetric and ``xi -> 1/xi`` mirrors the distribution.
``tgh``
    Tukey g-and-h, ``((exp(g*Z) - 1) / g) * exp(h*Z**2 / 2)`` of a standard
    normal ``Z`` (``Z * exp(h*Z**2/2)`` when ``g = 0``).
``ibb``
    irregular beta-binomial over a metric-difference support: ``J`` is
    BetaBin(|support| - 1, p, p) and the draw is ``support[J]`` (zero-based).
    Draws are *not* standardized, they are ``loc + scale * support[J]``.
``bimodal``
    equal-weight mixture of ``N(-delta, 1)`` and ``N(delta, 1)``.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, NamedTuple

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import DivergedMomentError, ParameterDomainError
from .rng import as_generator

FAMILY_PARAMS: dict[str, tuple[str, ...]] = {
    "normal": (),
    "sgn": ("beta",),
    "agn": ("xi", "nu"),
    "tgh": ("g", "h"),
    "ibb": ("p",),
    "bimodal": ("delta",),
}

_FAMILY_ALIASES = {
    "gaussian": "normal",
    "symmetric_generalized_normal": "sgn",
    "asymmetric_generalized_normal": "agn",
    "tukey_gh": "tgh",
    "g-and-h": "tgh",
    "irregular_beta_binomial": "ibb",
    "bimodalmixture": "bimodal",
    "bimodal_mixture": "bimodal",
}


class Moments(NamedTuple):
    mean: float
    sd: float
    skewness: float
    excess_kurtosis: float


# --------------------------------------------------------------------------
# metric supports


class MetricKind(str, enum.Enum):
    PRECISION = "P"
    RECIPROCAL_RANK = "RR"

    @classmethod
    def parse(cls, value) -> "MetricKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("@K", "").replace("_", "")
        aliases = {
            "P": cls.PRECISION,
            "PRECISION": cls.PRECISION,
            "PRECISIONATK": cls.PRECISION,
            "RR": cls.RECIPROCAL_RANK,
            "RECIPROCALRANK": cls.RECIPROCAL_RANK,
            "RECIPROCALRANKATK": cls.RECIPROCAL_RANK,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ParameterDomainError(f"unknown metric kind {value!r}") from None


@dataclass(frozen=True)
class MetricSupport:
    """Sorted set of attainable differences between two metric@k scores."""

    metric: MetricKind
    k: int
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise ParameterDomainError("a metric support needs at least two values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ParameterDomainError("support values must be strictly increasing")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)


def _round_thousandths(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Round num/den to 3 decimals, half away from zero, in exact integers."""
    mag = (2000 * np.abs(num) + den) // (2 * den)
    return np.sign(num) * mag


@lru_cache(maxsize=64)
def ibb_support(metric, k: int) -> MetricSupport:
    """All pairwise differences of metric@k scores, rounded to 3 decimals.

    >>> len(ibb_support("P", 10)), len(ibb_support("RR", 10))
    (21, 95)
    """
    metric = MetricKind.parse(metric)
    k = int(k)
    if k < 1:
        raise ParameterDomainError(f"cutoff k must be >= 1, got {k}")
    if metric is MetricKind.PRECISION:
        num = np.arange(k + 1, dtype=np.int64)
        den = np.full(k + 1, k, dtype=np.int64)
    else:
        # 0 is represented as 0/1, the rest as 1/r
        num = np.ones(k + 1, dtype=np.int64)
        num[0] = 0
        den = np.arange(k + 1, dtype=np.int64)
        den[0] = 1
    dnum = num[:, None] * den[None, :] - num[None, :] * den[:, None]
    dden = den[:, None] * den[None, :]
    thousandths = np.unique(_round_thousandths(dnum.ravel(), dden.ravel()))
    return MetricSupport(metric, k, tuple(float(t) / 1000.0 for t in thousandths))


# --------------------------------------------------------------------------
# the spec type


def _normalize_family(family: str) -> str:
    key = str(family).strip().lower()
    key = _FAMILY_ALIASES.get(key, key)
    if key not in FAMILY_PARAMS:
        raise ParameterDomainError(
            f"unknown family {family!r}; expected one of {sorted(FAMILY_PARAMS)}"
        )
    return key


@dataclass(frozen=True)
class DistributionSpec:
    """A fully parameterized sampling mechanism for D.

    ``params`` holds the family's shape parameters (see ``FAMILY_PARAMS``);
    ``support`` is required for ``ibb`` and forbidden otherwise.
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    loc: float = 0.0
    scale: float = 1.0
    support: MetricSupport | None = None

    def __post_init__(self):
        family = _normalize_family(self.family)
        object.__setattr__(self, "family", family)
        expected = FAMILY_PARAMS[family]
        params = {str(k): float(v) for k, v in dict(self.params).items()}
        missing = [name for name in expected if name not in params]
        extra = [name for name in params if name not in expected]
        if missing or extra:
            raise ParameterDomainError(
                f"{family}: expected parameters {expected}, "
                f"missing {missing}, unexpected {extra}"
            )
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "loc", float(self.loc))
        object.__setattr__(self, "scale", float(self.scale))
        if not math.isfinite(self.loc):
            raise ParameterDomainError(f"loc must be finite, got {self.loc}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterDomainError(f"scale must be positive, got {self.scale}")
        _validate_shape(family, params, self.support)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items())),
                     self.loc, self.scale, self.support))

    @property
    def is_symmetric(self) -> bool:
        f, p = self.family, self.params
        if f == "agn":
            return p["xi"] == 1.0
        if f == "tgh":
            return p["g"] == 0.0
        return True

    def with_affine(self, loc: float, scale: float) -> "DistributionSpec":
        return DistributionSpec(self.family, self.params, loc, scale, self.support)

    def describe(self) -> str:
        parts = [f"{k}={v:.10g}" for k, v in self.params.items()]
        if self.support is not None:
            parts.insert(0, f"{self.support.metric.value}@{self.support.k}")
        return f"{self.family}({', '.join(parts)})"


def _validate_shape(family: str, p: dict, support) -> None:
    def finite(name):
        if not math.isfinite(p[name]):
            raise ParameterDomainError(f"{family}: {name} must be finite, got {p[name]}")

    if family != "ibb" and support is not None:
        raise ParameterDomainError(f"{family} does not take a support")
    if family == "sgn":
        if not p["beta"] > 0:  # inf allowed: uniform limit
            raise ParameterDomainError(f"sgn: beta must be > 0, got {p['beta']}")
    elif family == "agn":
        finite("xi")
        finite("nu")
        if not (p["xi"] > 0 and p["nu"] > 0):
            raise ParameterDomainError(f"agn: xi and nu must be > 0, got {p}")
    elif family == "tgh":
        finite("g")
        finite("h")
        if p["h"] < 0:
            raise ParameterDomainError(f"tgh: h must be >= 0, got {p['h']}")
    elif family == "ibb":
        finite("p")
        if not p["p"] > 0:
            raise ParameterDomainError(f"ibb: p must be > 0, got {p['p']}")
        if not isinstance(support, MetricSupport) or len(support) < 2:
            raise ParameterDomainError("ibb: a MetricSupport with >= 2 values is required")
    elif family == "bimodal":
        finite("delta")
        if p["delta"] < 0:
            raise ParameterDomainError(f"bimodal: delta must be >= 0, got {p['delta']}")


# convenience constructors

def normal(loc=0.0, scale=1.0) -> DistributionSpec:
    return DistributionSpec("normal", {}, loc, scale)


def sgn(beta, loc=0.0, scale=1.0) -> DistributionSpec:
    return DistributionSpec("sgn", {"beta": beta}, loc, scale)


def uniform(loc=0.0, scale=1.0) -> DistributionSpec:
    """The ``beta = inf`` member of the sgn family."""
    return sgn(math.inf, loc, scale)


def agn(xi, nu=2.0, loc=0.0, scale=1.0) -> DistributionSpec:
    return DistributionSpec("agn", {"xi": xi, "nu": nu}, loc, scale)


def tgh(g, h=0.0, loc=0.0, scale=1.0) -> DistributionSpec:
    return DistributionSpec("tgh", {"g": g, "h": h}, loc, scale)


def ibb(support: MetricSupport, p, loc=0.0, scale=1.0) -> DistributionSpec:
    return DistributionSpec("ibb", {"p": p}, loc, scale, support)


def bimodal(delta, loc=0.0, scale=1.0) -> DistributionSpec:
    return DistributionSpec("bimodal", {"delta": delta}, loc, scale)


# --------------------------------------------------------------------------
# raw moments of the unstandardized variates


def _gn_abs_moment(r: int, beta: float) -> float:
    """E|X|**r for the density proportional to exp(-|x|**beta)."""
    if math.isinf(beta):
        return 1.0 / (r + 1)
    return math.exp(gammaln((r + 1) / beta) - gammaln(1.0 / beta))


def sgn_excess_kurtosis(beta: float) -> float:
    """Gamma(5/b) Gamma(1/b) / Gamma(3/b)**2 - 3, decreasing from +inf to -1.2."""
    beta = float(beta)
    if not beta > 0:
        raise ParameterDomainError(f"beta must be > 0, got {beta}")
    if math.isinf(beta):
        return -1.2
    return math.exp(gammaln(5 / beta) + gammaln(1 / beta) - 2 * gammaln(3 / beta)) - 3.0


def _agn_raw_moment(r: int, xi: float, nu: float) -> float:
    m = _gn_abs_moment(r, nu)
    sign = -1.0 if r % 2 else 1.0
    return m * (xi ** (r + 1) + sign * xi ** -(r + 1)) / (xi + 1.0 / xi)


@lru_cache(maxsize=None)
def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


def _tgh_raw_moment(r: int, g: float, h: float) -> float:
    """E[T**r] for the g-and-h transform of a standard normal."""
    if r == 0:
        return 1.0
    c = 1.0 - r * h
    if c <= 0:
        raise DivergedMomentError(f"tgh moment of order {r} diverges for h={h} (needs h < 1/{r})")
    if abs(g) > 0.5:
        # r-th finite difference of expm1(k**2 s); expm1 keeps it accurate
        s = g * g / (2 * c)
        acc = math.fsum(
            math.comb(r, k) * (-1) ** (r - k) * math.expm1(k * k * s) for k in range(1, r + 1)
        )
        return acc / (g**r * math.sqrt(c))
    # same quantity expanded in powers of g**2, using
    #   sum_k C(r,k) (-1)**(r-k) k**(2j) = r! S(2j, r)
    total = 0.0
    for j in range((r + 1) // 2, 200):
        if g == 0.0 and 2 * j > r:
            break
        term = (
            math.factorial(r) * _stirling2(2 * j, r) / math.factorial(j)
            * g ** (2 * j - r) / (2 * c) ** j
        )
        total += term
        if j > r and abs(term) < 1e-17 * abs(total):
            break
    return total / math.sqrt(c)


def _bimodal_raw_moment(r: int, delta: float) -> float:
    if r % 2:
        return 0.0
    # E[(delta + Z)**r]; odd powers of Z vanish
    return float(sum(
        math.comb(r, k) * delta ** (r - k) * _double_factorial(k - 1)
        for k in range(0, r + 1, 2)
    ))


def _double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * _double_factorial(n - 2)


def ibb_pmf(support: MetricSupport, p: float) -> np.ndarray:
    """P(D = support[j]) for j = 0..|support|-1."""
    n = len(support) - 1
    pmf = stats.betabinom(n, p, p).pmf(np.arange(n + 1))
    return pmf / pmf.sum()


def _central_from_raw(raw: list[float]) -> list[float]:
    """Central moments mu_0..mu_R from raw moments m_0..m_R."""
    mean = raw[1]
    out = []
    for r in range(len(raw)):
        out.append(math.fsum(
            math.comb(r, k) * raw[k] * (-mean) ** (r - k) for k in range(r + 1)
        ))
    return out


def raw_central_moments(spec: DistributionSpec, order: int = 4) -> tuple[float, list[float]]:
    """Mean and central moments ``mu_0..mu_order`` of the *raw* variate.

    The raw variate is the family's unstandardized draw (for ``ibb`` the
    support value itself). Odd central moments of symmetric members are
    returned as exact zeros.
    """
    f, p = spec.family, spec.params
    if f == "ibb":
        pmf = ibb_pmf(spec.support, p["p"])
        x = spec.support.array
        central = [1.0] + [0.0 if r % 2 else float(np.dot(pmf, x**r)) for r in range(1, order + 1)]
        return 0.0, central
    if f == "normal":
        raw = [float(_double_factorial(r - 1)) if r % 2 == 0 else 0.0 for r in range(order + 1)]
    elif f == "sgn":
        raw = [0.0 if r % 2 else _gn_abs_moment(r, p["beta"]) for r in range(order + 1)]
    elif f == "agn":
        raw = [_agn_raw_moment(r, p["xi"], p["nu"]) for r in range(order + 1)]
    elif f == "tgh":
        raw = [_tgh_raw_moment(r, p["g"], p["h"]) for r in range(order + 1)]
    else:
        raw = [_bimodal_raw_moment(r, p["delta"]) for r in range(order + 1)]
    if not all(math.isfinite(m) for m in raw):
        raise DivergedMomentError(f"{spec.describe()}: moments up to order {order} are not finite")
    central = _central_from_raw(raw)
    central[1] = 0.0
    if spec.is_symmetric:
        central = [0.0 if r % 2 else m for r, m in enumerate(central)]
    return raw[1], central


def standardized_moments(spec: DistributionSpec, order: int = 4) -> list[float]:
    """Standardized central moments E[((X - mu)/sigma)**r] for r = 0..order."""
    _, central = raw_central_moments(spec, max(order, 2))
    var = central[2]
    if not var > 0:
        raise DivergedMomentError(f"{spec.describe()} has zero variance")
    return [m / var ** (r / 2) for r, m in enumerate(central[: order + 1])]


def theoretical_moments(spec: DistributionSpec) -> Moments:
    """Mean, sd, skewness and excess kurtosis of draws from ``spec``."""
    mean_raw, central = raw_central_moments(spec, 4)
    var = central[2]
    if not var > 0:
        raise DivergedMomentError(f"{spec.describe()} has zero variance")
    skew = central[3] / var**1.5
    kurt = central[4] / var**2 - 3.0
    if spec.family == "ibb":
        return Moments(spec.loc + spec.scale * mean_raw, spec.scale * math.sqrt(var), skew, kurt)
    return Moments(spec.loc, spec.scale, skew, kurt)


def agn_moments(xi: float, nu: float) -> tuple[float, float]:
    """(skewness, excess kurtosis) of the asymmetric generalized normal."""
    m = theoretical_moments(agn(xi, nu))
    return m.skewness, m.excess_kurtosis


def tgh_moments(g: float, h: float) -> tuple[float, float]:
    """(skewness, excess kurtosis) of Tukey g-and-h; needs h < 1/4."""
    if h >= 0.25:
        raise DivergedMomentError(f"tgh kurtosis diverges for h={h} >= 1/4")
    m = theoretical_moments(tgh(g, h))
    return m.skewness, m.excess_kurtosis


# --------------------------------------------------------------------------
# sampling


def _raw_draws(spec: DistributionSpec, size, rng: np.random.Generator) -> np.ndarray:
    f, p = spec.family, spec.params
    if f == "normal":
        return rng.standard_normal(size)
    if f == "sgn":
        beta = p["beta"]
        if math.isinf(beta):
            return rng.uniform(-1.0, 1.0, size)
        mag = rng.standard_gamma(1.0 / beta, size) ** (1.0 / beta)
        return np.where(rng.random(size) < 0.5, -mag, mag)
    if f == "agn":
        xi, nu = p["xi"], p["nu"]
        mag = rng.standard_gamma(1.0 / nu, size) ** (1.0 / nu)
        positive = rng.random(size) < xi * xi / (1.0 + xi * xi)
        return np.where(positive, mag * xi, -mag / xi)
    if f == "tgh":
        g, h = p["g"], p["h"]
        z = rng.standard_normal(size)
        x = z if g == 0.0 else np.expm1(g * z) / g
        return x if h == 0.0 else x * np.exp(0.5 * h * z * z)
    if f == "ibb":
        n = len(spec.support) - 1
        pp = p["p"]
        j = rng.binomial(n, rng.beta(pp, pp, size))
        return spec.support.array[j]
    delta = p["delta"]
    centers = np.where(rng.random(size) < 0.5, -delta, delta)
    return centers + rng.standard_normal(size)


def sample(spec: DistributionSpec, count, stream=None) -> np.ndarray:
    """Draw ``count`` values (an int or a shape tuple) from ``spec``.

    ``stream`` may be a :class:`~pairedlab.rng.RandomStream`, a numpy
    Generator or an integer seed.
    """
    shape = (int(count),) if np.ndim(count) == 0 else tuple(int(c) for c in count)
    if any(c < 0 for c in shape):
        raise ParameterDomainError(f"count must be non-negative, got {count}")
    rng = as_generator(stream)
    x = _raw_draws(spec, shape, rng)
    if spec.family == "ibb":
        if spec.loc == 0.0 and spec.scale == 1.0:
            return x
        return spec.loc + spec.scale * x
    mean_raw, central = raw_central_moments(spec, 2)
    sd_raw = math.sqrt(central[2])
    if mean_raw == 0.0 and sd_raw == 1.0 and spec.loc == 0.0 and spec.scale == 1.0:
        return x
    return spec.loc + spec.scale * ((x - mean_raw) / sd_raw)


def sample_ibb(support: MetricSupport, p: float, count, stream=None) -> np.ndarray:
    """Draws ``support[J]`` with ``J ~ BetaBin(|support| - 1, p, p)``."""
    return sample(ibb(support, p), count, stream)


# --------------------------------------------------------------------------
# key = value config files


def spec_to_config(spec: DistributionSpec) -> str:
    lines = [f"family = {spec.family}"]
    if spec.support is not None:
        lines.append(f"metric = {spec.support.metric.value}")
        lines.append(f"k = {spec.support.k}")
    lines += [f"{k} = {v!r}" for k, v in spec.params.items()]
    lines.append(f"loc = {spec.loc!r}")
    lines.append(f"scale = {spec.scale!r}")
    return "\n".join(lines) + "\n"


def spec_from_config(text: str) -> DistributionSpec:
    """Parse the ``key = value`` format written by :func:`spec_to_config`.

    Blank lines and ``#`` comments are ignored. ``loc`` and ``scale`` default
    to 0 and 1. For ``ibb`` the support is rebuilt from ``metric`` and ``k``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[spec]\n" + text)
    except configparser.Error as exc:
        raise ParameterDomainError(f"bad spec config: {exc.message}") from exc
    entries = dict(parser["spec"])
    if "family" not in entries:
        raise ParameterDomainError("spec config has no 'family' entry")
    family = _normalize_family(entries.pop("family"))
    try:
        loc = float(entries.pop("loc", 0.0))
        scale = float(entries.pop("scale", 1.0))
        support = None
        if family == "ibb":
            support = ibb_support(entries.pop("metric", "P"), int(entries.pop("k")))
        params = {k: float(v) for k, v in entries.items()}
    except (KeyError, ValueError) as exc:
        raise ParameterDomainError(f"bad spec config: {exc}") from exc
    return DistributionSpec(family, params, loc, scale, support)
