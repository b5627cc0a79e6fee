"""Score matrices, paired differences and moment diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateSampleError,
    DuplicateKeyError,
    InsufficientSystemsError,
    ParseError,
    RaggedInputError,
)
from .rng import as_generator
from .significance import (
    degenerate_sd,
    PairedSample,
    TestResult,
    WilcoxonOptions,
    as_sample,
    t_test,
    wilcoxon_test,
)

ASYMMETRY_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """topics x systems matrix of per-topic metric scores."""

    topics: tuple[str, ...]
    systems: tuple[str, ...]
    scores: np.ndarray
    metric: str = ""

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        object.__setattr__(self, "topics", tuple(str(t) for t in self.topics))
        object.__setattr__(self, "systems", tuple(str(s) for s in self.systems))
        if scores.shape != (len(self.topics), len(self.systems)):
            raise RaggedInputError(
                f"scores have shape {scores.shape}, expected {(len(self.topics), len(self.systems))}"
            )
        if not np.all(np.isfinite(scores)):
            raise ParseError("score matrix contains non-finite values")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    def __eq__(self, other):
        return (
            isinstance(other, ScoreMatrix)
            and self.topics == other.topics
            and self.systems == other.systems
            and self.metric == other.metric
            and np.array_equal(self.scores, other.scores)
        )

    def column(self, system: str) -> np.ndarray:
        return self.scores[:, self.systems.index(system)]


def _parse_float(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric score {text!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite score {text!r}", line)
    return value


def _read_wide(text: str, metric: str) -> ScoreMatrix:
    rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text)), 1)
            if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ParseError("empty score file")
    header_line, header = rows[0]
    systems = [s.strip() for s in header[1:]]
    if not systems:
        raise ParseError("header names no systems", header_line)
    if len(set(systems)) != len(systems):
        raise DuplicateKeyError("duplicate system id in header", header_line)
    topics, scores = [], []
    for line, row in rows[1:]:
        topic = row[0].strip()
        if len(row) - 1 != len(systems):
            raise RaggedInputError(
                f"line {line}: topic {topic!r} has {len(row) - 1} scores for {len(systems)} systems",
                topic,
            )
        if topic in topics:
            raise DuplicateKeyError(f"duplicate topic {topic!r}", line)
        topics.append(topic)
        scores.append([_parse_float(v.strip(), line) for v in row[1:]])
    if not topics:
        raise ParseError("score file has a header but no topics")
    return ScoreMatrix(tuple(topics), tuple(systems), np.array(scores), metric)


def _read_long(text: str, metric: str) -> ScoreMatrix:
    cells: dict[tuple[str, str], float] = {}
    systems: list[str] = []
    topics: list[str] = []
    for line, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'system topic score', got {raw!r}", line)
        system, topic, value = parts
        key = (system, topic)
        if key in cells:
            raise DuplicateKeyError(f"duplicate entry for system {system!r}, topic {topic!r}", line)
        cells[key] = _parse_float(value, line)
        if system not in systems:
            systems.append(system)
        if topic not in topics:
            topics.append(topic)
    if not cells:
        raise ParseError("empty score file")
    scores = np.empty((len(topics), len(systems)))
    for j, system in enumerate(systems):
        for i, topic in enumerate(topics):
            try:
                scores[i, j] = cells[(system, topic)]
            except KeyError:
                raise RaggedInputError(f"system {system!r} has no score for topic {topic!r}", topic) from None
    return ScoreMatrix(tuple(topics), tuple(systems), scores, metric)


def _sniff(text: str) -> str:
    for raw in text.splitlines():
        if raw.strip() and not raw.lstrip().startswith("#"):
            return "wide" if "," in raw else "long"
    return "wide"


def load_score_matrix(path, format: str = "auto", metric: str = "") -> ScoreMatrix:
    """Read a score matrix.

    ``wide``: CSV whose header row holds the system ids after a first
    (topic) column, one row per topic. ``long``: whitespace-separated
    ``system topic score`` triplets. ``auto`` picks ``wide`` when the first
    data line contains a comma.
    """
    text = Path(path).read_text(encoding="utf-8")
    fmt = _sniff(text) if format == "auto" else format
    if fmt == "wide":
        return _read_wide(text, metric)
    if fmt == "long":
        return _read_long(text, metric)
    raise ValueError(f"unknown score-file format {format!r}")


def write_wide_csv(matrix: ScoreMatrix, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topic", *matrix.systems])
    for topic, row in zip(matrix.topics, matrix.scores):
        w.writerow([topic, *(repr(float(v)) for v in row)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def paired_differences(matrix: ScoreMatrix) -> dict[tuple[str, str], PairedSample]:
    """D = A - B for every unordered pair, A before B in input order."""
    if len(matrix.systems) < 2:
        raise InsufficientSystemsError(f"need at least 2 systems, got {len(matrix.systems)}")
    return {
        (matrix.systems[a], matrix.systems[b]): PairedSample(matrix.scores[:, a] - matrix.scores[:, b])
        for a, b in combinations(range(len(matrix.systems)), 2)
    }


def sample_moments(sample) -> tuple[float, float]:
    """Sample skewness m3/m2**1.5 and excess kurtosis m4/m2**2 - 3.

    Plain central moments with denominator n, no small-sample correction.
    """
    d = np.asarray(sample.values if isinstance(sample, PairedSample) else sample, dtype=float)
    if d.size < 4:
        raise DegenerateSampleError(f"sample moments need n >= 4, got {d.size}")
    c = d - d.mean()
    m2 = np.mean(c**2)
    if degenerate_sd(math.sqrt(m2), float(np.max(np.abs(d)))):
        raise DegenerateSampleError("zero-variance sample")
    m3 = np.mean(c**3)
    m4 = np.mean(c**4)
    return float(m3 / m2**1.5), float(m4 / m2**2 - 3.0)


def resample_mode(n: int, n_target: int) -> str:
    if n == n_target:
        return "identity"
    return "subsample" if n > n_target else "upsample"


def resample_to_n(sample, n_target: int, stream=None) -> np.ndarray:
    """Subsample without replacement (n > n_target) or draw with replacement
    (n < n_target); identity when the sizes match."""
    d = np.asarray(sample.values if isinstance(sample, PairedSample) else sample, dtype=float)
    if d.size == 0:
        raise DegenerateSampleError("cannot resample an empty sample")
    if n_target < 1:
        raise ValueError(f"n_target must be >= 1, got {n_target}")
    mode = resample_mode(d.size, n_target)
    if mode == "identity":
        return d.copy()
    rng = as_generator(stream)
    return rng.choice(d, size=n_target, replace=(mode == "upsample"))


@dataclass
class Diagnosis:
    t: TestResult
    wilcoxon: TestResult
    skewness: float
    excess_kurtosis: float
    n: int
    asymmetry_flag: bool
    threshold: float
    alpha: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "asymmetry_flag": self.asymmetry_flag,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "t": self.t.to_dict(),
            "wilcoxon": self.wilcoxon.to_dict(),
            "warnings": list(self.warnings),
        }


def diagnose(sample, alpha: float = 0.05, options: WilcoxonOptions | None = None,
             threshold: float = ASYMMETRY_THRESHOLD) -> Diagnosis:
    """Both tests, the moment estimates and an asymmetry warning."""
    sample = as_sample(sample)
    if sample.n < 4:
        raise DegenerateSampleError(f"diagnose needs n >= 4, got {sample.n}")
    t_res = t_test(sample)
    w_res = wilcoxon_test(sample, options)
    skew, kurt = sample_moments(sample)
    flag = abs(skew) > threshold
    warnings = []
    if flag:
        warnings.append(
            f"|skewness| = {abs(skew):.3g} exceeds {threshold:g}: the Wilcoxon p-value "
            "reacts to asymmetry of D as well as to its location, so a small "
            "value need not indicate a mean difference"
        )
    if t_res.reject(alpha) != w_res.reject(alpha):
        warnings.append(f"the t-test and the Wilcoxon test disagree at alpha={alpha:g}")
    return Diagnosis(t_res, w_res, skew, kurt, sample.n, flag, threshold, alpha, warnings)


@dataclass
class PairDiagnostic:
    pair: tuple[str, str]
    n_observed: int
    n: int
    mode: str
    skewness: float
    excess_kurtosis: float
    t_p: float
    wilcoxon_p: float
    flag: str  # "asymmetric", "ok" or "degenerate"

    def row(self) -> dict:
        return {
            "pair": f"{self.pair[0]}-{self.pair[1]}",
            "n": self.n,
            "n_observed": self.n_observed,
            "mode": self.mode,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "t_p": self.t_p,
            "wilcoxon_p": self.wilcoxon_p,
            "flag": self.flag,
        }


DIAGNOSTIC_FIELDS = ["pair", "n", "n_observed", "mode", "skewness", "excess_kurtosis",
                     "t_p", "wilcoxon_p", "flag"]


def diagnose_matrix(matrix: ScoreMatrix, n: int | None = 50, stream=None, resamples: int = 1,
                    alpha: float = 0.05, options: WilcoxonOptions | None = None,
                    threshold: float = ASYMMETRY_THRESHOLD) -> list[PairDiagnostic]:
    """Per-pair diagnostics.

    Moments are computed on ``resamples`` draws resampled to ``n`` topics and
    averaged (``n=None`` uses the observed topics). The tests always run on
    the observed, unresampled differences. Degenerate pairs are flagged
    rather than raised.
    """
    rng = as_generator(stream)
    out = []
    for pair, sample in paired_differences(matrix).items():
        n_obs = sample.n
        n_used = n_obs if n is None else int(n)
        mode = resample_mode(n_obs, n_used)
        try:
            skews, kurts = [], []
            for _ in range(max(1, resamples)):
                s, k = sample_moments(resample_to_n(sample, n_used, rng))
                skews.append(s)
                kurts.append(k)
            skew, kurt = float(np.mean(skews)), float(np.mean(kurts))
            t_p = t_test(sample).p_value
            w_p = wilcoxon_test(sample, options).p_value
            flag = "asymmetric" if abs(skew) > threshold else "ok"
        except DegenerateSampleError:
            skew = kurt = t_p = w_p = float("nan")
            flag = "degenerate"
        out.append(PairDiagnostic(pair, n_obs, n_used, mode, skew, kurt, t_p, w_p, flag))
    return out


def diagnostics_to_csv(rows: Sequence[PairDiagnostic]) -> str:
    buf = io.StringIO()
    buf.write("# pairedlab diagnose v1\n")
    w = csv.DictWriter(buf, fieldnames=DIAGNOSTIC_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        row = r.row()
        for key in ("skewness", "excess_kurtosis"):
            row[key] = f"{row[key]:.6g}"
        for key in ("t_p", "wilcoxon_p"):
            row[key] = f"{row[key]:.6g}"
        w.writerow(row)
    return buf.getvalue()
