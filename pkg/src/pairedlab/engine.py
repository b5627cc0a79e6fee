"""Monte Carlo estimation of Type I error rates and t sampling distributions.

Replicates of a cell are generated in fixed-size blocks; block ``b`` of
cell ``c`` always draws from ``RandomStream(seed, (c, b))``. The block
layout depends only on ``n`` and the replicate count, so results are the
same whatever the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import calibration as cal
from . import distributions as dist
from .distributions import DistributionSpec
from .errors import CalibrationRangeError, ParameterDomainError
from .rng import RandomStream, default_seed
from .significance import WilcoxonOptions, degenerate_sd, t_cdf, t_test_pvalues, wilcoxon_pvalues

SAMPLE_SIZES = (5, 50, 500, 5000)
TESTS = ("t", "wilcoxon")
BLOCK_VALUES = 1_000_000
SCHEMA = "pairedlab.simulate/1"


@dataclass(frozen=True)
class Cell:
    spec: DistributionSpec
    n: int
    label: str = ""
    dimension: str = ""
    family: str = ""
    target: float | None = None


@dataclass(frozen=True)
class SimulationConfig:
    cells: tuple[Cell, ...] = ()
    replicates: int = 100_000
    alpha: float = 0.05
    seed: int = field(default_factory=default_seed)
    tests: tuple[str, ...] = TESTS
    wilcoxon_options: WilcoxonOptions = field(default_factory=WilcoxonOptions)
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterDomainError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.replicates < 1:
            raise ParameterDomainError("replicates must be >= 1")
        bad = [t for t in self.tests if t not in TESTS]
        if bad or not self.tests:
            raise ParameterDomainError(f"tests must be a non-empty subset of {TESTS}, got {self.tests}")
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "tests", tuple(self.tests))


@dataclass(frozen=True)
class RateEstimate:
    """Rejection count for one cell and one test."""

    cell_index: int
    cell: Cell
    test: str
    replicates: int
    rejections: int
    degenerate: int
    seed: int
    pooled_from: tuple[str, ...] = ()

    @property
    def rate(self) -> float:
        return self.rejections / self.replicates

    @property
    def se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1 - r) / self.replicates)

    def row(self) -> dict:
        c = self.cell
        return {
            "cell": self.cell_index,
            "dimension": c.dimension,
            "family": c.family,
            "label": c.label,
            "target": "" if c.target is None else c.target,
            "n": c.n,
            "test": self.test,
            "replicates": self.replicates,
            "rejections": self.rejections,
            "rate": self.rate,
            "se": self.se,
            "degenerate": self.degenerate,
            "seed": self.seed,
            "spec": " + ".join(self.pooled_from) if self.pooled_from else c.spec.describe(),
        }


CSV_FIELDS = ["cell", "dimension", "family", "label", "target", "n", "test", "replicates",
              "rejections", "rate", "se", "degenerate", "seed", "spec"]


@dataclass
class SimulationReport:
    rows: list[RateEstimate]
    alpha: float = 0.05

    def __len__(self):
        return len(self.rows)

    def find(self, *, test: str, n: int, dimension: str | None = None,
             family: str | None = None, label: str | None = None, target=None) -> RateEstimate:
        hits = [
            r for r in self.rows
            if r.test == test and r.cell.n == n
            and (dimension is None or r.cell.dimension == dimension)
            and (family is None or r.cell.family == family)
            and (label is None or r.cell.label == label)
            and (target is None or r.cell.target == target)
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match test={test} n={n} {dimension}/{family}/{label}/{target}")
        return hits[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {SCHEMA} alpha={self.alpha!r}\n")
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            row = r.row()
            row["rate"] = f"{row['rate']:.6f}"
            row["se"] = f"{row['se']:.6f}"
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEMA, "alpha": self.alpha,
                           "rows": [r.row() for r in self.rows]}, indent=2)

    def table(self) -> str:
        """Plain-text pivot: one line per (block, n, test), one column per level."""
        keys = []
        for r in self.rows:
            k = (r.cell.dimension, r.cell.family)
            if k not in keys:
                keys.append(k)
        lines = []
        for dim, fam in keys:
            block = [r for r in self.rows if (r.cell.dimension, r.cell.family) == (dim, fam)]
            labels = list(dict.fromkeys(r.cell.label for r in block))
            ns = sorted({r.cell.n for r in block})
            lines.append(f"{dim} [{fam}]: " + " | ".join(labels))
            for test in [t for t in TESTS if any(r.test == t for r in block)]:
                for n in ns:
                    vals = []
                    for lab in labels:
                        hit = [r for r in block if r.test == test and r.cell.n == n and r.cell.label == lab]
                        vals.append(f"{hit[0].rate:.3f}" if hit else "  -  ")
                    lines.append(f"  {test:>8} n={n:<5} " + " ".join(vals))
        return "\n".join(lines)


def with_pooled_rows(report: SimulationReport) -> SimulationReport:
    """Append rows that pool all families of a dimension level.

    Pooling sums rejections and replicates across families, which is the
    rate of an equal-probability mixture of the family-specific mechanisms.
    Levels simulated under a single family are not pooled.
    """
    groups: dict[tuple, list[RateEstimate]] = {}
    for r in report.rows:
        if r.pooled_from:
            continue
        c = r.cell
        groups.setdefault((c.dimension, c.label, c.target, c.n, r.test), []).append(r)
    pooled = []
    for (dim, label, target, n, test), rows in groups.items():
        families = tuple(dict.fromkeys(r.cell.family for r in rows))
        if len(families) < 2:
            continue
        first = rows[0]
        cell = Cell(first.cell.spec, n, label, dim, "+".join(families), target)
        pooled.append(RateEstimate(
            -1, cell, test,
            sum(r.replicates for r in rows),
            sum(r.rejections for r in rows),
            sum(r.degenerate for r in rows),
            first.seed,
            tuple(r.cell.spec.describe() for r in rows),
        ))
    return SimulationReport(report.rows + pooled, report.alpha)


# --------------------------------------------------------------------------
# core simulation


def block_layout(n: int, replicates: int) -> list[tuple[int, int]]:
    """(start, size) of every replicate block for samples of size n."""
    size = max(1, BLOCK_VALUES // max(n, 1))
    return [(s, min(size, replicates - s)) for s in range(0, replicates, size)]


def simulate_block(spec: DistributionSpec, n: int, size: int, tests: Sequence[str], alpha: float,
                   options: WilcoxonOptions, stream: RandomStream) -> dict[str, tuple[int, int]]:
    """Rejections and degenerate counts for one block of replicates."""
    d = dist.sample(spec, (size, n), stream)
    out = {}
    for test in tests:
        if test == "t":
            p, degenerate = t_test_pvalues(d)
        else:
            p, degenerate = wilcoxon_pvalues(d, options)
        out[test] = (int(np.sum((p < alpha) & ~degenerate)), int(degenerate.sum()))
    return out


def _task(args):
    cell_index, block_index, spec, n, size, tests, alpha, options, seed = args
    stream = RandomStream(seed, (cell_index, block_index))
    return cell_index, simulate_block(spec, n, size, tests, alpha, options, stream)


def _check_null(spec: DistributionSpec) -> None:
    mean = dist.theoretical_moments(spec).mean
    if abs(mean) > 1e-12:
        raise ParameterDomainError(f"{spec.describe()} has mean {mean}, not 0: H0 does not hold")


def run_cells(config: SimulationConfig) -> SimulationReport:
    """Simulate every cell of ``config`` and collect one row per cell and test."""
    tasks = []
    for ci, cell in enumerate(config.cells):
        if cell.n < 2:
            raise ParameterDomainError(f"cell {ci}: n must be >= 2")
        _check_null(cell.spec)
        for bi, (_, size) in enumerate(block_layout(cell.n, config.replicates)):
            tasks.append((ci, bi, cell.spec, cell.n, size, config.tests, config.alpha,
                          config.wilcoxon_options, config.seed))
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        results = [_task(t) for t in tasks]
    totals: dict[tuple[int, str], list[int]] = {}
    for ci, counts in results:
        for test, (rej, deg) in counts.items():
            acc = totals.setdefault((ci, test), [0, 0])
            acc[0] += rej
            acc[1] += deg
    rows = [
        RateEstimate(ci, cell, test, config.replicates, *totals[(ci, test)], config.seed)
        for ci, cell in enumerate(config.cells)
        for test in config.tests
    ]
    return SimulationReport(rows, config.alpha)


def type1_rate(spec: DistributionSpec, n: int, config: SimulationConfig | None = None,
               cell_index: int = 0) -> dict[str, RateEstimate]:
    """Per-test rejection-rate estimates for one distribution and sample size.

    The cell is simulated as if it sat at position ``cell_index`` of a grid,
    so it reproduces that grid cell exactly.
    """
    config = config or SimulationConfig()
    cell = Cell(spec, n)
    tasks = [
        (cell_index, bi, spec, n, size, config.tests, config.alpha, config.wilcoxon_options, config.seed)
        for bi, (_, size) in enumerate(block_layout(n, config.replicates))
    ]
    _check_null(spec)
    totals = {t: [0, 0] for t in config.tests}
    for _, counts in map(_task, tasks):
        for test, (rej, deg) in counts.items():
            totals[test][0] += rej
            totals[test][1] += deg
    return {
        t: RateEstimate(cell_index, cell, t, config.replicates, *totals[t], config.seed)
        for t in config.tests
    }


# --------------------------------------------------------------------------
# grids


def grid_cells(dimensions: Iterable[str] = cal.DIMENSIONS, families: dict | None = None,
               sample_sizes: Sequence[int] = SAMPLE_SIZES, grid: cal.DepartureGrid | None = None,
               ibb_policy: str = "raise") -> list[Cell]:
    """Calibrate every requested level and cross it with the sample sizes."""
    families = families or {}
    cells = []
    for dim in dimensions:
        levels = cal.calibrate_grid(dim, families.get(dim), grid, ibb_policy=ibb_policy)
        for lv in levels:
            for n in sample_sizes:
                cells.append(Cell(lv.spec, int(n), lv.label, dim, lv.family, lv.target))
    return cells


def demo_table1_cells(sample_sizes: Sequence[int] = SAMPLE_SIZES) -> list[Cell]:
    """Four illustrative non-normal shapes (asymmetric, heavy, discrete, bimodal)."""
    shapes = [
        ("asymmetric", "tgh", cal.calibrate_skewness("tgh", 1.5)),
        ("heavy", "sgn", cal.calibrate_tails("sgn", 5.0)),
        ("discrete", "RR", cal.calibrate_ibb(dist.ibb_support("RR", 10))),
        ("multimodal", "bimodal", cal.standardize(dist.bimodal(2.0))),
    ]
    return [Cell(spec, int(n), dim.capitalize(), "demo-table1", fam)
            for dim, fam, spec in shapes for n in sample_sizes]


def run_grid(dimensions: Iterable[str] = cal.DIMENSIONS, config: SimulationConfig | None = None, *,
             families: dict | None = None, sample_sizes: Sequence[int] = SAMPLE_SIZES,
             grid: cal.DepartureGrid | None = None, ibb_policy: str = "raise") -> SimulationReport:
    """Simulate the full cross of departure levels, sample sizes and tests."""
    config = config or SimulationConfig()
    cells = grid_cells(dimensions, families, sample_sizes, grid, ibb_policy)
    return run_cells(SimulationConfig(
        cells, config.replicates, config.alpha, config.seed, config.tests,
        config.wilcoxon_options, config.workers,
    ))


# --------------------------------------------------------------------------
# sampling distributions


@dataclass
class TSamplingDistribution:
    n: int
    replicates: int
    degenerate: int
    tstats: np.ndarray  # sorted, degenerate replicates removed

    @property
    def df(self) -> int:
        return self.n - 1

    @property
    def ks_distance(self) -> float:
        x = self.tstats
        m = x.size
        f = t_cdf(x, self.df)
        i = np.arange(1, m + 1)
        return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))

    def ecdf(self, x) -> np.ndarray:
        return np.searchsorted(self.tstats, np.asarray(x, dtype=float), side="right") / self.tstats.size

    def histogram(self, bins: int = 120, range: tuple[float, float] = (-6.0, 6.0)):
        counts, edges = np.histogram(self.tstats, bins=bins, range=range)
        return edges, counts

    def tail_masses(self, level: float = 0.05) -> tuple[float, float]:
        """Fraction of t statistics beyond the two-sided T(n-1) critical values."""
        from scipy import stats

        crit = stats.t.ppf(1 - level / 2, self.df)
        m = self.tstats.size
        left = np.searchsorted(self.tstats, -crit, side="left") / m
        right = 1.0 - np.searchsorted(self.tstats, crit, side="right") / m
        return float(left), float(right)


def _replicate_stat(spec, n, replicates, stream: RandomStream, stat):
    values, degenerate = [], 0
    for bi, (_, size) in enumerate(block_layout(n, replicates)):
        d = dist.sample(spec, (size, n), stream.child(bi))
        v, bad = stat(d)
        degenerate += int(bad.sum())
        values.append(v[~bad])
    return np.sort(np.concatenate(values)), degenerate


def _t_rows(d):
    n = d.shape[1]
    sd = d.std(axis=1, ddof=1)
    bad = degenerate_sd(sd, np.abs(d).max(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = d.mean(axis=1) / (sd / math.sqrt(n))
    return t, bad


def t_sampling_distribution(spec: DistributionSpec, n: int, replicates: int = 1_000_000,
                            stream: RandomStream | None = None) -> TSamplingDistribution:
    """Empirical distribution of the t statistic for samples of size n."""
    if n < 2:
        raise ParameterDomainError("n must be >= 2")
    stream = stream or RandomStream(default_seed())
    t, degenerate = _replicate_stat(spec, n, replicates, stream, _t_rows)
    return TSamplingDistribution(n, replicates, degenerate, t)


def sample_skewness_rows(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = d - d.mean(axis=1, keepdims=True)
    m2 = np.mean(c * c, axis=1)
    m3 = np.mean(c * c * c, axis=1)
    bad = degenerate_sd(np.sqrt(m2), np.abs(d).max(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return m3 / m2**1.5, bad


@dataclass
class SkewnessReference:
    kappa: float
    n: int
    spec: DistributionSpec
    values: np.ndarray  # sorted sample skewness values

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def sd(self) -> float:
        return float(self.values.std(ddof=1))

    def quantiles(self, q=(0.025, 0.25, 0.5, 0.75, 0.975)) -> np.ndarray:
        return np.quantile(self.values, q)

    def histogram(self, bins: int = 100, range: tuple[float, float] = (-3.0, 3.0)):
        counts, edges = np.histogram(self.values, bins=bins, range=range)
        return edges, counts


def symmetric_skewness_reference(kappa: float, n: int = 50, replicates: int = 100_000,
                                 stream: RandomStream | None = None,
                                 family: str = "sgn") -> SkewnessReference:
    """Sampling distribution of sample skewness under a symmetric population
    with excess kurtosis ``kappa``."""
    if family.lower() not in ("sgn", "tgh"):
        raise CalibrationRangeError("the symmetric reference uses sgn or tgh (g = 0)")
    spec = cal.calibrate_tails(family, kappa)
    stream = stream or RandomStream(default_seed())
    values, _ = _replicate_stat(spec, n, replicates, stream, sample_skewness_rows)
    return SkewnessReference(kappa, n, spec, values)


def histogram_csv(edges: np.ndarray, counts: np.ndarray, header: str = "") -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    buf.write("bin_left,bin_right,count\n")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo:.6g},{hi:.6g},{int(c)}\n")
    return buf.getvalue()
