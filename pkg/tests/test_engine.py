import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pairedlab import calibration as cal
from pairedlab import distributions as dist
from pairedlab import engine
from pairedlab.engine import Cell, SimulationConfig
from pairedlab.errors import ParameterDomainError
from pairedlab.rng import RandomStream


def small_config(cells, **kw):
    kw.setdefault("replicates", 4000)
    kw.setdefault("seed", 7)
    return SimulationConfig(tuple(cells), **kw)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 20_000), st.integers(1, 3_000_000))
def test_block_layout_covers_replicates(n, r):
    blocks = engine.block_layout(n, r)
    assert sum(size for _, size in blocks) == r
    assert blocks[0][0] == 0
    assert all(a + sa == b for (a, sa), (b, _) in zip(blocks, blocks[1:]))
    assert all(size * n <= max(engine.BLOCK_VALUES, n) for _, size in blocks)


def test_config_validation():
    with pytest.raises(ParameterDomainError):
        SimulationConfig(alpha=0)
    with pytest.raises(ParameterDomainError):
        SimulationConfig(replicates=0)
    with pytest.raises(ParameterDomainError):
        SimulationConfig(tests=("sign",))


def test_nonzero_mean_rejected():
    with pytest.raises(ParameterDomainError, match="H0"):
        engine.run_cells(small_config([Cell(dist.normal(0.1), 10)]))


def test_wilcoxon_n5_never_rejects():
    specs = [dist.normal(), cal.calibrate_skewness("tgh", 3.0), cal.calibrate_tails("sgn", 30.0),
             cal.standardize(dist.bimodal(2.0))]
    report = engine.run_cells(small_config([Cell(s, 5) for s in specs], tests=("wilcoxon",)))
    assert all(r.rejections == 0 for r in report.rows)


def test_normal_is_nominal():
    r = engine.type1_rate(dist.normal(0, 0.22), 50, SimulationConfig(replicates=40_000, seed=3))
    for est in r.values():
        assert abs(est.rate - 0.05) < 3 * np.sqrt(0.05 * 0.95 / est.replicates)


def test_type1_rate_reproduces_grid_cell():
    cells = [Cell(dist.normal(), 8), Cell(cal.calibrate_tails("sgn", 5.0), 12)]
    config = small_config(cells)
    report = engine.run_cells(config)
    single = engine.type1_rate(cells[1].spec, 12, config, cell_index=1)
    for test in engine.TESTS:
        assert single[test].rejections == report.find(test=test, n=12).rejections


def test_workers_do_not_change_results():
    cells = [Cell(dist.normal(), 5), Cell(cal.calibrate_skewness("agn", 1.0), 300)]
    one = engine.run_cells(small_config(cells, replicates=9000, workers=1)).to_csv()
    three = engine.run_cells(small_config(cells, replicates=9000, workers=3)).to_csv()
    assert one == three


def test_seed_changes_results():
    cells = [Cell(dist.normal(), 20)]
    a = engine.run_cells(small_config(cells, seed=1)).to_csv()
    b = engine.run_cells(small_config(cells, seed=2)).to_csv()
    assert a != b


def test_degenerate_replicates_are_tallied():
    support = dist.ibb_support("P", 1)  # values -1, 0, 1
    spec = dist.ibb(support, 50.0)      # mass piles up on 0
    report = engine.run_cells(small_config([Cell(spec, 5)]))
    for r in report.rows:
        assert r.degenerate > 0
        assert r.rejections + r.degenerate <= r.replicates


def test_report_outputs():
    cells = engine.grid_cells(["light"], sample_sizes=(5, 50))
    report = engine.run_cells(small_config(cells, replicates=500))
    text = report.to_csv()
    lines = text.splitlines()
    assert lines[0] == "# pairedlab.simulate/1 alpha=0.05"
    assert lines[1].split(",") == engine.CSV_FIELDS
    assert len(lines) == 2 + 6 * 2 * 2
    payload = json.loads(report.to_json())
    assert payload["schema"] == engine.SCHEMA and len(payload["rows"]) == 24
    table = report.table()
    assert table.startswith("light [sgn]")
    assert report.find(test="t", n=50, label="Low").cell.target == -0.2


def test_pooled_rows_sum_families():
    cells = engine.grid_cells(["asymmetric"], sample_sizes=(50,))
    report = engine.with_pooled_rows(engine.run_cells(small_config(cells, replicates=500)))
    assert len(report) == 12 * 2 + 6 * 2
    for label in cal.LEVEL_LABELS:
        pooled = report.find(test="wilcoxon", n=50, family="agn+tgh", label=label)
        parts = [report.find(test="wilcoxon", n=50, family=f, label=label) for f in ("agn", "tgh")]
        assert pooled.rejections == sum(p.rejections for p in parts)
        assert pooled.replicates == 1000
        assert " + " in pooled.row()["spec"]


def test_discrete_grid_with_clip():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cells = engine.grid_cells(["discrete"], sample_sizes=(5,), ibb_policy="clip")
    assert {c.family for c in cells} == {"RR", "P"}
    assert len(cells) == 12


def test_demo_cells():
    cells = engine.demo_table1_cells((5,))
    assert [c.label for c in cells] == ["Asymmetric", "Heavy", "Discrete", "Multimodal"]
    for c in cells:
        assert dist.theoretical_moments(c.spec).mean == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------- t sampling distributions

def test_normal_t_is_pivotal():
    tsd = engine.t_sampling_distribution(dist.normal(), 5, 200_000, RandomStream(1))
    assert tsd.degenerate == 0 and tsd.tstats.size == 200_000
    assert tsd.ks_distance < 1.63 / np.sqrt(200_000)  # 1% KS critical value
    ks = stats.kstest(tsd.tstats, stats.t(4).cdf).statistic
    assert tsd.ks_distance == pytest.approx(ks, abs=1e-12)


def test_skewed_population_unbalances_t_tails():
    tsd = engine.t_sampling_distribution(cal.calibrate_skewness("tgh", 3.0), 5, 100_000, RandomStream(2))
    left, right = tsd.tail_masses(0.05)
    # right skew in D pushes the t statistic to the left
    assert left > 2 * right


def test_clt_shrinks_ks():
    spec = cal.calibrate_skewness("tgh", 3.0)
    ks = [engine.t_sampling_distribution(spec, n, 100_000, RandomStream(3, (n,))).ks_distance
          for n in (5, 10, 50)]
    assert ks[0] > ks[1] > ks[2]


def test_histogram_and_ecdf():
    tsd = engine.t_sampling_distribution(dist.normal(), 10, 20_000, RandomStream(5))
    edges, counts = tsd.histogram(12, (-6, 6))
    assert len(edges) == 13 and counts.sum() <= 20_000
    assert tsd.ecdf([-1e9, 1e9]).tolist() == [0.0, 1.0]
    text = engine.histogram_csv(edges, counts, "demo")
    assert text.splitlines()[:2] == ["# demo", "bin_left,bin_right,count"]


def test_skewness_reference_is_centered():
    ref = engine.symmetric_skewness_reference(5.0, 50, 40_000, RandomStream(6))
    assert abs(ref.mean) < 4 * ref.sd / np.sqrt(40_000)
    q = ref.quantiles()
    assert q[0] < 0 < q[-1]
    heavier = engine.symmetric_skewness_reference(30.0, 50, 40_000, RandomStream(6))
    assert heavier.sd > ref.sd
