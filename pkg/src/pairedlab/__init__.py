"""Paired significance tests, non-normal generators and Type I error simulation."""

from .calibration import (
    SIGMA_D,
    DepartureGrid,
    calibrate_grid,
    calibrate_ibb,
    calibrate_skewness,
    calibrate_tails,
    standardize,
)
from .distributions import (
    DistributionSpec,
    MetricKind,
    MetricSupport,
    agn_moments,
    ibb_support,
    sample,
    sample_ibb,
    sgn_excess_kurtosis,
    spec_from_config,
    spec_to_config,
    tgh_moments,
    theoretical_moments,
)
from .engine import (
    SimulationConfig,
    SimulationReport,
    run_cells,
    run_grid,
    symmetric_skewness_reference,
    t_sampling_distribution,
    type1_rate,
)
from .errors import (
    CalibrationRangeError,
    DegenerateSampleError,
    DivergedMomentError,
    PairedLabError,
    ParameterDomainError,
)
from .ingest import ScoreMatrix, diagnose, load_score_matrix, paired_differences, sample_moments
from .rng import RandomStream
from .significance import (
    PairedSample,
    TestResult,
    WilcoxonOptions,
    t_statistic,
    t_test,
    w_plus,
    wilcoxon_exact_tail,
    wilcoxon_normal_approx,
    wilcoxon_test,
    z_statistic,
)

__version__ = "0.1.0"
