"""Solve shape parameters for target skewness, kurtosis or spread.

All solvers bisect a monotone moment function. Before bisecting, the
function is evaluated on a 100-point grid across the bracket and the solver
refuses to run if it is not monotone there.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import distributions as dist
from .distributions import DistributionSpec, MetricSupport
from .errors import CalibrationRangeError, DegenerateSampleError, DivergedMomentError

SIGMA_D = 0.22

LEVEL_LABELS = (
    "Low",
    "Medium",
    "High",
    "Very high",
    "Extremely high",
    "Pathologically high",
)

# tail parameters tried, lightest first, when an AGN skewness target is
# out of reach for nu = 2
AGN_NU_LADDER = (2.0, 1.5, 1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.25)
AGN_REACH_MARGIN = 1.1


@dataclass(frozen=True)
class DepartureGrid:
    asymmetry: tuple[float, ...] = (0.25, 0.5, 1.0, 1.5, 3.0, 5.0)
    heavy_tails: tuple[float, ...] = (0.5, 1.5, 3.0, 5.0, 15.0, 30.0)
    light_tails: tuple[float, ...] = (-0.2, -0.4, -0.7, -0.9, -1.1, -1.2)
    discreteness: tuple[int, ...] = (1000, 500, 100, 50, 10, 5)
    labels: tuple[str, ...] = LEVEL_LABELS

    def targets(self, dimension: str) -> tuple:
        try:
            return {
                "asymmetric": self.asymmetry,
                "heavy": self.heavy_tails,
                "light": self.light_tails,
                "discrete": self.discreteness,
            }[dimension]
        except KeyError:
            raise ValueError(f"unknown dimension {dimension!r}") from None


DIMENSIONS = ("asymmetric", "heavy", "light", "discrete")
# families simulated per dimension unless the caller asks for others;
# ALL_FAMILIES lists every mechanism that can generate a dimension
ALL_FAMILIES = {
    "asymmetric": ("agn", "tgh"),
    "heavy": ("sgn", "tgh"),
    "light": ("sgn",),
    "discrete": ("RR", "P"),
}
DEFAULT_FAMILIES = {
    "asymmetric": ("agn", "tgh"),
    "heavy": ("sgn",),
    "light": ("sgn",),
    "discrete": ("RR", "P"),
}


def _bisect(f: Callable[[float], float], target: float, lo: float, hi: float,
            what: str, tol: float = 1e-10, check_points: int = 100) -> float:
    """Solve f(x) = target on [lo, hi] for monotone f, to bracket width tol."""
    grid = np.linspace(lo, hi, check_points)
    values = np.array([f(x) for x in grid])
    steps = np.diff(values)
    increasing = values[-1] > values[0]
    slack = 1e-12 * float(np.max(np.abs(values)))
    wrong = steps < -slack if increasing else steps > slack
    if not np.all(np.isfinite(values)) or wrong.any():
        bad = int(np.flatnonzero(wrong | ~np.isfinite(steps))[0])
        raise CalibrationRangeError(
            f"{what}: objective is not monotone on [{lo:g}, {hi:g}] "
            f"(between {grid[bad]:.6g} and {grid[bad + 1]:.6g})"
        )
    vmin, vmax = min(values[0], values[-1]), max(values[0], values[-1])
    if not vmin <= target <= vmax:
        raise CalibrationRangeError(
            f"{what}: target {target:g} outside attainable range [{vmin:.6g}, {vmax:.6g}]"
        )
    # start from the grid cell that holds the target
    i = int(np.searchsorted(values if increasing else -values, target if increasing else -target))
    i = min(max(i, 1), check_points - 1)
    a, b = grid[i - 1], grid[i]
    fa = values[i - 1] - target
    while b - a > tol:
        mid = 0.5 * (a + b)
        fm = f(mid) - target
        if fm == 0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def standardize(spec: DistributionSpec, mean: float = 0.0, sd: float = SIGMA_D) -> DistributionSpec:
    """Set the affine part so that draws have exactly this mean and sd."""
    if spec.family == "ibb":
        raise CalibrationRangeError(
            "ibb supports are fixed by the metric; use calibrate_ibb to match a spread"
        )
    if not sd > 0:
        raise DegenerateSampleError(f"target sd must be positive, got {sd}")
    _, central = dist.raw_central_moments(spec, 2)
    if not central[2] > 0:
        raise DegenerateSampleError(f"{spec.describe()} has zero variance")
    return spec.with_affine(mean, sd)


# --------------------------------------------------------------------------
# asymmetry


AGN_LOG_XI_MAX = math.log(1e4)


@lru_cache(maxsize=None)
def agn_monotone_reach(nu: float) -> tuple[float, float]:
    """(log xi, skewness) where AGN skewness stops increasing in xi.

    For nu >= 1 skewness rises all the way to the half-distribution limit;
    for nu < 1 it peaks at a finite xi and then sags towards that limit, so
    calibration brackets stop at the peak.
    """
    res = optimize.minimize_scalar(
        lambda u: -dist.agn_moments(math.exp(u), nu)[0],
        bounds=(0.0, AGN_LOG_XI_MAX), method="bounded", options={"xatol": 1e-10},
    )
    u = float(res.x)
    if AGN_LOG_XI_MAX - u < 1e-6:
        u = AGN_LOG_XI_MAX
    return u, dist.agn_moments(math.exp(u), nu)[0]


def agn_nu_for(target_gamma: float) -> float:
    """Lightest-tailed nu on the ladder whose reach exceeds the target by 10%."""
    for nu in AGN_NU_LADDER:
        if agn_monotone_reach(nu)[1] > AGN_REACH_MARGIN * abs(target_gamma):
            return nu
    raise CalibrationRangeError(f"agn: skewness {target_gamma} is beyond every nu on the ladder")


def calibrate_skewness(family: str, target_gamma: float, *, nu: float | None = None,
                       h: float = 0.0, sd: float = SIGMA_D) -> DistributionSpec:
    """AGN (via xi) or TGH (via g) spec with the requested skewness.

    Negative targets are served by reflection (``xi -> 1/xi``, ``g -> -g``).
    For AGN ``nu`` defaults to :func:`agn_nu_for`; for TGH ``h`` defaults to 0.
    """
    family = family.lower()
    gamma = abs(float(target_gamma))
    sign = -1.0 if target_gamma < 0 else 1.0
    if family == "agn":
        nu = agn_nu_for(gamma) if nu is None else float(nu)
        if gamma == 0:
            spec = dist.agn(1.0, nu)
        else:
            log_xi = _bisect(lambda u: dist.agn_moments(math.exp(u), nu)[0], gamma,
                             0.0, agn_monotone_reach(nu)[0], f"agn(nu={nu}) skewness")
            xi = math.exp(log_xi)
            spec = dist.agn(xi if sign > 0 else 1.0 / xi, nu)
    elif family == "tgh":
        if h >= 1 / 3:
            raise CalibrationRangeError(f"tgh skewness diverges for h={h}")
        if gamma == 0:
            spec = dist.tgh(0.0, h)
        else:
            hi = 3.0
            g = _bisect(lambda x: _tgh_skew(x, h), gamma, 0.0, hi, f"tgh(h={h}) skewness")
            spec = dist.tgh(sign * g, h)
    else:
        raise CalibrationRangeError(f"skewness calibration supports agn and tgh, not {family!r}")
    return standardize(spec, 0.0, sd)


def _tgh_skew(g: float, h: float) -> float:
    m = dist.standardized_moments(dist.tgh(g, h), 3)
    return m[3]


# --------------------------------------------------------------------------
# tail weight


def calibrate_tails(family: str, target_kappa: float, *, sd: float = SIGMA_D) -> DistributionSpec:
    """Symmetric SGN (via beta) or TGH (via h) spec with the requested excess kurtosis.

    SGN covers kappa > -1.2, and kappa = -1.2 exactly maps to the uniform.
    TGH covers kappa >= 0 with h < 1/4.
    """
    family = family.lower()
    kappa = float(target_kappa)
    if family == "sgn":
        if kappa < -1.2:
            raise CalibrationRangeError(f"sgn: kurtosis {kappa} is below the uniform limit -1.2")
        if kappa == -1.2:
            spec = dist.uniform()
        elif kappa == 0.0:
            spec = dist.sgn(2.0)
        else:
            # kurtosis decreases in beta; bisect on log(beta)
            lo, hi = math.log(0.1), math.log(1e4)
            log_beta = _bisect(lambda u: dist.sgn_excess_kurtosis(math.exp(u)), kappa,
                               lo, hi, "sgn kurtosis")
            spec = dist.sgn(math.exp(log_beta))
    elif family == "tgh":
        if kappa < 0:
            raise CalibrationRangeError(f"tgh: kurtosis {kappa} < 0 needs lighter tails than normal")
        if kappa == 0.0:
            spec = dist.tgh(0.0, 0.0)
        else:
            h = _bisect(_tgh_kurt_g0, kappa, 0.0, 0.25 - 1e-6, "tgh kurtosis")
            spec = dist.tgh(0.0, h)
    else:
        raise CalibrationRangeError(f"tail calibration supports sgn and tgh, not {family!r}")
    return standardize(spec, 0.0, sd)


def _tgh_kurt_g0(h: float) -> float:
    # closed form for g = 0
    return 3.0 * (1 - 2 * h) ** 3 / (1 - 4 * h) ** 2.5 - 3.0


# --------------------------------------------------------------------------
# discreteness


def ibb_sd(support: MetricSupport, p: float) -> float:
    return dist.theoretical_moments(dist.ibb(support, p)).sd


IBB_LOG_P_BRACKET = (math.log(1e-3), math.log(1e4))


def calibrate_ibb(support: MetricSupport, target_sd: float = SIGMA_D,
                  on_unattainable: str = "raise") -> DistributionSpec:
    """IBB spec over ``support`` whose exact pmf sd equals ``target_sd``.

    The sd decreases in p. When the target lies below what the support can
    reach (coarse P@k supports), ``on_unattainable="clip"`` returns the
    bracket end (largest p, smallest sd) instead of raising.
    """
    if not target_sd > 0:
        raise CalibrationRangeError(f"target sd must be positive, got {target_sd}")
    if on_unattainable not in ("raise", "clip"):
        raise ValueError("on_unattainable must be 'raise' or 'clip'")
    lo, hi = IBB_LOG_P_BRACKET
    what = f"ibb({support.metric.value}@{support.k}) sd"
    try:
        log_p = _bisect(lambda u: ibb_sd(support, math.exp(u)), target_sd, lo, hi, what,
                        tol=1e-12)
    except CalibrationRangeError:
        if on_unattainable == "clip" and ibb_sd(support, math.exp(hi)) > target_sd:
            spec = dist.ibb(support, math.exp(hi))
            warnings.warn(f"{what} cannot go below {ibb_sd(support, math.exp(hi)):.6g}; "
                          f"clipped to {spec.describe()}", RuntimeWarning, stacklevel=2)
            return spec
        raise
    return dist.ibb(support, math.exp(log_p))


# --------------------------------------------------------------------------
# whole grids


@dataclass(frozen=True)
class CalibratedLevel:
    dimension: str
    label: str
    target: float
    family: str
    spec: DistributionSpec

    def achieved(self) -> float:
        m = dist.theoretical_moments(self.spec)
        if self.dimension == "asymmetric":
            return m.skewness
        if self.dimension == "discrete":
            return m.sd
        return m.excess_kurtosis

    def row(self) -> dict:
        m = dist.theoretical_moments(self.spec)
        return {
            "dimension": self.dimension,
            "label": self.label,
            "target": self.target,
            "family": self.family,
            "parameters": self.spec.describe(),
            **{f"param_{k}": v for k, v in self.spec.params.items()},
            "mean": m.mean,
            "sd": m.sd,
            "skewness": m.skewness,
            "excess_kurtosis": m.excess_kurtosis,
            "achieved": self.achieved(),
        }


def calibrate_level(dimension: str, family: str, target, *, sd: float = SIGMA_D,
                    ibb_policy: str = "raise") -> DistributionSpec:
    if dimension == "asymmetric":
        return calibrate_skewness(family, target, sd=sd)
    if dimension in ("heavy", "light"):
        return calibrate_tails(family, target, sd=sd)
    if dimension == "discrete":
        return calibrate_ibb(dist.ibb_support(family, int(target)), sd, on_unattainable=ibb_policy)
    raise ValueError(f"unknown dimension {dimension!r}")


def calibrate_grid(dimension: str, families: Sequence[str] | None = None,
                   grid: DepartureGrid | None = None, *, ibb_policy: str = "raise") -> list[CalibratedLevel]:
    """Calibrated spec for every level of one departure dimension and family."""
    grid = grid or DepartureGrid()
    families = tuple(families or DEFAULT_FAMILIES[dimension])
    out = []
    for family in families:
        tag = dist.MetricKind.parse(family).value if dimension == "discrete" else family.lower()
        for label, target in zip(grid.labels, grid.targets(dimension)):
            try:
                spec = calibrate_level(dimension, family, target, ibb_policy=ibb_policy)
            except (CalibrationRangeError, DivergedMomentError) as exc:
                raise CalibrationRangeError(f"[{dimension}/{tag}/{label} target={target}] {exc}") from exc
            out.append(CalibratedLevel(dimension, label, target, tag, spec))
    return out


def levels_to_csv(levels: Sequence[CalibratedLevel]) -> str:
    buf = io.StringIO()
    buf.write("# pairedlab calibrate v1\n")
    fields = ["dimension", "label", "target", "family", "parameters",
              "mean", "sd", "skewness", "excess_kurtosis", "achieved"]
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for lv in levels:
        row = lv.row()
        w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def levels_to_json(levels: Sequence[CalibratedLevel]) -> str:
    return json.dumps({"schema": "pairedlab.calibrate/1", "levels": [lv.row() for lv in levels]},
                      indent=2, sort_keys=True)
