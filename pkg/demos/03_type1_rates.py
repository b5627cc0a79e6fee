# %% [markdown]
# # Type I error rates, small scale
#
# The full grid uses 100K replicates per cell. 4000 is enough to see the
# pattern: the t-test stays near .05 once n is moderate, and Wilcoxon drifts
# upward with skewed D because it tests symmetry around 0, not the mean.

# %%
from pairedlab import SimulationConfig, calibration as cal, engine

cells = engine.grid_cells(["asymmetric"], {"asymmetric": ("tgh",)}, sample_sizes=(5, 50, 500))
report = engine.run_cells(SimulationConfig(cells, replicates=4000, seed=3))
print(report.table())

# %% one cell on its own
spec = cal.calibrate_tails("sgn", 30.0)
for test, est in engine.type1_rate(spec, 5, SimulationConfig(replicates=20_000, seed=4)).items():
    print(test, round(est.rate, 4), "+/-", round(est.se, 4))
