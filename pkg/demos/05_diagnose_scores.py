# %% [markdown]
# # Checking real-looking score matrices
#
# Three made-up systems on 40 topics. "skewed" has a long right tail of
# wins, which is what makes the Wilcoxon p-value hard to read.

# %%
import numpy as np

from pairedlab import RandomStream, engine
from pairedlab.ingest import ScoreMatrix, diagnose_matrix, diagnostics_to_csv

rng = np.random.default_rng(12)
base = rng.beta(2, 5, size=40)
scores = np.column_stack([
    base,
    np.clip(base + rng.normal(0, 0.05, 40), 0, 1),
    np.clip(base + rng.lognormal(-3, 1.0, 40) - 0.08, 0, 1),
])
matrix = ScoreMatrix(tuple(f"q{i}" for i in range(40)), ("base", "noisy", "skewed"), scores, "AP")

rows = diagnose_matrix(matrix, n=50, stream=RandomStream(1), resamples=20)
print(diagnostics_to_csv(rows))

# %% [markdown]
# How much skewness would n = 50 symmetric draws show by chance when the
# tails are as heavy as kappa = 5?

# %%
ref = engine.symmetric_skewness_reference(5.0, 50, 20_000, RandomStream(2))
print("central 95%:", np.round(ref.quantiles((0.025, 0.975)), 3))
