# %% [markdown]
# # Two paired tests on the same differences
#
# Four topics, two systems. D holds the per-topic differences.

# %%
import numpy as np

from pairedlab import PairedSample, WilcoxonOptions, t_test, wilcoxon_test
from pairedlab.significance import signed_ranks, wilcoxon_exact_tail, wilcoxon_null_counts

d = PairedSample([-0.4, -0.1, 0.4, 0.8])
print(t_test(d))
print(signed_ranks(d).ranks)      # the two 0.4s share rank 2.5
print(wilcoxon_test(d))           # tie present, so the normal approximation is used

# %% [markdown]
# With five topics the exact null has 32 equally likely sign patterns.
# Even the most extreme one only reaches p = 2/32.

# %%
counts = np.asarray(wilcoxon_null_counts(5), dtype=int)
print(counts, counts.sum())
print("P(W+ >= 15) =", wilcoxon_exact_tail(5, 15))
print(wilcoxon_test(PairedSample([0.1, 0.2, 0.3, 0.4, 0.5])))

# %% zeros: dropped by default, or ranked and left unsigned
z = PairedSample([0.0, 0.0, 0.12, -0.05, 0.3, 0.08, 0.2])
for policy in ("drop", "pratt"):
    print(policy, wilcoxon_test(z, WilcoxonOptions(zero_policy=policy)))
