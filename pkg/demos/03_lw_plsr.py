# %% [markdown]
# # Locally weighted PLSR
#
# Each query gets its own PLSR model fitted on its k nearest training
# cycles. The k rule picks the smallest neighbourhood in which every
# training point still sees two different concentrations.

# %%
import numpy as np

from tcoquant import build_feature_matrix, generate, synth
from tcoquant.lw_plsr import LwConfig, choose_k, fit_lw, neighborhood
from tcoquant.plsr import fit, predict

cfg = synth.SynthConfig(exponent=0.5, noise_sigma=0.02, drift_rate=0.001, seed=5,
                        schedule=[(c, 12) for c in (0.0, 2.5, 5.0, 10.0, 20.0, 40.0)])
fm = build_feature_matrix(generate(cfg))
k = choose_k(fm.X, fm.y)
print("k from the rule:", k)

# %%
query = fm.X[30]
idx, dist = neighborhood(fm.X, query, LwConfig(k))
print("neighbour concentrations:", sorted(set(fm.y[idx].tolist())))
print("the query row itself is excluded:", 30 not in idx)

# %%
for weighting in ("uniform", "tricube"):
    model = fit_lw(fm.X, fm.y, LwConfig(k, n_components=3, weighting=weighting))
    print(f"{weighting:8s} prediction for a {fm.y[30]} ppb cycle: {model.predict(query):.3f}")

# %% [markdown]
# With k equal to the training size the local model is the global one.

# %%
lw_all = fit_lw(fm.X, fm.y, LwConfig(len(fm.y), n_components=3))
glob = fit(fm.X, fm.y, 3)
probe = fm.X[:5] * 1.001
print("max |LW - global|:", np.max(np.abs(lw_all.predict(probe) - predict(glob, probe))))
