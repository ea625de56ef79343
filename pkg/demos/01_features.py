# %% [markdown]
# # From a temperature cycle to 20 features
#
# One heater cycle yields 160 conductance samples (40 s at 4 Hz). We cut it
# into ten equal ranges and keep the mean and the least-squares slope of
# each range.

# %%
import numpy as np

from tcoquant import synth
from tcoquant.cycle_features import FeatureConfig, extract_features, segment_cycle

cfg = synth.SynthConfig(noise_sigma=0.0, schedule=[(0.0, 1), (10.0, 1)])
background, exposed = synth.generate(cfg)
print("samples per cycle:", background.g.size)

# %%
ranges = segment_cycle(background, FeatureConfig(10))
print("segment lengths:", [len(r) for r in ranges])

# %% [markdown]
# The response multiplies the baseline, so every mean goes up with
# concentration. Slopes change sign between the heating and cooling halves.

# %%
for label, cycle in (("0 ppb", background), ("10 ppb", exposed)):
    fv = extract_features(cycle)
    print(label)
    print("  means  (uS):", np.round(fv.means * 1e6, 3))
    print("  slopes (uS/s):", np.round(fv.slopes * 1e6, 4))

# %%
print("feature vector length:", extract_features(exposed).as_array().size)
