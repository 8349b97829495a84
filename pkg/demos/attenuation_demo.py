"""Measurement error attenuates the scalar coefficient; corrections recover it.

Generates one simulated sample, fits all six estimators at the median, and
prints the scalar coefficient each recovers.  The truth is 0.5; the naive
single-day fit lands near 0.4 (attenuation factor 0.8), the 7-day average
near 0.483, and the corrected estimators close the rest of the gap.
"""

import numpy as np

from fqme import METHODS, SimConfig, SimexConfig, fit, generate_dataset

config = SimConfig(n=2000, seed=7)
data = generate_dataset(config, np.random.default_rng(config.seed))

print(f"n={config.n}, J={config.J} replicate curves, L={config.L} replicate scalars")
print(f"true beta2 = {config.beta2}")
print()
print(f"{'method':<8} {'beta2':>8} {'K':>3}")
for method in METHODS:
    options = {}
    if method == "SIMEX":
        options["simex_config"] = SimexConfig(S=20, rng_seed=1)
    est = fit(data, method, 0.5, **options)
    print(f"{method:<8} {est.beta2:8.4f} {est.selected_K:3d}")
