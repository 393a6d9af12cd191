# %% [markdown]
# # Filtering the time derivative versus filtering the solution
#
# Two alternatives to the split filter, both with a fixed strength:
#
# * derivative filter, u+ = u + Δt F g(u)
# * solution filter, u+ = u + Δt g(F u)
#
# For the derivative filter the natural energy is the one induced by
# M F^{-1}, because <u, F g>_{M F^{-1}} = <u, g>_M. That energy evolves
# smoothly while ||u||_M oscillates. The solution filter has no such norm,
# and both energies oscillate.

# %%
from __future__ import annotations

import numpy as np

from _plotting import figure
from cprfilter.config import resolve_config
from cprfilter.timestepping import run


def total_variation(series):
    return float(np.sum(np.abs(np.diff(series))))


def excess_variation(series):
    # variation beyond one descent to the minimum and one rise to the end
    low = series.min()
    return total_variation(series) - ((series[0] - low) + (series[-1] - low))


baseline = run(resolve_config("derivative_filter_demo", overrides={"strategy": "none"}))
print(f"unfiltered: TV of ||u||_M = {total_variation(baseline.energy_M):.4f}")

results = {}
for preset in ("derivative_filter_demo", "solution_filter_demo"):
    r = results[preset] = run(resolve_config(preset))
    print(f"{preset}:")
    for label, series in (("M", r.energy_M), ("M F^-1", r.energy_MFinv)):
        print(f"  ||u||_{label:<7} TV {total_variation(series):.4f}, "
              f"excess TV {excess_variation(series):.5f}")

# %%
figure("filter_norms", [
    (name, [(r.times, r.energy_M, "M"), (r.times, r.energy_MFinv, "M F^-1")])
    for name, r in results.items()
])
