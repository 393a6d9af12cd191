# %% [markdown]
# # Fixed filter strengths on the smooth advection problem
#
# The split filter with a fixed strength ε and order s, exponent
# -ε λ_n^s Δt. Dissipation grows with ε for each s. Once ε is large enough
# to remove every non-constant mode each step, the scheme reduces to a
# piecewise constant one and the ordering in ε no longer holds, so the grid
# stops at ε = 1.

# %%
from __future__ import annotations

import os
import tempfile

from cprfilter.config import resolve_config
from cprfilter.experiments import sweep

os.environ.setdefault("SOLVER_THREADS", "1")
config = resolve_config("gaussian_advection")
with tempfile.TemporaryDirectory() as out:
    rows = sweep(config, [0.0, 0.01, 0.1, 0.3, 1.0], [1, 2, 3], out)

print(f"{'s':>2} {'eps':>6} {'final energy':>14} {'min u':>9} {'max u':>9}")
for eps, s, energy, lo, hi, _ in sorted(rows, key=lambda r: (r[1], r[0])):
    print(f"{s:>2} {eps:>6g} {energy:>14.8f} {lo:>9.4f} {hi:>9.4f}")
