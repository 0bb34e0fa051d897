# %% [markdown]
# Vortex reduction, uniqueness and a sign-violating control

# %%
import warnings

import numpy as np

from kwplane import ProblemSpec, Schedule
from kwplane.geometry import PowerLaw
from kwplane.solver import BlowUpError, continue_epsilon
from kwplane.vortex import power_law_vortex, solve_vortex

# %%
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    rep = solve_vortex(power_law_vortex(l=2.0, k=0.5), Schedule(radii=(5.0, 10.0), n=101))
b = rep.bounds_checked
print(f"vortex residual {b['vortex_residual']:.1e}, round trip {b['round_trip']:.1e}")
print(f"conformal exponent at the origin: {rep.solution.values[50, 50]:+.5f}")

# %% [markdown]
# A right side with positive plane integral has no bounded solution; the
# continuation ladder reports it instead of returning a spurious field.

# %%
bad = ProblemSpec(PowerLaw.term(1.0, -2.0), PowerLaw.term(-1.0, -2.0))
s = Schedule(radii=(10.0,), n=101)
try:
    continue_epsilon(bad, s.grid(10.0), s)
except BlowUpError as exc:
    print("rejected:", exc)
    print("sup|u| along the ladder:", np.round([t.sup_norm for t in exc.trace[::5]], 2))
