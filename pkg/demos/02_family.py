# %% [markdown]
# A family of solutions with prescribed growth
#
# For `K = -(1+|z|^2)^-3` with decay power 3 and constant 4 the admissible
# window is `[1, 2)`. Each member `u_k` grows like `k log|z|`, so the members
# are distinct. A radius-20 domain keeps this quick; growth fits on such
# small domains run below `k`, the logarithm only emerging as the radius grows.

# %%
import numpy as np

from kwplane import DecayCertificate, PowerLaw, Schedule
from kwplane.assumptions import admissible_k
from kwplane.oracle import growth_fit, ray_profile
from kwplane.solver import solve_family

cert = DecayCertificate(4.0, 3.0)
print("window:", admissible_k(cert.l, cert.lam))

# %%
reps = solve_family(PowerLaw.term(-1.0, -3.0), cert, [1.0, 1.5], Schedule(radii=(10.0, 20.0), n=201))
for rep in reps:
    fit = growth_fit(ray_profile(rep.classical), rep.k, (10.0, 18.0))
    print(f"k={rep.k:g}: slope {fit.slope:.3f}, sup|v| {rep.solution.sup_norm():.3f}, drifts {rep.domain_drifts}")

# %%
a, b = (r.classical for r in reps)
g = a.grid
ring = g.interior & (np.abs(np.sqrt(g.r2) - 10.0) <= 0.5 * g.spacing)
print(f"|u_1 - u_1.5| on |z| = 10: {np.max(np.abs(a.values - b.values)[ring]):.3f}")
