# %% [markdown]
# Weighted background, one radial instance
#
# Solve the scalar equation for `K = -(1+|z|^2)^-3` on `(1+|z|^2) g0` over a
# disk and compare a ray of the 2-D solution with the 1-D reference solver.

# %%
import numpy as np

from kwplane import DecayCertificate, PowerLaw, Schedule
from kwplane.oracle import ray_profile, solve_radial
from kwplane.solver import continue_epsilon, family_problem

K = PowerLaw.term(-1.0, -3.0)
p = family_problem(K, DecayCertificate(4.0, 3.0), k=1.0)
schedule = Schedule(radii=(10.0,), n=201, shape="disk")
grid = schedule.grid(10.0)

# %%
rep = continue_epsilon(p, grid, schedule, keep_iterates=True)
print(f"rungs: {len(rep.trace)}, final residual {rep.residual:.2e}, converged {rep.converged}")
for t in rep.trace[::6]:
    print(f"  eps={t.eps:.2e}  sup|u|={t.sup_norm:.4f}  bound={t.sup_bound:.3g}  newton={t.newton_iters}")

# %%
ref = solve_radial(K, 1.0, 10.0)
ray = ray_profile(rep.solution)
print(f"sup difference along the ray: {np.max(np.abs(ray.values - ref(ray.r_nodes))):.2e}")
for r in (0.0, 2.0, 5.0, 8.0):
    print(f"  r={r:4.1f}  2-D {np.interp(r, ray.r_nodes, ray.values):+.6f}  1-D {float(ref(r)):+.6f}")
