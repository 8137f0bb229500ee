"""Long-time behaviour: with a time-independent source the evolution from
zero data climbs monotonically to the stationary state, which is also
computed directly by the stationary solver."""
# %%
import numpy as np

from dnpe import (BetaSpec, FluxSpec, ModelParams, SchemeConfig, SourceSpec, build_grid,
                  run_trajectory, solve_stationary, stationary_residual)
from dnpe.grid import Field

grid = build_grid(0.0, 1.0, 64)
h = Field.from_function(grid, lambda x: 2.0 * np.exp(1 - 1 / np.maximum(1 - (2 * x - 1) ** 2, 1e-300)))
params = ModelParams(3.0, 2.0, 0.5, 1.0, BetaSpec(1.0), FluxSpec("power", gamma=1, radius=2.0),
                     SourceSpec("constant_in_u", value=h.values), grid)

# %%
traj = run_trajectory(Field.zeros(grid), params, SchemeConfig(T=400.0, N=400))
stat, report = solve_stationary(params, h)
for k in (0, 1, 5, 20, 100, 400):
    u = traj.levels[k]
    gap = grid.h * np.abs(u.values - stat.values).sum()
    print(f"t = {traj.times[k]:6.1f}: L1 distance to stationary {gap:.3e}, "
          f"residual {stationary_residual(u, params, h):.3e}")
print("stationary solver residual:", stationary_residual(stat, params, h),
      "outer iterations:", report.outer_iterations)
