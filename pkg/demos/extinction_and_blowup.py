"""Two opposite fates of the same equation with a power source |u|^(r-1) u.

A sublinear source (r < 1) with fast diffusion (q < 2) drives small data to
zero in finite time; a superlinear source (r > 1) with negative energy makes
the solution explode in finite time.
"""
# %%
import numpy as np

from dnpe import (BetaSpec, FluxSpec, ModelParams, SchemeConfig, SourceSpec, build_grid,
                  detect_blowup, detect_extinction, energy_E, run_trajectory)
from dnpe.grid import Field

grid = build_grid(0.0, 1.0, 64)
bump = Field.from_function(grid, lambda x: np.sin(np.pi * x) ** 2)

# %% extinction
params = ModelParams(2.5, 1.5, 0.5, 1.0, BetaSpec(1.25), FluxSpec("zero"),
                     SourceSpec("power", r=0.6), grid)
for scale in (0.1, 0.05):
    traj = run_trajectory(bump * scale, params, SchemeConfig(T=5.0, N=2000))
    rep = detect_extinction(traj, params, k=1.0)
    print(f"amplitude {scale:5.2f}: {traj.label}, decay series nonincreasing: {rep.nonincreasing}")

# %% blow-up: adaptive steps, no truncation of the source
params = ModelParams(2.5, 2.0, 0.5, 0.0, BetaSpec(2.0), FluxSpec("zero"),
                     SourceSpec("power", r=2.0), grid)
for scale in (2000.0, 4000.0, 8000.0):
    u0 = bump * scale
    traj = run_trajectory(u0, params, SchemeConfig(T=1.0, N=100, R=None, adaptive=True))
    rep = detect_blowup(traj, params)
    print(f"amplitude {scale:6.0f}: E(u0) = {energy_E(u0, params):10.3e}, {traj.label}, "
          f"{len(traj.times) - 1} steps, smallest dt {min(traj.dt_history):.2e}")
