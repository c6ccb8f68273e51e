"""
Probabilistic hazard mapping from an ensemble
=============================================

When source volume and material properties are uncertain, run many
simulations over a Sobol parameter sweep and reduce them pixelwise: the
reach probability is the fraction of members inundating a cell, and the
deposit-thickness quantiles (q50, q90) bound how deep the deposit is
likely to be.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from runout.ensemble import EnsembleConfig, run_ensemble
from runout.sampling import ParamRanges
from runout.solver import SolverConfig
from runout.synthetic import valley_dem

dem = valley_dem(96, 96, channel_slope_deg=12.0)
cfg = EnsembleConfig(
    n_members=24,
    ranges=ParamRanges(volume_log10=(5.7, 6.7), cohesion=(5_000.0, 30_000.0)),
    sampler="sobol",
    solver=SolverConfig(t_max=180.0),
)
product = run_ensemble(dem, cfg)
print(f"{product.n_members} members in {product.wall_time_s:.1f} s "
      f"({product.n_failed} failed)")

p = product.p_reach.values
print(f"cells with any reach: {(p > 0).sum()}, certain reach: {(p == 1.0).sum()}")
print(f"q90 exceeds q50 on {(product.q90.values > product.q50.values).sum()} cells")

fig, axes = plt.subplots(1, 3, figsize=(14, 4))
im = axes[0].imshow(p, cmap="inferno", vmin=0, vmax=1)
axes[0].set_title("reach probability")
fig.colorbar(im, ax=axes[0], shrink=0.8)
for ax, field, label in ((axes[1], product.q50.values, "q50 thickness (m)"),
                         (axes[2], product.q90.values, "q90 thickness (m)")):
    im = ax.imshow(np.where(field > 0, field, np.nan), cmap="viridis")
    ax.set_title(label)
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.tight_layout()
fig.savefig("demo05_hazard_maps.png", dpi=110)
print("wrote demo05_hazard_maps.png")
