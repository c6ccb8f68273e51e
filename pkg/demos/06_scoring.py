"""
Scoring predicted runouts against reference simulations
=======================================================

The evaluation metrics compare a predicted footprint and thickness field
against a reference run: precision/recall/F1/IoU on the footprint, RMSE
inside and outside the reference mask, and the maximum runout distance
from the source centroid.
"""

from runout.metrics import max_runout_distance, score_footprint, score_thickness
from runout.solver import MaterialParams, SolverConfig, run
from runout.source import SourceSpec, build_pile
from runout.synthetic import valley_dem

dem = valley_dem(96, 96)
cfg = SolverConfig(t_max=240.0)

reference = run(dem, build_pile(dem.geo, SourceSpec(volume=2e6)),
                MaterialParams(density_rho=1800.0, cohesion_c=10_000.0), cfg)

# Stand-in "prediction": the same setup with slightly different cohesion,
# mimicking an imperfect surrogate.
predicted = run(dem, build_pile(dem.geo, SourceSpec(volume=2e6)),
                MaterialParams(density_rho=1800.0, cohesion_c=13_000.0), cfg)

fs = score_footprint(predicted.footprint, reference.footprint)
print(f"footprint: precision {fs.precision:.3f}, recall {fs.recall:.3f}, "
      f"F1 {fs.f1:.3f}, IoU {fs.iou:.3f}")

ts = score_thickness(predicted.final_h, reference.final_h, reference.footprint)
print(f"thickness: rmse_in {ts.rmse_in:.2f} m, rmse_out {ts.rmse_out:.3f} m, "
      f"bias_in {ts.bias_in:+.2f} m")

centroid = ((dem.geo.rows - 1) / 2.0, (dem.geo.cols - 1) / 2.0)
r_pred = max_runout_distance(predicted.footprint, centroid)
r_ref = max_runout_distance(reference.footprint, centroid)
print(f"max runout: predicted {r_pred:.1f} px vs reference {r_ref:.1f} px "
      f"(error {abs(r_pred - r_ref):.1f} px)")
