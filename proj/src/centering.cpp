#include "sphereflow/centering.hpp"

#include <cmath>

namespace sphereflow {

ExtinctionEvent fit_extinction(const SphereGrid& grid, const McfResult& mcf,
                               const ExtinctionFitOptions& opts) {
  const auto& snaps = mcf.traj.snapshots;
  if (snaps.size() < 4) throw ExtinctionFitError("fit_extinction: too few snapshots");

  // Collect barycenter and mean radius on the final window.
  struct Row {
    double tau, rho;
    Eigen::Vector3d b;
  };
  std::vector<Row> rows;
  const double lo = mcf.stop_inradius;
  const double hi = opts.window_factor * mcf.stop_inradius;
  for (const auto& s : snaps) {
    const Eigen::Vector3d b = surface_barycenter(grid, s);
    const double rho = radius_about(grid, s, b).mean;
    if (rho <= hi && rho >= lo * 0.5) rows.push_back({s.time, rho, b});
  }
  if (rows.size() < 4) throw ExtinctionFitError("fit_extinction: final window too short");

  // Per-snapshot vanishing-time estimates tau + rho^2/(2n), extrapolated to
  // rho -> 0 by a linear fit in rho^2 (absorbs the leading model correction).
  const int n = static_cast<int>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = r.rho * r.rho;
    const double y = r.tau + r.rho * r.rho / (2.0 * grid.n());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / den;
  const double T = (sy - slope * sx) / n;

  double ss = 0;
  for (const auto& r : rows) {
    const double x = r.rho * r.rho;
    const double y = r.tau + x / (2.0 * grid.n());
    const double resid = y - (T + slope * x);
    ss += resid * resid;
  }
  const double residual = std::sqrt(ss / n);
  if (residual > opts.residual_threshold)
    throw ExtinctionFitError("fit_extinction: radius law fit residual " +
                             std::to_string(residual) + " (non-spherical collapse?)");

  // Extinction point: barycenters extrapolated linearly in rho.
  Eigen::Vector3d point;
  for (int c = 0; c < 3; ++c) {
    double px = 0, py = 0, pxx = 0, pxy = 0;
    for (const auto& r : rows) {
      px += r.rho;
      py += r.b[c];
      pxx += r.rho * r.rho;
      pxy += r.rho * r.b[c];
    }
    const double pden = n * pxx - px * px;
    const double pslope = (n * pxy - px * py) / pden;
    point[c] = (py - pslope * px) / n;
  }

  ExtinctionEvent ev;
  ev.point = point;
  ev.time = T;
  ev.residual = residual;
  if (!(ev.time >= mcf.window_begin - 1e-6 && ev.time <= mcf.window_end + 1e-6))
    throw ExtinctionFitError("fit_extinction: fitted time outside the bracketing window");
  return ev;
}

CenteringTransform centering_map(const ExtinctionEvent& base, const ExtinctionEvent& perturbed) {
  CenteringTransform c;
  c.alpha = std::sqrt(base.time / perturbed.time);
  c.translation = base.point - c.alpha * perturbed.point;
  return c;
}

CenteredData center_to_reference(const SphereGrid& grid, const RadialGraph& g0,
                                 const CenteringPipelineOptions& opts) {
  McfResult mcf = evolve_mcf(grid, g0, Eigen::Vector3d::Zero(), opts.mcf);
  CenteredData out;
  out.event = fit_extinction(grid, mcf, opts.fit);

  ExtinctionEvent reference;
  reference.point = Eigen::Vector3d::Zero();
  reference.time = 1.0;
  out.to_reference = centering_map(reference, out.event);
  out.initial = apply_similarity(grid, g0, out.to_reference.action());
  return out;
}

RecenterReport recenter_and_compare(const SphereGrid& grid, const FlowTrajectory& base_traj,
                                    const RadialGraph& perturbed_initial, double T,
                                    const CenteringPipelineOptions& opts) {
  const double R = sphere_radius(grid.n());
  RecenterReport rep;

  // Events of both flows from the same unrescaled pipeline.
  RadialGraph base_initial(base_traj.snapshots.front().profile, grid.n());
  McfResult base_mcf = evolve_mcf(grid, base_initial, Eigen::Vector3d::Zero(), opts.mcf);
  rep.base_event = fit_extinction(grid, base_mcf, opts.fit);
  McfResult pert_mcf = evolve_mcf(grid, perturbed_initial, Eigen::Vector3d::Zero(), opts.mcf);
  rep.perturbed_event = fit_extinction(grid, pert_mcf, opts.fit);

  rep.transform = centering_map(rep.base_event, rep.perturbed_event);
  RadialGraph recentered = apply_similarity(grid, perturbed_initial, rep.transform.action());

  EvolveControls ctl;
  ctl.dt = base_traj.dt;
  ctl.horizon = T;
  ctl.snapshot_every = base_traj.snapshot_every;
  ctl.symmetry = SymmetryTag::None;
  rep.recentered = evolve_rescaled(grid, graph_function(recentered, R), ctl);
  if (!rep.recentered.covers(T))
    throw GraphInvariantError("recenter_and_compare: recentered flow lost the graph before T");

  const SpectralField w = graph_of(rep.recentered.at_time(T), R);
  const SpectralField f = graph_of(base_traj.at_time(T), R);
  rep.difference = w - f;
  const ModeSplit split = mode_split(rep.difference);
  const double total = q_norm(rep.difference);
  if (total > 0) {
    rep.frac_plus = split.q_plus / total;
    rep.frac_two = split.q_two / total;
    rep.frac_minus = split.q_minus / total;
  }
  return rep;
}

}  // namespace sphereflow
