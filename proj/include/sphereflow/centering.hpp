// Extinction-event estimation for unrescaled flows and the centering map: the
// parabolic similarity (dilation + translation) that moves a perturbed flow's
// singular spacetime point onto a reference one. Centering is computed from
// fitted extinction events; the growing modes make shooting on (alpha, beta U)
// ill-conditioned, while the event fit is a stable two-point problem.
#pragma once

#include "sphereflow/analysis.hpp"

namespace sphereflow {

struct ExtinctionEvent {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double time = 0.0;
  double residual = 0.0;  // rms residual of the radius-law fit
};

struct ExtinctionFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExtinctionFitOptions {
  // Snapshots with mean radius in [stop_radius, window_factor * stop_radius]
  // enter the fit; the radius-squared law is extrapolated to zero.
  double window_factor = 10.0;
  double residual_threshold = 1e-3;
};

ExtinctionEvent fit_extinction(const SphereGrid& grid, const McfResult& mcf,
                               const ExtinctionFitOptions& opts = {});

struct CenteringTransform {
  double alpha = 1.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  double norm() const { return std::abs(alpha - 1.0) + translation.norm(); }
  SimilarityAction action() const {
    SimilarityAction s;
    s.alpha = alpha;
    s.beta = translation.norm();
    if (s.beta > 0) s.U = translation / s.beta;
    return s;
  }
};

// The unique parabolic similarity carrying the perturbed event to the base one:
// dilation alpha = sqrt(T_base/T_pert) acting as (x,tau) -> (alpha x, alpha^2 tau),
// then the spatial translation closing the gap.
CenteringTransform centering_map(const ExtinctionEvent& base, const ExtinctionEvent& perturbed);

// ---------------------------------------------------------------------------
// Centered-run pipeline: run the unrescaled flow, fit its event, and map it to
// the reference spacetime point (0, 1) so the rescaled flow of the recentered
// data is the zoom-in at the singularity.

struct CenteringPipelineOptions {
  McfControls mcf;
  ExtinctionFitOptions fit;
  CenteringPipelineOptions() {
    mcf.dt = 1e-4;
    mcf.snapshot_every = 2e-3;
  }
};

struct CenteredData {
  RadialGraph initial;          // recentered initial surface
  ExtinctionEvent event;        // fitted event of the input flow
  CenteringTransform to_reference;
};
CenteredData center_to_reference(const SphereGrid& grid, const RadialGraph& g0,
                                 const CenteringPipelineOptions& opts = {});

// Recenter a perturbed initial surface onto the singular spacetime point of a
// base flow, re-evolve the rescaled flow, and report how the difference to the
// base graphs splits across X+/X2/X-.
struct RecenterReport {
  CenteringTransform transform;
  ExtinctionEvent base_event, perturbed_event;
  FlowTrajectory recentered;     // rescaled flow of the recentered data
  SpectralField difference;      // w(T) - f(T)
  double frac_plus = 0, frac_two = 0, frac_minus = 0;  // Q-fractions of the difference
};
RecenterReport recenter_and_compare(const SphereGrid& grid, const FlowTrajectory& base_traj,
                                    const RadialGraph& perturbed_initial, double T,
                                    const CenteringPipelineOptions& opts = {});

}  // namespace sphereflow
