// Arrival-time reconstruction for mean convex flows with a single spherical
// singularity, the asymptotic-expansion fit near the singular point, and finite
// difference regularity probes (Hessian limit, directional third differences).
//
// Reconstruction is Lagrangian through the rescaled picture: with the
// singularity recentered at the origin and vanishing time T, the front passes
// x = s*omega when e^{-t/2} r_t(omega) = s, so t(x) = T - e^{-t_cross}. The
// rescaled flow resolves radii down to e^{-t_end/2}, which is what makes the
// near-singularity ladder reachable at all.
#pragma once

#include "sphereflow/centering.hpp"

#include <functional>

namespace sphereflow {

struct ArrivalSamples {
  std::vector<Eigen::Vector3d> points;  // relative to the singular point
  std::vector<double> times;
  ExtinctionEvent event;
};

class ArrivalSampler {
 public:
  // The trajectory must be the rescaled flow zoomed at the event (graphs about
  // the origin); its snapshots are interpolated per ray.
  ArrivalSampler(const SphereGrid& grid, FlowTrajectory rescaled, ExtinctionEvent event);

  // Arrival time at x (coordinates relative to the singular point). Throws
  // std::out_of_range when |x| is outside the resolved radius range and
  // GraphInvariantError when the ray crossing is not monotone.
  double operator()(const Eigen::Vector3d& x) const;

  ArrivalSamples sample(const std::vector<Eigen::Vector3d>& points) const;

  double vanishing_time() const { return event_.time; }
  double min_radius() const { return min_radius_; }
  double max_radius() const { return max_radius_; }

  // Max |t(r_j(omega) omega) - tau_j| over snapshots at probe rays: an
  // empirical bound on the interpolation noise, used as the probe floor.
  double self_consistency_error(int n_rays = 8) const;

  // Strict monotone decrease of e^{-t/2} r_t(omega) along one ray.
  bool ray_monotone(const Eigen::Vector3d& omega) const;

 private:
  double radius_at(int snap_index, const Eigen::Vector3d& omega) const;

  const SphereGrid& grid_;
  FlowTrajectory traj_;
  ExtinctionEvent event_;
  double min_radius_ = 0.0, max_radius_ = 0.0;
};

// ---------------------------------------------------------------------------
// Expansion fit: t(x) = T - |x|^2/(2n) + |x|^{k(k-1)/n} P_k(x) + higher order.

struct ExpansionFitOptions {
  std::vector<double> radii;      // defaults to 0.2 * 2^{-j}, j = 0..6
  double slope_tolerance = 0.25;  // acceptance band around the expected exponent
  double noise_floor = 1e-11;     // amplitude floor for a detected degree
  ExpansionFitOptions();
};

struct ExpansionFit {
  bool detected = false;
  int k = 0;
  SpectralField pk;       // harmonic coefficients of P_k over unit directions
  double sigma_hat = 0.0; // residual decay beyond the fitted term
  std::vector<double> radii_used;
  std::vector<double> degree_amplitudes;  // fitted amplitude per degree (diagnostics)
};

ExpansionFit fit_arrival_expansion(const SphereGrid& grid,
                                   const std::function<double(const Eigen::Vector3d&)>& t,
                                   double T, int n,
                                   const ExpansionFitOptions& opts = {});

// ---------------------------------------------------------------------------
// Regularity probes.

struct RegularityProbeOptions {
  std::vector<double> radii;   // defaults to 0.2 * 2^{-j}, j = 0..6
  double step_fraction = 0.25; // finite-difference step h = s * step_fraction
  double time_noise = 1e-13;   // propagated arrival-time noise estimate
  double floor_factor = 10.0;  // statistical floor = factor * propagated noise
  RegularityProbeOptions();
};

struct HessianProbe {
  std::vector<double> radii;
  std::vector<Eigen::Matrix3d> hessians;
  double deviation_from_limit = 0.0;  // || D^2 t(s_min) + Id/n ||_max
  bool consistent = false;            // within tolerance of -Id/n
};
HessianProbe hessian_probe(const std::function<double(const Eigen::Vector3d&)>& t, int n,
                           const RegularityProbeOptions& opts = {}, double tolerance = 0.01);

struct ThirdProbe {
  enum class Verdict { NotC3, C3Consistent, Inconclusive };
  Verdict verdict = Verdict::Inconclusive;
  std::vector<double> radii;                      // resolved radii
  std::vector<double> oscillation;                // max-min of quotients across directions
  std::vector<double> floor;                      // statistical floor per radius
  std::vector<std::vector<double>> quotients;     // per radius, per direction
  double stopped_at = 0.0;                        // smallest resolved radius
};
ThirdProbe third_difference_probe(const std::function<double(const Eigen::Vector3d&)>& t,
                                  const RegularityProbeOptions& opts = {});

}  // namespace sphereflow
