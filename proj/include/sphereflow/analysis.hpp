// Spectral diagnostics along rescaled trajectories: invariant-cone membership
// and growth, decay-rate and dominant-mode extraction, slow/fast classification
// of the limiting behavior, and the constructive perturbation designer that
// maximizes the degree-2 content of the propagated image.
#pragma once

#include "sphereflow/flow.hpp"

namespace sphereflow {

struct ConeQuery {
  enum class Kind {
    AroundPlus,     // kappa ||u_- + u_2|| <= ||u_+||
    AroundPlusTwo,  // kappa ||u_-|| <= ||u_+ + u_2||
  };
  double kappa = 1.0;
  Kind kind = Kind::AroundPlus;
};

struct ConeMembership {
  bool member = false;
  double margin = 0.0;  // ||axis part|| - kappa ||complement part|| in Q-norm
};
ConeMembership cone_membership(const SpectralField& u, const ConeQuery& q);

// Largest kappa for which u still lies in the cone (inf when the complement vanishes).
double effective_cone_parameter(const SpectralField& u, ConeQuery::Kind kind);

struct ConeGrowthOptions {
  double kappa0 = 1.0;
  int m = 4;
  double regime_c2 = 5e-2;   // C^2-surrogate bound delta_0 for both flows
  double cap = 1e6;          // treat parameters above this as capped
  double floor_factor = 0.99;  // slack on the per-unit growth floors
};

struct ConeGrowthReport {
  std::vector<double> times;
  std::vector<double> kappa_plus;   // effective K+ parameter of the difference
  std::vector<double> kappa_full;   // effective K parameter
  bool regime_ok = false;
  bool plus_growth_ok = false;      // every unit interval: factor >= e^{1/4} or capped
  bool full_growth_ok = false;      // factor >= e^{1/n} or capped
  double plus_total_factor = 0.0;
  double full_total_factor = 0.0;
  double empirical_cap_plus = 0.0;
  double empirical_cap_full = 0.0;
};
ConeGrowthReport cone_growth_check(const SphereGrid& grid, const FlowTrajectory& a,
                                   const FlowTrajectory& b, const ConeGrowthOptions& opts);

// ---------------------------------------------------------------------------
// Decay-rate extraction and classification

struct DecayOptions {
  // Norm floor/cap select the usable part of the trajectory; the fit window is
  // the last `window_fraction` of it.
  double norm_floor = 1e-8;
  double norm_cap = 1e-2;
  double window_fraction = 0.4;
  // Full: fit on ||u||_Q. Decaying: fit on ||(pi_2 + pi_-) u||_Q, which is the
  // classification mode (centering residues live in X_+ and grow).
  enum class NormMode { Full, Decaying } mode = NormMode::Full;
  int min_points = 4;
};

struct DecayFit {
  double lambda_hat = 0.0;   // least-squares slope of the log-norm
  int dominant_degree = 0;   // dominant harmonic degree over the window
  SpectralField pk;          // fitted profile of the dominant degree
  double sigma_hat = 0.0;    // residual decay gap
  double window_begin = 0.0;
  double window_end = 0.0;
  double fit_residual = 0.0;     // rms residual of the log-norm fit
  double plus_fraction_end = 0.0;    // Q-fraction of X_+ at the window end
  double two_vs_minus_end = 0.0;     // ||pi_2 u|| / ||pi_- u|| at the window end
};
DecayFit decay_rate(const FlowTrajectory& traj, const DecayOptions& opts = {});

struct SingularityReport {
  enum class Verdict { Slow, Fast, Indeterminate };
  Verdict verdict = Verdict::Indeterminate;
  int dominant_degree = 0;
  double decay_rate = 0.0;
  SpectralField pk_coeffs;
  double gap = 0.0;
  double window_begin = 0.0, window_end = 0.0;
  double fit_residual = 0.0;
  double plus_fraction_end = 0.0;
  std::string reason;
};

struct ClassifyOptions {
  DecayOptions decay;
  double rate_tolerance = 0.05;   // |lambda_hat + 1/n| for the slow verdict
  double dominance_factor = 2.0;  // pi_2 vs pi_- tie-break band
  ClassifyOptions() { decay.mode = DecayOptions::NormMode::Decaying; }
};
SingularityReport classify_singularity(const FlowTrajectory& traj,
                                       const ClassifyOptions& opts = {});

// ---------------------------------------------------------------------------
// Perturbation design (dense-image mechanism, used constructively)

struct DesignOptions {
  double budget = 1.0;          // L^2(M_0) norm of the returned direction
  double rank_cutoff = 1e-10;   // relative singular-value cutoff of the propagator
  double target = 0.9;          // achieved-ratio threshold for `ok`
  bool exclude_two_input = false;  // restrict v0 orthogonal to X_2 (diagnostics)
};

struct DesignResult {
  SpectralField v0;
  double achieved_ratio = 0.0;  // ||pi_2 T v0||_Q / ||T v0||_Q
  bool ok = false;
  int subspace_rank = 0;
};
DesignResult design_perturbation(const SphereGrid& grid, const PropagatorMatrix& P,
                                 const DesignOptions& opts = {});

}  // namespace sphereflow
