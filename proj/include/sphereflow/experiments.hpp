// Experiment drivers shared by the command-line tool and the acceptance suite:
// seeded perturbations, the centered base-flow pipeline, the stability and
// denseness experiments, the arrival-regularity run, and the named
// verification suites.
#pragma once

#include "sphereflow/arrival.hpp"
#include "sphereflow/centering.hpp"
#include "sphereflow/config.hpp"
#include "sphereflow/rng.hpp"

namespace sphereflow::experiments {

SpectralField make_perturbation(const SphereGrid& grid, const PerturbationSpec& spec,
                                std::uint64_t seed);

CenteringPipelineOptions pipeline_options(const ExperimentConfig& cfg);

struct BaseFlow {
  RadialGraph initial;      // initial surface after centering to (0, 1)
  FlowTrajectory rescaled;  // rescaled run of the centered data
  ExtinctionEvent event;    // fitted event of the uncentered input flow
};
BaseFlow make_centered_base(const SphereGrid& grid, const SpectralField& u0,
                            const ExperimentConfig& cfg,
                            SymmetryTag symmetry = SymmetryTag::None);

// One perturb-center-reclassify trial on top of a centered base surface.
struct Trial {
  std::uint64_t seed = 0;
  SingularityReport report;
  double centering_norm = 0.0;
  bool excluded = false;  // perturbation left the graph regime
  std::string note;
};
Trial stability_trial(const SphereGrid& grid, const RadialGraph& base_initial,
                      const ExperimentConfig& cfg, std::uint64_t seed);

struct StabilityReport {
  SingularityReport base_report;
  std::vector<Trial> trials;  // sorted by seed
  int slow = 0, fast = 0, indeterminate = 0, excluded = 0;
};
StabilityReport stability_experiment(const ExperimentConfig& cfg);

struct DensenessReport {
  SingularityReport base_report;      // control: fast flow, no perturbation
  double design_ratio = 0.0;          // achieved ||pi_2 T v0|| / ||T v0||
  int design_rank = 0;
  SingularityReport designed_report;  // after applying epsilon * v0 and centering
  SingularityReport control_report;   // designed direction withheld
  double centering_norm = 0.0;
};
DensenessReport denseness_experiment(const ExperimentConfig& cfg);

struct ArrivalReport {
  // Slow run: amplitude from cfg.base; round run: exact shrinker data.
  HessianProbe slow_hessian, round_hessian;
  ThirdProbe slow_third, round_third;
  ExpansionFit slow_expansion;
  double pk_alignment = 0.0;  // |<pk_arrival, pk_decay>| / (norms), 1 = parallel
  double sampler_noise = 0.0;
};
ArrivalReport arrival_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Verification suites (named, CLI-facing). Each check is one line of the table.

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string details;
};

std::vector<std::string> verify_suite_names();
std::vector<VerifyCheck> run_verify_suite(const std::string& suite, const ExperimentConfig& cfg);

// Shared criterion bodies (parameterized; the acceptance suite pins the documented tolerances).
struct SlopeFit {
  double slope = 0.0;
  double ci_half_width = 0.0;  // 95% two-sided, Student t
};
SlopeFit loglog_slope_ci(const std::vector<double>& x, const std::vector<double>& y);

struct ConeCriterion {
  int pairs = 0;
  int violations = 0;
  double min_total_factor = 0.0;
};
ConeCriterion cone_criterion(const SphereGrid& grid, int n_pairs, double dt, int m);

struct DuhamelCriterion {
  double matrix_residual = 0.0;  // max over probes
  double pde_gap = 0.0;
};
DuhamelCriterion duhamel_criterion(int k_max, double dt, double t1);

SlopeFit similarity_ladder(const SphereGrid& grid);

struct TransplantSweep {
  std::vector<double> mu;
  std::vector<double> ratio;  // ||v - (f+g)||_Q / ||g||_Q, worst over trials
};
TransplantSweep transplant_sweep(const SphereGrid& grid, const std::vector<double>& mu);

struct ClosenessLadders {
  SlopeFit pair_gap;    // two nearby flows vs the heat flow of their difference
  SlopeFit linear_gap;  // nonlinear perturbation vs the linearized propagator
};
ClosenessLadders closeness_ladders(const SphereGrid& grid, double dt);

}  // namespace sphereflow::experiments
