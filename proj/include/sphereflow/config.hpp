// Experiment configuration: a flat TOML-compatible key-value document with
// sections, explicit seeds and documented ranges. --print-config emits the
// defaults in the same grammar.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sphereflow {

struct PerturbationSpec {
  // Explicit mode mixture (k, m, weight). When empty, `random_degrees`
  // Gaussian content on [k_lo, k_hi] is drawn per seed.
  struct Mode {
    int k = 2;
    int m = 0;
    double weight = 1.0;
  };
  std::vector<Mode> modes;
  int random_k_lo = 2;
  int random_k_hi = 6;
  double amplitude = 1e-4;  // Q-norm of the perturbation
};

struct ExperimentConfig {
  int n = 2;
  int k_max = 16;

  double dt = 1e-3;              // rescaled-flow step, (0, 0.01]
  double mcf_dt = 1e-4;          // unrescaled-flow step
  double horizon = 5.0;          // rescaled horizon
  double snapshot_every = 0.05;
  double mcf_stop_inradius = 0.1;

  std::vector<std::uint64_t> seeds = {0};
  int workers = 2;

  PerturbationSpec base;          // base flow seeding (defaults to a slow flow)
  PerturbationSpec perturbation;  // per-seed perturbations on top of the base

  double rate_tolerance = 0.05;   // |lambda_hat + 1/n| for the slow verdict
  double dominance_factor = 2.0;
  double design_time = 5.0;       // propagation time for the designed direction
  int design_k_max = 12;
  double design_dt = 5e-3;
  double design_epsilon = 1e-4;   // amplitude of the applied designed direction

  std::filesystem::path output_dir = "out";

  ExperimentConfig() {
    base.modes = {{2, 1, 1.0}};
    base.amplitude = 3e-2;
    perturbation.modes.clear();  // random by default
    perturbation.amplitude = 1e-4;
  }

  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_string(const std::string& text);
  // Apply a document on top of *this (overrides; dotted keys reach sections).
  void apply(const std::string& text);
  std::string print() const;
  // Throws std::invalid_argument with a diagnostic when a field is out of range.
  void validate() const;
};

}  // namespace sphereflow
