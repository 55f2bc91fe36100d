// Command-line runner: simulate / classify / stability / denseness / center /
// arrival / design / verify. Configs are TOML-style key = value documents; all
// randomness comes from explicit seeds, so archives and reports replay
// bit-identically. Exit code 0 means every assertion in the invoked command
// passed; 2 flags usage or configuration errors.
#include <CLI11.hpp>

#include "sphereflow/experiments.hpp"
#include "sphereflow/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace sphereflow;
namespace fs = std::filesystem;

namespace {

ExperimentConfig load_config(const std::string& path, const std::string& inline_overrides) {
  ExperimentConfig cfg;
  if (!path.empty()) cfg = ExperimentConfig::from_file(path);
  if (!inline_overrides.empty()) {
    // Overrides use the same grammar, ';' separated; dotted keys reach sections.
    std::string text;
    for (char c : inline_overrides) text += c == ';' ? '\n' : c;
    cfg.apply(text);
  }
  cfg.validate();
  return cfg;
}

void write_json(const fs::path& path, const io::json& j) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  std::cout << "wrote " << path.string() << "\n";
}

io::json report_json(const SingularityReport& r) { return io::to_json(r); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral simulator for rescaled mean curvature flow near the round sphere"};
  app.require_subcommand(0, 1);

  std::string config_path, overrides, out_dir = "out";
  bool print_config = false;
  app.add_option("--config", config_path, "config file (TOML-style key = value)");
  app.add_option("--set", overrides, "inline overrides, e.g. \"dt = 1e-3; horizon = 4\"");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--print-config", print_config, "print the effective config and exit");

  auto* sim = app.add_subcommand("simulate", "evolve the configured flow and write an archive");
  bool sim_unrescaled = false;
  sim->add_flag("--unrescaled", sim_unrescaled, "integrate the unrescaled flow instead");

  auto* cls = app.add_subcommand("classify", "classify a stored trajectory archive");
  std::string cls_archive;
  cls->add_option("--archive", cls_archive, "archive directory")->required();

  auto* stab = app.add_subcommand("stability", "seeded perturb-center-reclassify experiment");
  auto* dens = app.add_subcommand("denseness", "designed-perturbation experiment on a fast flow");
  auto* cent = app.add_subcommand("center", "fit the extinction event and the centering map");
  auto* arr = app.add_subcommand("arrival", "arrival-time probes on slow and round runs");
  auto* des = app.add_subcommand("design", "compute the degree-2-maximizing perturbation");

  auto* ver = app.add_subcommand("verify", "run named verification suites");
  std::vector<std::string> suites;
  ver->add_option("--suite", suites, "suite name(s); use 'all' for every suite");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(config_path, overrides);
    cfg.output_dir = out_dir;
    if (print_config) {
      std::cout << cfg.print();
      return 0;
    }
    const fs::path out(out_dir);

    if (*sim) {
      SphereGrid grid(cfg.n, cfg.k_max);
      const SpectralField u0 = experiments::make_perturbation(grid, cfg.base, cfg.seeds.front());
      fs::create_directories(out);
      if (sim_unrescaled) {
        McfControls mctl;
        mctl.dt = cfg.mcf_dt;
        mctl.stop_inradius = cfg.mcf_stop_inradius;
        mctl.snapshot_every = 2e-3;
        McfResult res = evolve_mcf(grid, RadialGraph::from_graph_function(grid, u0, 2.0),
                                   Eigen::Vector3d::Zero(), mctl);
        io::write_archive(out / "trajectory", res.traj, cfg.seeds);
      } else {
        EvolveControls ctl;
        ctl.dt = cfg.dt;
        ctl.horizon = cfg.horizon;
        ctl.snapshot_every = cfg.snapshot_every;
        FlowTrajectory traj = evolve_rescaled(grid, u0, ctl);
        io::write_archive(out / "trajectory", traj, cfg.seeds);
        if (traj.stop) {
          std::cerr << "flow stopped early: " << traj.stop->reason << "\n";
          return 1;
        }
      }
      std::cout << "fingerprint " << io::archive_fingerprint(out / "trajectory") << "\n";
      return 0;
    }

    if (*cls) {
      FlowTrajectory traj = io::read_archive(cls_archive);
      ClassifyOptions copts;
      copts.rate_tolerance = cfg.rate_tolerance;
      copts.dominance_factor = cfg.dominance_factor;
      const SingularityReport rep = classify_singularity(traj, copts);
      write_json(out / "classification.json", report_json(rep));
      std::cout << report_json(rep).dump(2) << "\n";
      return 0;
    }

    if (*stab) {
      const auto rep = experiments::stability_experiment(cfg);
      io::json j;
      j["base"] = report_json(rep.base_report);
      j["slow"] = rep.slow;
      j["fast"] = rep.fast;
      j["indeterminate"] = rep.indeterminate;
      j["excluded"] = rep.excluded;
      io::json trials = io::json::array();
      for (const auto& t : rep.trials) {
        io::json tj;
        tj["seed"] = t.seed;
        tj["excluded"] = t.excluded;
        tj["centering_norm"] = t.centering_norm;
        if (t.excluded)
          tj["note"] = t.note;
        else
          tj["report"] = report_json(t.report);
        trials.push_back(tj);
      }
      j["trials"] = trials;
      write_json(out / "stability.json", j);
      std::cout << "slow " << rep.slow << "/" << rep.trials.size() << "\n";
      return 0;
    }

    if (*dens) {
      const auto rep = experiments::denseness_experiment(cfg);
      io::json j;
      j["base"] = report_json(rep.base_report);
      j["design_ratio"] = rep.design_ratio;
      j["design_rank"] = rep.design_rank;
      j["designed"] = report_json(rep.designed_report);
      j["control"] = report_json(rep.control_report);
      write_json(out / "denseness.json", j);
      std::cout << "design ratio " << rep.design_ratio << ", designed verdict "
                << report_json(rep.designed_report)["verdict"] << "\n";
      return 0;
    }

    if (*cent) {
      SphereGrid grid(cfg.n, cfg.k_max);
      const SpectralField u0 = experiments::make_perturbation(grid, cfg.base, cfg.seeds.front());
      CenteredData cd = center_to_reference(
          grid, RadialGraph::from_graph_function(grid, u0, 2.0), experiments::pipeline_options(cfg));
      io::json j;
      j["event"] = io::to_json(cd.event);
      j["to_reference"] = io::to_json(cd.to_reference);
      write_json(out / "centering.json", j);
      return 0;
    }

    if (*arr) {
      const auto rep = experiments::arrival_experiment(cfg);
      io::json j;
      j["slow"] = {{"hessian", io::to_json(rep.slow_hessian)},
                   {"third", io::to_json(rep.slow_third)}};
      j["round"] = {{"hessian", io::to_json(rep.round_hessian)},
                    {"third", io::to_json(rep.round_third)}};
      j["sampler_noise"] = rep.sampler_noise;
      j["pk_alignment"] = rep.pk_alignment;
      j["expansion_detected"] = rep.slow_expansion.detected;
      j["expansion_degree"] = rep.slow_expansion.k;
      write_json(out / "arrival.json", j);
      return 0;
    }

    if (*des) {
      SphereGrid grid(cfg.n, cfg.design_k_max);
      const SpectralField u0 = experiments::make_perturbation(grid, cfg.base, cfg.seeds.front());
      EvolveControls ctl;
      ctl.dt = cfg.design_dt;
      ctl.horizon = cfg.design_time;
      ctl.snapshot_every = cfg.design_time / 4;
      FlowTrajectory traj = evolve_rescaled(grid, u0, ctl);
      PropagatorMatrix P = propagator_matrix(grid, traj, 0.0, cfg.design_time);
      DesignResult res = design_perturbation(grid, P, {});
      fs::create_directories(out);
      io::write_field_csv(out / "designed_direction.csv", res.v0);
      io::json j;
      j["achieved_ratio"] = res.achieved_ratio;
      j["rank"] = res.subspace_rank;
      j["ok"] = res.ok;
      j["singular_values"] =
          std::vector<double>(P.singular_values.data(),
                              P.singular_values.data() + P.singular_values.size());
      write_json(out / "design.json", j);
      if (!res.ok) {
        std::cerr << "achieved ratio " << res.achieved_ratio
                  << " below target (propagation time too short or band too low)\n";
        return 1;
      }
      return 0;
    }

    if (*ver) {
      if (suites.empty()) {
        std::cerr << "verify: no suite given; available:";
        for (const auto& s : experiments::verify_suite_names()) std::cerr << " " << s;
        std::cerr << "\n";
        return 2;
      }
      if (suites.size() == 1 && suites[0] == "all") suites = experiments::verify_suite_names();
      bool all_pass = true;
      for (const auto& s : suites) {
        const auto checks = experiments::run_verify_suite(s, cfg);
        for (const auto& c : checks) {
          std::printf("[%s] %-45s %s\n", c.pass ? "PASS" : "FAIL", (s + ": " + c.name).c_str(),
                      c.details.c_str());
          all_pass = all_pass && c.pass;
        }
      }
      return all_pass ? 0 : 1;
    }

    std::cout << app.help();
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
