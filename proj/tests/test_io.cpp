#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphereflow/experiments.hpp"
#include "sphereflow/io.hpp"
#include "test_rng.hpp"

#include <filesystem>

using namespace sphereflow;
namespace fs = std::filesystem;

namespace {
struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("sphereflow_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("field CSV round trip is bitwise") {
  TempDir tmp;
  TestRng rng(41);
  SpectralField f = random_field(rng, 2, 9, 0, 9);
  f *= 1.0 / 3.0;  // force non-terminating decimals
  io::write_field_csv(tmp.path / "f.csv", f);
  SpectralField g = io::read_field_csv(tmp.path / "f.csv");
  CHECK(g.n == f.n);
  CHECK(g.k_max == f.k_max);
  CHECK(g.c == f.c);  // exact: 17 significant digits round-trip doubles
}

TEST_CASE("radial graph with sidecar") {
  TempDir tmp;
  SphereGrid grid(2, 6);
  RadialGraph g = RadialGraph::sphere(grid, 2.0);
  io::write_radial_graph(tmp.path / "g.csv", g, "round shrinker");
  RadialGraph h = io::read_radial_graph(tmp.path / "g.csv");
  CHECK(h.n == 2);
  CHECK(h.profile.c == g.profile.c);
}

TEST_CASE("trajectory archives replay bit-identically") {
  TempDir tmp;
  SphereGrid grid(2, 6);
  SpectralField u0 = SpectralField::harmonic(2, 6, 2, 1, 1e-3);
  EvolveControls ctl;
  ctl.dt = 2e-3;
  ctl.horizon = 0.2;
  ctl.snapshot_every = 0.05;
  FlowTrajectory traj = evolve_rescaled(grid, u0, ctl);

  io::write_archive(tmp.path / "a", traj, {3, 5});
  FlowTrajectory loaded = io::read_archive(tmp.path / "a");
  CHECK(loaded.snapshots.size() == traj.snapshots.size());
  CHECK(loaded.dt == traj.dt);
  for (size_t i = 0; i < traj.snapshots.size(); ++i) {
    CHECK(loaded.snapshots[i].time == traj.snapshots[i].time);
    CHECK(loaded.snapshots[i].profile.c == traj.snapshots[i].profile.c);
  }

  // Re-running the identical configuration reproduces the fingerprint.
  FlowTrajectory traj2 = evolve_rescaled(grid, u0, ctl);
  io::write_archive(tmp.path / "b", traj2, {3, 5});
  CHECK(io::archive_fingerprint(tmp.path / "a") == io::archive_fingerprint(tmp.path / "b"));

  // Re-dumping the loaded archive also reproduces it.
  io::write_archive(tmp.path / "c", loaded, {3, 5});
  CHECK(io::archive_fingerprint(tmp.path / "c") == io::archive_fingerprint(tmp.path / "a"));
}

TEST_CASE("seeded perturbations are deterministic") {
  SphereGrid grid(2, 8);
  PerturbationSpec spec;
  spec.amplitude = 1e-3;
  SpectralField a = experiments::make_perturbation(grid, spec, 7);
  SpectralField b = experiments::make_perturbation(grid, spec, 7);
  SpectralField c = experiments::make_perturbation(grid, spec, 8);
  CHECK(a.c == b.c);
  CHECK(a.c != c.c);
  CHECK(q_norm(a) == doctest::Approx(1e-3).epsilon(1e-12));

  PerturbationSpec modes;
  modes.modes = {{2, 0, 1.0}, {3, 1, 0.5}};
  modes.amplitude = 2e-3;
  SpectralField m = experiments::make_perturbation(grid, modes, 0);
  CHECK(q_norm(m) == doctest::Approx(2e-3).epsilon(1e-12));
  CHECK(m(2, 0) / m(3, 1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("config document round trip and validation") {
  ExperimentConfig def;
  ExperimentConfig re = ExperimentConfig::from_string(def.print());
  CHECK(re.print() == def.print());

  ExperimentConfig cfg = ExperimentConfig::from_string(R"(
n = 2
k_max = 12
dt = 2e-3
seeds = [4, 5, 6]
output_dir = "results"

[perturbation]
amplitude = 5e-4
modes = [[2, -1, 1.0], [4, 0, 0.25]]
)");
  CHECK(cfg.k_max == 12);
  CHECK(cfg.dt == 2e-3);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(cfg.output_dir == "results");
  CHECK(cfg.perturbation.modes.size() == 2);
  CHECK(cfg.perturbation.modes[1].k == 4);
  CHECK(cfg.perturbation.modes[1].weight == 0.25);
  cfg.validate();

  CHECK_THROWS_AS(ExperimentConfig::from_string("nope = 1"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_string("dt 1e-3"), std::invalid_argument);

  ExperimentConfig bad;
  bad.dt = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ExperimentConfig bad2;
  bad2.seeds.clear();
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}

TEST_CASE("report serialization carries the documented fields") {
  SingularityReport rep;
  rep.verdict = SingularityReport::Verdict::Slow;
  rep.dominant_degree = 2;
  rep.decay_rate = -0.5;
  rep.pk_coeffs = SpectralField::harmonic(2, 6, 2, 1, 0.25);
  rep.gap = 1.5;
  const io::json j = io::to_json(rep);
  CHECK(j.at("verdict") == "slow");
  CHECK(j.at("dominant_degree") == 2);
  CHECK(j.at("pk_coeffs").size() == 5);

  CenteringTransform c;
  c.alpha = 0.99;
  c.translation = Eigen::Vector3d(0.01, 0, 0);
  CHECK(io::to_json(c).at("norm").get<double>() == doctest::Approx(0.02));
}

TEST_CASE("arrival samples CSV") {
  TempDir tmp;
  ArrivalSamples s;
  s.event.time = 1.0;
  s.points = {Eigen::Vector3d(0.1, 0, 0), Eigen::Vector3d(0, 0.2, 0)};
  s.times = {0.9975, 0.99};
  io::write_arrival_csv(tmp.path / "samples.csv", s);
  CHECK(fs::exists(tmp.path / "samples.csv"));
}
