#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphereflow/centering.hpp"
#include "test_rng.hpp"

#include <cmath>

using namespace sphereflow;

namespace {
// Unit tests run the unrescaled pipeline at a coarser dt than the experiment
// default; the fitted-event accuracy scales as dt^2 and stays far below the
// tolerances asserted here.
CenteringPipelineOptions fast_pipeline() {
  CenteringPipelineOptions o;
  o.mcf.dt = 2e-4;
  o.mcf.snapshot_every = 5e-3;
  return o;
}
}  // namespace

TEST_CASE("extinction events of closed-form flows") {
  SphereGrid grid(2, 8);
  const auto opts = fast_pipeline();

  SUBCASE("round sphere vanishes at (0, 1)") {
    McfResult mcf = evolve_mcf(grid, RadialGraph::sphere(grid, 2.0), Eigen::Vector3d::Zero(),
                               opts.mcf);
    ExtinctionEvent ev = fit_extinction(grid, mcf);
    CHECK(ev.point.norm() < 1e-6);
    CHECK(std::abs(ev.time - 1.0) < 1e-6);
    CHECK(ev.time >= mcf.window_begin);
    CHECK(ev.time <= mcf.window_end);
  }

  SUBCASE("translated sphere vanishes at its center") {
    const Eigen::Vector3d v(0.3, 0.0, 0.0);
    RadialGraph moved =
        apply_similarity(grid, RadialGraph::sphere(grid, 2.0), SimilarityAction::translation(v));
    McfResult mcf = evolve_mcf(grid, moved, Eigen::Vector3d::Zero(), opts.mcf);
    ExtinctionEvent ev = fit_extinction(grid, mcf);
    CHECK((ev.point - v).norm() < 1e-6);
    CHECK(std::abs(ev.time - 1.0) < 1e-6);
  }

  SUBCASE("small random perturbations stay near (0, 1)") {
    TestRng rng(18);
    SpectralField u0 = random_field(rng, 2, 8, 0, 6);
    u0 *= 1e-3 / q_norm(u0);
    McfResult mcf = evolve_mcf(grid, RadialGraph::from_graph_function(grid, u0, 2.0),
                               Eigen::Vector3d::Zero(), opts.mcf);
    ExtinctionEvent ev = fit_extinction(grid, mcf);
    CHECK(ev.point.norm() + std::abs(ev.time - 1.0) <= 1e-2);
  }
}

TEST_CASE("centering map recovers constructed dilations and translations") {
  SphereGrid grid(2, 8);
  const auto opts = fast_pipeline();
  RadialGraph base = RadialGraph::sphere(grid, 2.0);
  McfResult base_mcf = evolve_mcf(grid, base, Eigen::Vector3d::Zero(), opts.mcf);
  const ExtinctionEvent base_ev = fit_extinction(grid, base_mcf);

  SUBCASE("pure dilation by 1.01") {
    RadialGraph dil = apply_similarity(grid, base, SimilarityAction::dilation(1.01));
    McfResult mcf = evolve_mcf(grid, dil, Eigen::Vector3d::Zero(), opts.mcf);
    CenteringTransform c = centering_map(base_ev, fit_extinction(grid, mcf));
    CHECK(std::abs(c.alpha - 1.0 / 1.01) < 1e-4);
    CHECK(c.translation.norm() < 1e-5);
  }

  SUBCASE("pure translation") {
    const Eigen::Vector3d v(0.05, -0.1, 0.02);
    RadialGraph moved = apply_similarity(grid, base, SimilarityAction::translation(v));
    McfResult mcf = evolve_mcf(grid, moved, Eigen::Vector3d::Zero(), opts.mcf);
    CenteringTransform c = centering_map(base_ev, fit_extinction(grid, mcf));
    CHECK((c.translation + v).norm() < 1e-5);
    CHECK(std::abs(c.alpha - 1.0) < 1e-5);
  }

  SUBCASE("centering a flow against itself is the identity") {
    CenteringTransform c = centering_map(base_ev, base_ev);
    CHECK(c.norm() < 1e-12);
  }
}

TEST_CASE("centering transform size shrinks with the perturbation") {
  SphereGrid grid(2, 8);
  const auto opts = fast_pipeline();
  RadialGraph base = RadialGraph::sphere(grid, 2.0);
  McfResult base_mcf = evolve_mcf(grid, base, Eigen::Vector3d::Zero(), opts.mcf);
  const ExtinctionEvent base_ev = fit_extinction(grid, base_mcf);

  TestRng rng(77);
  SpectralField shape = random_field(rng, 2, 8, 0, 5);
  shape *= 1.0 / surrogate_norms(grid, shape).c2;

  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    RadialGraph g = RadialGraph::from_graph_function(grid, eps * shape, 2.0);
    McfResult mcf = evolve_mcf(grid, g, Eigen::Vector3d::Zero(), opts.mcf);
    CenteringTransform c = centering_map(base_ev, fit_extinction(grid, mcf));
    CHECK(c.norm() < prev);
    prev = c.norm();
  }
}

TEST_CASE("centering equivariance under pre-translation") {
  SphereGrid grid(2, 8);
  const auto opts = fast_pipeline();
  RadialGraph base = RadialGraph::sphere(grid, 2.0);
  McfResult base_mcf = evolve_mcf(grid, base, Eigen::Vector3d::Zero(), opts.mcf);
  const ExtinctionEvent base_ev = fit_extinction(grid, base_mcf);

  TestRng rng(5);
  SpectralField u0 = random_field(rng, 2, 8, 0, 5);
  u0 *= 2e-3 / surrogate_norms(grid, u0).c2;
  RadialGraph pert = RadialGraph::from_graph_function(grid, u0, 2.0);
  McfResult mcf_p = evolve_mcf(grid, pert, Eigen::Vector3d::Zero(), opts.mcf);
  CenteringTransform c0 = centering_map(base_ev, fit_extinction(grid, mcf_p));

  const Eigen::Vector3d v(0.04, 0.01, -0.03);
  RadialGraph moved = apply_similarity(grid, pert, SimilarityAction::translation(v));
  McfResult mcf_m = evolve_mcf(grid, moved, Eigen::Vector3d::Zero(), opts.mcf);
  CenteringTransform c1 = centering_map(base_ev, fit_extinction(grid, mcf_m));

  CHECK(std::abs(c1.alpha - c0.alpha) < 1e-5);
  CHECK((c1.translation - (c0.translation - c0.alpha * v)).norm() < 1e-5);
}

TEST_CASE("center_to_reference composes to a nearly-identity second pass") {
  SphereGrid grid(2, 8);
  const auto opts = fast_pipeline();
  TestRng rng(9);
  SpectralField u0 = random_field(rng, 2, 8, 0, 5);
  u0 *= 5e-3 / surrogate_norms(grid, u0).c2;
  RadialGraph g = RadialGraph::from_graph_function(grid, u0, 2.0);

  CenteredData cd = center_to_reference(grid, g, opts);
  CHECK(std::abs(cd.event.time - 1.0) < 5e-2);

  CenteredData again = center_to_reference(grid, cd.initial, opts);
  CHECK(std::abs(again.event.time - 1.0) < 1e-6);
  CHECK(again.event.point.norm() < 1e-6);
  CHECK(again.to_reference.norm() < 1e-6);
}

TEST_CASE("recenter_and_compare mode accounting") {
  SphereGrid grid(2, 8);
  auto opts = fast_pipeline();

  EvolveControls base_ctl;
  base_ctl.dt = 1e-3;
  base_ctl.horizon = 2.0;
  base_ctl.snapshot_every = 0.1;
  FlowTrajectory base = evolve_rescaled(grid, SpectralField::zero(2, 8), base_ctl);

  SUBCASE("pure dilation mode is absorbed entirely") {
    RadialGraph pert = RadialGraph::sphere(grid, 2.0 + 5e-3);
    RecenterReport rep = recenter_and_compare(grid, base, pert, 2.0, opts);
    CHECK(q_norm(rep.difference) < 1e-5);
  }

  SUBCASE("pure degree-2 perturbation keeps its fraction") {
    SpectralField y2 = SpectralField::harmonic(2, 8, 2, 1, 5e-3);
    RadialGraph pert = RadialGraph::from_graph_function(grid, y2, 2.0);
    RecenterReport rep = recenter_and_compare(grid, base, pert, 2.0, opts);
    CHECK(rep.frac_two >= 0.99);
  }

  SUBCASE("mixed perturbation keeps degree-2 dominance after centering") {
    SpectralField mix = SpectralField::harmonic(2, 8, 2, -1);
    mix *= 0.9 / q_norm(mix);
    SpectralField plus = SpectralField::harmonic(2, 8, 0, 0) + SpectralField::harmonic(2, 8, 1, 0);
    plus *= std::sqrt(1.0 - 0.81) / q_norm(plus);
    SpectralField u0 = 5e-3 * (mix + plus);  // pi_2 fraction 0.9
    RadialGraph pert = RadialGraph::from_graph_function(grid, u0, 2.0);
    RecenterReport rep = recenter_and_compare(grid, base, pert, 2.0, opts);
    CHECK(rep.frac_two >= 0.8);
  }
}
