#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphereflow/arrival.hpp"
#include "test_rng.hpp"

#include <cmath>

using namespace sphereflow;

namespace {

// Closed arrival forms used across the probes.
double round_arrival(const Eigen::Vector3d& x) { return 1.0 - x.squaredNorm() / 4.0; }
double slow_arrival(const Eigen::Vector3d& x) {
  // k = 2, n = 2: exponent k(k-1)/n = 1, so the correction is |x| (x1^2 - x2^2).
  return 1.0 - x.squaredNorm() / 4.0 + x.norm() * (x.x() * x.x() - x.y() * x.y());
}
double fast_arrival(const Eigen::Vector3d& x) {
  // k = 3 term |x|^3 P3: remainder degree 6, C3 at the origin.
  const double p3 = x.x() * x.y() * x.z();
  return 1.0 - x.squaredNorm() / 4.0 + std::pow(x.norm(), 3) * p3;
}

FlowTrajectory static_round_traj(double horizon, double cadence, int k_max) {
  FlowTrajectory traj;
  traj.clock = FlowClock::Rescaled;
  traj.n = 2;
  traj.k_max = k_max;
  traj.dt = cadence;
  traj.snapshot_every = cadence;
  for (double t = 0; t <= horizon + 1e-12; t += cadence) {
    Snapshot s;
    s.time = t;
    s.profile = SpectralField::constant(2, k_max, 2.0);
    traj.snapshots.push_back(std::move(s));
  }
  return traj;
}

}  // namespace

TEST_CASE("sampler reproduces the round closed form") {
  SphereGrid grid(2, 8);
  ExtinctionEvent ev;
  ev.time = 1.0;
  ArrivalSampler sampler(grid, static_round_traj(12.0, 0.05, 8), ev);

  TestRng rng(3);
  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector3d dir = random_unit_vector(rng);
    const double s = 0.01 + 1.98 * rng.uniform();
    const double got = sampler(s * dir);
    CHECK(got == doctest::Approx(1.0 - s * s / 4.0).epsilon(1e-10));
  }
  // The initial sphere of radius 2 is swept at time 0.
  CHECK(sampler(Eigen::Vector3d(2.0, 0, 0)) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(sampler(Eigen::Vector3d::Zero()) == doctest::Approx(1.0));

  CHECK_THROWS_AS(sampler(Eigen::Vector3d(2.5, 0, 0)), std::out_of_range);
  CHECK_THROWS_AS(sampler(Eigen::Vector3d(1e-8, 0, 0)), std::out_of_range);
  CHECK(sampler.self_consistency_error() < 1e-10);
}

TEST_CASE("sampler is self-consistent along a perturbed convex flow") {
  SphereGrid grid(2, 8);
  SpectralField u0 = SpectralField::harmonic(2, 8, 2, 1, 3e-2);
  EvolveControls ctl;
  ctl.dt = 1e-3;
  ctl.horizon = 6.0;
  ctl.snapshot_every = 0.02;
  FlowTrajectory traj = evolve_rescaled(grid, u0, ctl);

  ExtinctionEvent ev;
  ev.time = 1.0;  // consistency checks below are invariant to the clock origin
  ArrivalSampler sampler(grid, traj, ev);

  TestRng rng(11);
  for (int i = 0; i < 10; ++i) CHECK(sampler.ray_monotone(random_unit_vector(rng)));
  CHECK(sampler.self_consistency_error() < 1e-6);

  ArrivalSamples samples = sampler.sample({Eigen::Vector3d(0.3, 0.1, 0.05),
                                           Eigen::Vector3d(-0.2, 0.4, 0.1)});
  for (double t : samples.times) CHECK(t < 1.0);
}

TEST_CASE("expansion fit recovers constructed terms") {
  SphereGrid grid(2, 8);

  SUBCASE("slow form: degree 2 with unit coefficients") {
    ExpansionFit fit = fit_arrival_expansion(grid, slow_arrival, 1.0, 2);
    REQUIRE(fit.detected);
    CHECK(fit.k == 2);
    // P2(omega) = omega_1^2 - omega_2^2 analyzed into the degree-2 band.
    Eigen::VectorXd values(grid.n_nodes());
    for (int q = 0; q < grid.n_nodes(); ++q) {
      const Eigen::Vector3d d = grid.direction(q);
      values[q] = d.x() * d.x() - d.y() * d.y();
    }
    SpectralField want = project_two(analyze(grid, values));
    CHECK((fit.pk.c - want.c).norm() < 1e-8);
  }

  SUBCASE("round form: nothing detected") {
    ExpansionFit fit = fit_arrival_expansion(grid, round_arrival, 1.0, 2);
    CHECK(!fit.detected);
  }

  SUBCASE("degree-3 form") {
    ExpansionFit fit = fit_arrival_expansion(grid, fast_arrival, 1.0, 2);
    REQUIRE(fit.detected);
    CHECK(fit.k == 3);
  }

  SUBCASE("round trip through a synthetic generator") {
    // Arbitrary degree-2 profile: generator -> fit -> coefficients.
    SpectralField p2 = SpectralField::harmonic(2, 8, 2, -2, 0.7) +
                       SpectralField::harmonic(2, 8, 2, 1, -0.3);
    SphereGrid g2(2, 8);
    const auto t_syn = [&](const Eigen::Vector3d& x) {
      const double s = x.norm();
      if (s == 0.0) return 1.0;
      return 1.0 - s * s / 4.0 + s * s * s * evaluate(g2, p2, x / s);
    };
    ExpansionFit fit = fit_arrival_expansion(grid, t_syn, 1.0, 2);
    REQUIRE(fit.detected);
    CHECK(fit.k == 2);
    CHECK((fit.pk.c - p2.c).norm() < 1e-8);
  }
}

TEST_CASE("hessian probe sees the universal -Id/n limit") {
  HessianProbe round = hessian_probe(round_arrival, 2);
  CHECK(round.consistent);
  CHECK(round.deviation_from_limit < 1e-9);

  // The correction term perturbs the Hessian estimate by 2s|P2|; at physical
  // amplitudes (|P2| ~ 5e-2) the 0.01 tolerance at s = 0.05 holds.
  const auto slow_small = [](const Eigen::Vector3d& x) {
    return 1.0 - x.squaredNorm() / 4.0 + 0.05 * x.norm() * (x.x() * x.x() - x.y() * x.y());
  };
  HessianProbe slow = hessian_probe(slow_small, 2);
  CHECK(slow.consistent);
  for (size_t i = 0; i < slow.radii.size(); ++i) {
    if (slow.radii[i] == doctest::Approx(0.05)) {
      const Eigen::Matrix3d dev = slow.hessians[i] + Eigen::Matrix3d::Identity() / 2.0;
      CHECK(dev.cwiseAbs().maxCoeff() < 0.01);
    }
  }
}

TEST_CASE("third-difference probe separates the closed forms") {
  SUBCASE("round: C3-consistent, quotients vanish") {
    ThirdProbe p = third_difference_probe(round_arrival);
    CHECK(p.verdict == ThirdProbe::Verdict::C3Consistent);
  }

  SUBCASE("slow: direction-dependent bounded limits") {
    ThirdProbe p = third_difference_probe(slow_arrival);
    CHECK(p.verdict == ThirdProbe::Verdict::NotC3);
    // Along x1 the cubic term gives f''' -> 6; along the (1,1,0) diagonal it
    // vanishes, so the oscillation settles well above the 0.5 detection floor.
    CHECK(p.oscillation.back() > 0.5);
    CHECK(p.oscillation.back() < 20.0);
  }

  SUBCASE("degree-3 correction: all third derivatives vanish at 0") {
    ThirdProbe p = third_difference_probe(fast_arrival);
    CHECK(p.verdict == ThirdProbe::Verdict::C3Consistent);
  }

  SUBCASE("fractional-exponent correction diverges") {
    const auto t = [](const Eigen::Vector3d& x) {
      const double s = x.norm();
      const double p2 = s == 0 ? 0.0 : (x.x() * x.x() - x.y() * x.y()) / (s * s);
      return 1.0 - s * s / 4.0 + std::pow(s, 8.0 / 3.0) * p2;
    };
    ThirdProbe p = third_difference_probe(t);
    CHECK(p.verdict == ThirdProbe::Verdict::NotC3);
    CHECK(p.oscillation.back() > p.oscillation.front());
  }

  SUBCASE("noise floors force inconclusive, never a verdict") {
    // Tiny signal below the declared floor: the probe must not claim NotC3.
    const auto t = [](const Eigen::Vector3d& x) {
      return 1.0 - x.squaredNorm() / 4.0 + 1e-12 * x.norm() * x.x() * x.x();
    };
    RegularityProbeOptions opts;
    opts.time_noise = 1e-9;
    ThirdProbe p = third_difference_probe(t, opts);
    CHECK(p.verdict != ThirdProbe::Verdict::NotC3);
  }
}
