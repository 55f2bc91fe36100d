#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphereflow/geometry.hpp"
#include "oracles/mesh_curvature.hpp"
#include "test_rng.hpp"

#include <cmath>

using namespace sphereflow;

namespace {

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double ellipsoid_radius(const Eigen::Vector3d& d, double a, double b, double c) {
  return 1.0 / std::sqrt(d.x() * d.x() / (a * a) + d.y() * d.y() / (b * b) +
                         d.z() * d.z() / (c * c));
}

// Sum of principal curvatures of the implicit ellipsoid, div(grad F/|grad F|).
double ellipsoid_curvature(const Eigen::Vector3d& p, double a, double b, double c) {
  const Eigen::Vector3d D(1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c));
  const Eigen::Vector3d g = 2.0 * D.cwiseProduct(p);
  const double lap = 2.0 * (D.x() + D.y() + D.z());
  const double quad = 2.0 * g.dot(D.cwiseProduct(g));
  return (lap * g.squaredNorm() - quad) / std::pow(g.norm(), 3);
}

}  // namespace

TEST_CASE("round spheres: H = n/r and zero rescaled speed on the shrinker") {
  SphereGrid grid(2, 8);
  RadialGraph g = RadialGraph::sphere(grid, 2.0);
  SpectralField H = mean_curvature(grid, g);
  SpectralField one = SpectralField::constant(2, 8, 1.0);
  CHECK((H.c - one.c).norm() < 1e-12);

  // r = sqrt(2n) is the shrinker: H - <x,nu>/2 = 0 identically.
  SpectralField phi = rescaled_speed(grid, g);
  CHECK(phi.c.norm() < 1e-12);

  RadialGraph g3 = RadialGraph::sphere(grid, 3.0);
  SpectralField H3 = mean_curvature(grid, g3);
  CHECK(H3.c[0] / std::sqrt(16.0 * std::numbers::pi) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // Round profile c = 1: phi = n/c - c/2 = 1.5.
  RadialGraph g1 = RadialGraph::sphere(grid, 1.0);
  SpectralField phi1 = rescaled_speed(grid, g1);
  CHECK(phi1.c[0] / std::sqrt(16.0 * std::numbers::pi) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("ellipsoid mean curvature vs cotangent mesh oracle and implicit formula") {
  const double a = 2.2, b = 2.0, c = 1.9;
  SphereGrid grid(2, 16);

  Eigen::VectorXd values(grid.n_nodes());
  for (int q = 0; q < grid.n_nodes(); ++q)
    values[q] = ellipsoid_radius(grid.direction(q), a, b, c);
  RadialGraph ell(analyze(grid, values), 2);

  SpectralField H = mean_curvature(grid, ell);

  // Mesh oracle at the 1e5-face refinement (level 6, Richardson against level 7).
  const auto oracle = mesh_oracle::richardson_curvature(
      6, [&](const Eigen::Vector3d& d) { return ellipsoid_radius(d, a, b, c); });

  double sup_mesh = 0.0, sup_exact = 0.0;
  for (size_t i = 0; i < oracle.coarse.v.size(); ++i) {
    const Eigen::Vector3d dir = oracle.coarse.v[i].normalized();
    const double r = ellipsoid_radius(dir, a, b, c);
    const double h_spec = evaluate(grid, H, dir);
    sup_mesh = std::max(sup_mesh, std::abs(h_spec - oracle.H[i]));
    sup_exact = std::max(sup_exact, std::abs(h_spec - ellipsoid_curvature(r * dir, a, b, c)));
  }
  CHECK(sup_mesh < 1e-3);
  CHECK(sup_exact < 1e-6);
}

TEST_CASE("rescaled speed linearizes to Lu: quadratic residual ladder") {
  SphereGrid grid(2, 10);
  const double R = 2.0;
  SpectralField y2 = SpectralField::harmonic(2, 10, 2, 1);

  std::vector<double> eps = {1e-2, 1e-3, 1e-4};
  std::vector<double> resid;
  for (double e : eps) {
    RadialGraph g = RadialGraph::from_graph_function(grid, e * y2, R);
    const NodeGeometry ng = node_geometry(grid, g.profile.c);
    // dr/dt = -W phi; subtract L u and measure what is left.
    SpectralField vel = analyze(grid, (-ng.W.cwiseProduct(ng.phi)).eval());
    SpectralField lu = heat_semigroup(e * y2, 0.0);
    for (int k = 0; k <= 10; ++k)
      lu.c.segment(k * k, 2 * k + 1) *= eigenvalue(k, 2);
    resid.push_back(q_norm(vel - lu));
  }
  const double slope = loglog_slope(eps, resid);
  CHECK(slope > 1.9);
  CHECK(slope < 2.2);
}

TEST_CASE("similarity action: closed forms and group structure") {
  SphereGrid grid(2, 12);
  RadialGraph g = RadialGraph::sphere(grid, 2.0);

  SUBCASE("identity is bitwise") {
    RadialGraph h = apply_similarity(grid, g, SimilarityAction::identity());
    CHECK(h.profile.c == g.profile.c);
  }

  SUBCASE("pure dilation is exact") {
    RadialGraph h = apply_similarity(grid, g, SimilarityAction::dilation(1.3));
    RadialGraph want = RadialGraph::sphere(grid, 2.6);
    CHECK((h.profile.c - want.profile.c).norm() < 1e-12);
  }

  SUBCASE("translated sphere closed form") {
    const double beta = 0.4, c = 2.0;
    const Eigen::Vector3d U = Eigen::Vector3d(1, 2, -1).normalized();
    SimilarityAction s{1.0, beta, U};
    RadialGraph h = apply_similarity(grid, g, s);
    const Eigen::VectorXd got = synthesize(grid, h.profile);
    for (int q = 0; q < grid.n_nodes(); ++q) {
      const double cu = U.dot(grid.direction(q));
      const double want = beta * cu + std::sqrt(c * c - beta * beta + beta * beta * cu * cu);
      CHECK(std::abs(got[q] - want) < 1e-10);
    }
  }

  SUBCASE("inverse composition returns the graph") {
    TestRng rng(21);
    SpectralField u = 0.02 * random_field(rng, 2, 12, 0, 6);
    RadialGraph gp = RadialGraph::from_graph_function(grid, u, 2.0);
    SimilarityAction s{1.05, 0.05, Eigen::Vector3d::UnitX()};
    RadialGraph fwd = apply_similarity(grid, gp, s);
    RadialGraph back = apply_similarity(grid, fwd, s.inverse());
    CHECK((back.profile.c - gp.profile.c).norm() < 1e-8);
  }

  SUBCASE("large translation loses star-shapedness") {
    SimilarityAction s{1.0, 2.5, Eigen::Vector3d::UnitZ()};
    CHECK_THROWS_AS(apply_similarity(grid, g, s), GraphInvariantError);
  }
}

TEST_CASE("first-order similarity expansion") {
  SphereGrid grid(2, 10);
  SpectralField zero = SpectralField::zero(2, 10);

  SUBCASE("identity fixes u") {
    SpectralField w = similarity_first_order(grid, zero, SimilarityAction::identity());
    CHECK(w.c.norm() < 1e-13);
  }

  SUBCASE("u = 0: w = a + b <U,x>") {
    const double aa = 0.01, bb = 0.02;
    const Eigen::Vector3d U = Eigen::Vector3d(0, 1, 1).normalized();
    SpectralField w = similarity_first_order(grid, zero, {1.0 + aa, bb, U});
    const Eigen::VectorXd wv = synthesize(grid, w);
    for (int q = 0; q < grid.n_nodes(); ++q)
      CHECK(wv[q] == doctest::Approx(aa + bb * U.dot(grid.direction(q))).epsilon(1e-10));
  }

  SUBCASE("remainder against the exact action is quadratic") {
    TestRng rng(4);
    SpectralField u = random_field(rng, 2, 10, 0, 5);
    u *= 0.01 / surrogate_norms(grid, u).c1;
    const Eigen::Vector3d U = Eigen::Vector3d(1, -1, 2).normalized();

    std::vector<double> eps = {1e-2, 1e-3, 1e-4};
    std::vector<double> rem;
    for (double e : eps) {
      SimilarityAction s{1.0 + 0.7 * e, 0.7 * e, U};
      // Exact action on the unit-sphere graph r = 1 + u.
      RadialGraph g = RadialGraph::from_graph_function(grid, u, 1.0);
      SpectralField w_exact = graph_function(apply_similarity(grid, g, s), 1.0);
      SpectralField w_lin = similarity_first_order(grid, u, s);
      rem.push_back(q_norm(w_exact - w_lin));
    }
    CHECK(loglog_slope(eps, rem) >= 1.9);
  }
}

TEST_CASE("transplant identities and contraction") {
  SphereGrid grid(2, 10);
  TestRng rng(17);

  SpectralField f = random_field(rng, 2, 10, 0, 5);
  f *= 0.015 / surrogate_norms(grid, f).c2;
  SpectralField g = random_field(rng, 2, 10, 0, 5);
  g *= 0.015 / surrogate_norms(grid, g).c2;
  SpectralField zero = SpectralField::zero(2, 10);

  SpectralField v1 = transplant(grid, f, zero);
  CHECK((v1.c - f.c).norm() < 1e-11);

  SpectralField v2 = transplant(grid, zero, g);
  CHECK((v2.c - g.c).norm() < 1e-11);

  SpectralField v = transplant(grid, f, g);
  const double ratio = q_norm(v - (f + g)) / q_norm(g);
  CHECK(ratio < 0.5);

  CHECK_THROWS_AS(transplant(grid, SpectralField::constant(2, 10, 0.4), g),
                  std::invalid_argument);
}

TEST_CASE("rotation equivariance and dilation law of mean curvature") {
  SphereGrid grid(2, 10);
  TestRng rng(8);
  SpectralField u = 0.05 * random_field(rng, 2, 10, 0, 5);
  RadialGraph g = RadialGraph::from_graph_function(grid, u, 2.0);

  const Eigen::Matrix3d R = random_rotation(rng);
  RadialGraph gr(rotate_field(grid, g.profile, R), 2);
  SpectralField h_of_rot = mean_curvature(grid, gr);
  SpectralField rot_of_h = rotate_field(grid, mean_curvature(grid, g), R);
  CHECK((h_of_rot.c - rot_of_h.c).norm() < 1e-8);

  RadialGraph g2(g.profile, 2);
  g2.profile.c *= 1.7;
  SpectralField h_scaled = mean_curvature(grid, g2);
  SpectralField h_base = mean_curvature(grid, g);
  CHECK((h_scaled.c - h_base.c / 1.7).norm() < 1e-10);
}

TEST_CASE("graph invariant violations are reported") {
  SphereGrid grid(2, 8);
  SpectralField bad = SpectralField::constant(2, 8, 0.3) + SpectralField::harmonic(2, 8, 2, 0, 2.0);
  RadialGraph g(bad, 2);
  CHECK_THROWS_AS(validate_graph(grid, g), GraphInvariantError);
  CHECK_THROWS_AS(mean_curvature(grid, g), GraphInvariantError);
}
