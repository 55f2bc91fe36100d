// Differential geometry of star-shaped radial graphs r(omega) over sphere
// directions: mean curvature and rescaled-flow speed, the exact similarity
// action with its first-order expansion, and transplantation between graphs.
//
// All angular derivatives are taken on the unit sphere; with rho = log r and
// W = sqrt(1 + |grad rho|^2) the scalar mean curvature w.r.t. the outward
// normal is
//     H = ( n - Lap(rho) + Hess(rho)(grad rho, grad rho)/W^2 ) / (r W),
// so H = n/r on round profiles and <x, nu> = r/W. Convex graphs have H > 0.
#pragma once

#include "sphereflow/harmonics.hpp"

#include <optional>

namespace sphereflow {

struct GraphInvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RadialGraph {
  SpectralField profile;  // r(omega) > 0 over unit directions
  int n = 2;

  RadialGraph() = default;
  RadialGraph(SpectralField p, int n_) : profile(std::move(p)), n(n_) {}
  static RadialGraph sphere(const SphereGrid& grid, double radius);
  // Shrinker-centred graph: r = sqrt(2n) + u.
  static RadialGraph from_graph_function(const SphereGrid& grid, const SpectralField& u,
                                         double base_radius);
};

// u = r - base_radius as a spectral field.
SpectralField graph_function(const RadialGraph& g, double base_radius);

// Throws GraphInvariantError if r <= min_radius at a node or |grad r|/r >= slope_limit.
void validate_graph(const SphereGrid& grid, const RadialGraph& g, double slope_limit = 10.0,
                    double min_radius = 0.0);

// Pointwise surface data at the quadrature nodes.
struct NodeGeometry {
  Eigen::VectorXd r;       // profile values
  Eigen::VectorXd W;       // sqrt(1+|grad rho|^2)
  Eigen::VectorXd H;       // scalar mean curvature (outward normal)
  Eigen::VectorXd phi;     // rescaled speed H - r/(2W) = H - <x,nu>/2
  Eigen::VectorXd g_t, g_p;                 // unit-sphere frame gradient of rho
  Eigen::VectorXd Hrho_tt, Hrho_tp, Hrho_pp;  // frame Hessian of rho
  double max_slope = 0.0;  // max |grad rho|
  double min_r = 0.0;
};
NodeGeometry node_geometry(const SphereGrid& grid, const Eigen::VectorXd& profile_coeffs);

// |A|^2 at the nodes (squared norm of the second fundamental form).
Eigen::VectorXd second_form_squared(const NodeGeometry& ng);

// Mean curvature as a band-limited field (values analyzed on the oversized grid).
SpectralField mean_curvature(const SphereGrid& grid, const RadialGraph& g);
// phi = H - <x,nu>/2; the radial solver speed is dr/dt = -W*phi (RMCF).
SpectralField rescaled_speed(const SphereGrid& grid, const RadialGraph& g);

// Dilation by alpha about the origin followed by translation beta*U.
struct SimilarityAction {
  double alpha = 1.0;
  double beta = 0.0;
  Eigen::Vector3d U = Eigen::Vector3d::UnitZ();

  static SimilarityAction identity() { return {}; }
  static SimilarityAction dilation(double a) { return {a, 0.0, Eigen::Vector3d::UnitZ()}; }
  static SimilarityAction translation(const Eigen::Vector3d& v);
  SimilarityAction inverse() const;
  double norm() const { return std::abs(alpha - 1.0) + beta; }
};

// Exact pointwise action re-expressed as a radial graph (per-node ray re-solution,
// tolerance 1e-12). Pure dilations stay exact on coefficients; the identity is bitwise.
RadialGraph apply_similarity(const SphereGrid& grid, const RadialGraph& g,
                             const SimilarityAction& s);

// First-order (in alpha-1 and beta) prediction of the transformed graph function
// for graphs r = 1 + u over the unit sphere:
//   w = u + (1+u)(alpha-1) + (<U,x> - <grad u, U>/(1+u)) beta.
SpectralField similarity_first_order(const SphereGrid& grid, const SpectralField& u,
                                     const SimilarityAction& s);

// Graph function over the base sphere of the surface obtained by stacking the
// normal graph of g on top of the graph of f (both small).  transplant(f,0) = f
// and transplant(0,g) = g exactly.
SpectralField transplant(const SphereGrid& grid, const SpectralField& f, const SpectralField& g,
                         double smallness = 0.05);

// Discrete surrogate for C^j norms: max over nodes of |u|, frame gradient and
// frame Hessian entries (no Hoelder seminorm; documented project convention).
struct SurrogateNorms {
  double c0 = 0, c1 = 0, c2 = 0;
};
SurrogateNorms surrogate_norms(const SphereGrid& grid, const SpectralField& u);

// Solve |t*dir - offset| = alpha * r(direction of t*dir - offset) for t; the
// shared ray re-solution primitive behind apply_similarity and re-centering.
std::optional<double> resolve_ray(const SphereGrid& grid, const SpectralField& profile,
                                  double alpha, const Eigen::Vector3d& offset,
                                  const Eigen::Vector3d& dir, double guess);

}  // namespace sphereflow
