// Real spherical-harmonic basis on the round sphere S^n(sqrt(2n)), Gauss-Legendre
// quadrature grid, dense forward/backward transforms with pointwise derivative
// synthesis, Q-norm geometry and the X+ / X2 / X- spectral splitting.
//
// Conventions used throughout the project:
//  * The basis Y_{k,m} is real and orthonormal in L^2(S^n(sqrt(2n))). For n = 2
//    the sphere has radius 2 and area 16*pi, so the constant function 1 has the
//    single coefficient c_{0,0} = sqrt(16*pi).
//  * Fields are functions of the unit direction; angular derivatives (theta, phi)
//    are taken on the unit sphere. Gradients on S^n(sqrt(2n)) carry an extra 1/R.
//  * L = Laplace(S^n(sqrt(2n))) + 1 acts diagonally with eigenvalue
//    lambda_k = 1 - k(k+n-1)/(2n).
//  * Q-inner product: <f,g>_Q = sum (mu_k + Lambda) c_k d_k with mu_k the
//    eigenvalue of -Laplace and Lambda = 2 (any value above lambda_0 = 1 works;
//    2 is the documented project-wide choice).
//  * The Gaussian weight of the ambient functional is constant on the sphere
//    (e^{-n/2}) and absorbed into the normalization.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace sphereflow {

inline constexpr double kQLambda = 2.0;

inline double sphere_radius(int n) { return std::sqrt(2.0 * n); }

// Eigenvalue of -Laplace on S^n(sqrt(2n)) for harmonic degree k.
inline double laplace_eigenvalue(int k, int n) {
  return static_cast<double>(k) * (k + n - 1) / (2.0 * n);
}

// Eigenvalue of L = Laplace + 1; strictly decreasing in k, lambda_2 = -1/n.
inline double eigenvalue(int k, int n) {
  if (k < 0 || n < 1) throw std::invalid_argument("eigenvalue: need k >= 0, n >= 1");
  return 1.0 - laplace_eigenvalue(k, n);
}

struct UnsupportedDimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flat coefficient index for degree k, order m in [-k, k].
inline int coeff_index(int k, int m) { return k * k + k + m; }
inline int coeff_count(int k_max) { return (k_max + 1) * (k_max + 1); }

// Normalized associated Legendre values and theta-derivatives at a single
// abscissa x = cos(theta). Row-normalization: int_{-1}^{1} P(k,m)^2 dx = 1/(2pi),
// no Condon-Shortley phase. Output arrays are indexed by (k,m), m <= k.
void legendre_column(int k_max, double x, std::vector<double>& p, std::vector<double>& dp_dtheta);
inline int legendre_index(int k, int m) { return k * (k + 1) / 2 + m; }

// Quadrature grid: Gauss-Legendre latitudes (exact through polynomial degree
// 2*n_lat - 1) and uniform longitudes. Sized so that pointwise products of two
// band-limited fields analyze alias-free into the retained band (3/2 rule).
class SphereGrid {
 public:
  SphereGrid(int n, int k_max);
  SphereGrid(int n, int k_max, int n_lat, int n_lon);

  int n() const { return n_; }
  int k_max() const { return k_max_; }
  int n_lat() const { return n_lat_; }
  int n_lon() const { return n_lon_; }
  int n_nodes() const { return n_lat_ * n_lon_; }
  int n_coeff() const { return coeff_count(k_max_); }
  double radius() const { return radius_; }

  double theta(int i) const { return theta_[i]; }
  double phi(int j) const { return phi_[j]; }
  int node(int i, int j) const { return i * n_lon_ + j; }

  // Unit direction of a node in R^3.
  Eigen::Vector3d direction(int i, int j) const;
  Eigen::Vector3d direction(int q) const { return direction(q / n_lon_, q % n_lon_); }

  // Quadrature weights for integration over the unit sphere / over S^2(R).
  const Eigen::VectorXd& unit_weights() const { return w_unit_; }
  const Eigen::VectorXd& area_weights() const { return w_area_; }

  // Synthesis operators (n_nodes x n_coeff): values and angular derivatives.
  const Eigen::MatrixXd& synth_value() const { return B_[0]; }
  const Eigen::MatrixXd& synth_dtheta() const { return B_[1]; }
  const Eigen::MatrixXd& synth_dphi() const { return B_[2]; }
  const Eigen::MatrixXd& synth_dtheta2() const { return B_[3]; }
  const Eigen::MatrixXd& synth_dthetaphi() const { return B_[4]; }
  const Eigen::MatrixXd& synth_dphi2() const { return B_[5]; }
  // All six stacked vertically; one GEMV serves a full geometry evaluation.
  const Eigen::MatrixXd& synth_stacked() const { return B_stacked_; }

  double sin_theta(int q) const { return sin_theta_[q / n_lon_]; }
  double cot_theta(int q) const { return cot_theta_[q / n_lon_]; }

  // Basis row at an arbitrary direction (off-grid synthesis support).
  void basis_row(const Eigen::Vector3d& dir, Eigen::VectorXd& row) const;

 private:
  void build();

  int n_, k_max_, n_lat_, n_lon_;
  double radius_;
  std::vector<double> theta_, phi_, sin_theta_, cot_theta_;
  Eigen::VectorXd gl_x_, gl_w_;
  Eigen::VectorXd w_unit_, w_area_;
  Eigen::MatrixXd B_[6];
  Eigen::MatrixXd B_stacked_;
};

// Band-limited function on S^n(sqrt(2n)) stored as real harmonic coefficients.
struct SpectralField {
  int n = 2;
  int k_max = 0;
  Eigen::VectorXd c;

  SpectralField() = default;
  SpectralField(int n_, int k_max_) : n(n_), k_max(k_max_), c(Eigen::VectorXd::Zero(coeff_count(k_max_))) {}

  static SpectralField zero(int n, int k_max) { return SpectralField(n, k_max); }
  static SpectralField constant(int n, int k_max, double value);
  // Unit-L^2(S^n(sqrt(2n))) basis harmonic.
  static SpectralField harmonic(int n, int k_max, int k, int m, double amplitude = 1.0);

  double operator()(int k, int m) const { return c[coeff_index(k, m)]; }
  double& at(int k, int m) { return c[coeff_index(k, m)]; }

  double l2_norm() const { return c.norm(); }  // = L^2(S^n(sqrt(2n))) norm
  double degree_norm(int k) const { return c.segment(k * k, 2 * k + 1).norm(); }
  int dominant_degree() const;

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s) { c *= s; return *this; }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField f) { return f *= s; }
};

void require_compatible(const SpectralField& a, const SpectralField& b);

// Forward/backward transform. `values` is the flat node vector of the grid.
SpectralField analyze(const SphereGrid& grid, const Eigen::VectorXd& values);
Eigen::VectorXd synthesize(const SphereGrid& grid, const SpectralField& f);

// Value of a field at an arbitrary unit direction.
double evaluate(const SphereGrid& grid, const SpectralField& f, const Eigen::Vector3d& dir);

// Q-geometry. Coefficient-diagonal; mu_k + Lambda weights.
double q_inner(const SpectralField& f, const SpectralField& g);
double q_norm(const SpectralField& f);
// H^1 norm computed by quadrature (independent route used by the norm-equivalence tests).
double h1_norm_quadrature(const SphereGrid& grid, const SpectralField& f);

// Degree-truncation projections: plus = degrees {0,1}, two = degree 2, minus = degrees >= 3.
SpectralField project_plus(const SpectralField& f);
SpectralField project_two(const SpectralField& f);
SpectralField project_minus(const SpectralField& f);

struct ModeSplit {
  SpectralField plus, two, minus;
  double q_plus = 0, q_two = 0, q_minus = 0;
};
ModeSplit mode_split(const SpectralField& f);

// Diagonal heat flow of L: multiplies each degree-k coefficient by e^{t*lambda_k}.
// Negative t is the bounded inverse on band-limited fields.
SpectralField heat_semigroup(const SpectralField& f, double t);

// Exact rotation of a band-limited field: f -> f o R^{-1}.
SpectralField rotate_field(const SphereGrid& grid, const SpectralField& f, const Eigen::Matrix3d& R);

// Group-average projection onto fields invariant under a finite rotation group.
// The tetrahedral rotation group (order 12) has no invariant harmonics of
// degree 1 or 2, which makes it the canonical symmetry lock for fast flows.
class SymmetryProjector {
 public:
  static SymmetryProjector tetrahedral(const SphereGrid& grid);
  void apply(SpectralField& f) const { f.c = P_ * f.c; }
  const Eigen::MatrixXd& matrix() const { return P_; }

 private:
  explicit SymmetryProjector(Eigen::MatrixXd P) : P_(std::move(P)) {}
  Eigen::MatrixXd P_;
};

}  // namespace sphereflow
