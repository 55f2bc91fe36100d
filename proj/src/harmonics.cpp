#include "sphereflow/harmonics.hpp"

#include <algorithm>
#include <numbers>

namespace sphereflow {

namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-like initial guess.
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace

void legendre_column(int k_max, double x, std::vector<double>& p, std::vector<double>& dp_dtheta) {
  const int sz = legendre_index(k_max, k_max) + 1;
  p.assign(sz, 0.0);
  dp_dtheta.assign(sz, 0.0);
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));  // sin(theta)

  // Diagonal P(m,m), then P(m+1,m), then upward three-term recurrence.
  p[legendre_index(0, 0)] = std::sqrt(1.0 / (4.0 * kPi));
  for (int m = 1; m <= k_max; ++m) {
    p[legendre_index(m, m)] =
        std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p[legendre_index(m - 1, m - 1)];
  }
  for (int m = 0; m < k_max; ++m) {
    p[legendre_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * p[legendre_index(m, m)];
    for (int k = m + 2; k <= k_max; ++k) {
      const double a = std::sqrt((4.0 * k * k - 1.0) / (static_cast<double>(k) * k - m * m));
      const double b = std::sqrt((2.0 * k + 1.0) / (2.0 * k - 3.0) *
                                 ((k - 1.0) * (k - 1.0) - m * m) /
                                 (static_cast<double>(k) * k - m * m));
      p[legendre_index(k, m)] =
          a * x * p[legendre_index(k - 1, m)] - b * p[legendre_index(k - 2, m)];
    }
  }

  // d/dtheta via sin(theta) * P' = k x P(k,m) - sqrt((k^2-m^2)(2k+1)/(2k-1)) P(k-1,m).
  // Gauss-Legendre abscissae exclude the poles, so dividing by sin(theta) is safe.
  for (int k = 0; k <= k_max; ++k) {
    for (int m = 0; m <= k; ++m) {
      double t = k * x * p[legendre_index(k, m)];
      if (k > m) {
        t -= std::sqrt((static_cast<double>(k) * k - m * m) * (2.0 * k + 1.0) / (2.0 * k - 1.0)) *
             p[legendre_index(k - 1, m)];
      }
      dp_dtheta[legendre_index(k, m)] = t / s;
    }
  }
}

SphereGrid::SphereGrid(int n, int k_max)
    : SphereGrid(n, k_max, (3 * k_max) / 2 + 2, 2 * ((3 * k_max) / 2 + 2) - 1) {}

SphereGrid::SphereGrid(int n, int k_max, int n_lat, int n_lon)
    : n_(n), k_max_(k_max), n_lat_(n_lat), n_lon_(n_lon), radius_(sphere_radius(n)) {
  if (n_ != 2)
    throw UnsupportedDimension("SphereGrid: transforms are implemented for n = 2 only");
  if (k_max_ < 0) throw std::invalid_argument("SphereGrid: k_max must be >= 0");
  if (n_lat_ < k_max_ + 1 || n_lon_ < 2 * k_max_ + 1)
    throw std::invalid_argument("SphereGrid: grid too small for the band limit");
  build();
}

void SphereGrid::build() {
  gauss_legendre(n_lat_, gl_x_, gl_w_);
  theta_.resize(n_lat_);
  sin_theta_.resize(n_lat_);
  cot_theta_.resize(n_lat_);
  for (int i = 0; i < n_lat_; ++i) {
    theta_[i] = std::acos(gl_x_[i]);
    sin_theta_[i] = std::sin(theta_[i]);
    cot_theta_[i] = gl_x_[i] / sin_theta_[i];
  }
  phi_.resize(n_lon_);
  for (int j = 0; j < n_lon_; ++j) phi_[j] = 2.0 * kPi * j / n_lon_;

  const int nq = n_nodes();
  w_unit_.resize(nq);
  for (int i = 0; i < n_lat_; ++i)
    for (int j = 0; j < n_lon_; ++j) w_unit_[node(i, j)] = gl_w_[i] * (2.0 * kPi / n_lon_);
  w_area_ = w_unit_ * (radius_ * radius_);

  const int nc = n_coeff();
  for (auto& B : B_) B.resize(nq, nc);

  std::vector<double> p, dp;
  for (int i = 0; i < n_lat_; ++i) {
    legendre_column(k_max_, gl_x_[i], p, dp);
    const double st = sin_theta_[i];
    const double ct = gl_x_[i];
    for (int k = 0; k <= k_max_; ++k) {
      for (int m = -k; m <= k; ++m) {
        const int am = std::abs(m);
        const double P = p[legendre_index(k, am)];
        const double dP = dp[legendre_index(k, am)];
        // Associated Legendre ODE gives the second theta-derivative from (P, P').
        const double d2P = -ct / st * dP + (am * am / (st * st) - k * (k + 1.0)) * P;
        for (int j = 0; j < n_lon_; ++j) {
          double tr, dtr;  // trig factor and its phi-derivative
          if (m > 0) {
            tr = std::numbers::sqrt2 * std::cos(m * phi_[j]);
            dtr = -m * std::numbers::sqrt2 * std::sin(m * phi_[j]);
          } else if (m == 0) {
            tr = 1.0;
            dtr = 0.0;
          } else {
            tr = std::numbers::sqrt2 * std::sin(am * phi_[j]);
            dtr = am * std::numbers::sqrt2 * std::cos(am * phi_[j]);
          }
          const int q = node(i, j);
          const int idx = coeff_index(k, m);
          const double inv_r = 1.0 / radius_;
          B_[0](q, idx) = inv_r * P * tr;
          B_[1](q, idx) = inv_r * dP * tr;
          B_[2](q, idx) = inv_r * P * dtr;
          B_[3](q, idx) = inv_r * d2P * tr;
          B_[4](q, idx) = inv_r * dP * dtr;
          B_[5](q, idx) = inv_r * P * (-static_cast<double>(am) * am) * tr;
        }
      }
    }
  }
  B_stacked_.resize(6 * nq, nc);
  for (int d = 0; d < 6; ++d) B_stacked_.middleRows(d * nq, nq) = B_[d];
}

Eigen::Vector3d SphereGrid::direction(int i, int j) const {
  const double st = sin_theta_[i];
  return {st * std::cos(phi_[j]), st * std::sin(phi_[j]), gl_x_[i]};
}

void SphereGrid::basis_row(const Eigen::Vector3d& dir, Eigen::VectorXd& row) const {
  row.resize(n_coeff());
  const double x = std::clamp(dir.z() / dir.norm(), -1.0, 1.0);
  const double ph = std::atan2(dir.y(), dir.x());
  std::vector<double> p, dp;
  legendre_column(k_max_, x, p, dp);
  const double inv_r = 1.0 / radius_;
  for (int k = 0; k <= k_max_; ++k) {
    for (int m = -k; m <= k; ++m) {
      const int am = std::abs(m);
      double tr;
      if (m > 0)
        tr = std::numbers::sqrt2 * std::cos(m * ph);
      else if (m == 0)
        tr = 1.0;
      else
        tr = std::numbers::sqrt2 * std::sin(am * ph);
      row[coeff_index(k, m)] = inv_r * p[legendre_index(k, am)] * tr;
    }
  }
}

SpectralField SpectralField::constant(int n, int k_max, double value) {
  if (n != 2) throw UnsupportedDimension("SpectralField::constant: n = 2 only");
  SpectralField f(n, k_max);
  // Y_00 = 1/sqrt(Area), so the constant v has coefficient v*sqrt(Area).
  const double area = 4.0 * kPi * sphere_radius(n) * sphere_radius(n);
  f.c[0] = value * std::sqrt(area);
  return f;
}

SpectralField SpectralField::harmonic(int n, int k_max, int k, int m, double amplitude) {
  if (k > k_max || std::abs(m) > k) throw std::invalid_argument("harmonic: (k,m) out of band");
  SpectralField f(n, k_max);
  f.c[coeff_index(k, m)] = amplitude;
  return f;
}

int SpectralField::dominant_degree() const {
  int best = 0;
  double best_e = -1.0;
  for (int k = 0; k <= k_max; ++k) {
    const double e = degree_norm(k);
    if (e > best_e) {
      best_e = e;
      best = k;
    }
  }
  return best;
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  require_compatible(*this, o);
  c += o.c;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  require_compatible(*this, o);
  c -= o.c;
  return *this;
}

void require_compatible(const SpectralField& a, const SpectralField& b) {
  if (a.n != b.n || a.k_max != b.k_max)
    throw std::invalid_argument("SpectralField: band limit or dimension mismatch");
}

SpectralField analyze(const SphereGrid& grid, const Eigen::VectorXd& values) {
  if (values.size() != grid.n_nodes())
    throw std::invalid_argument("analyze: value vector does not match the grid");
  SpectralField f(grid.n(), grid.k_max());
  f.c = grid.synth_value().transpose() * grid.area_weights().cwiseProduct(values);
  return f;
}

Eigen::VectorXd synthesize(const SphereGrid& grid, const SpectralField& f) {
  if (f.n != grid.n() || f.k_max != grid.k_max())
    throw std::invalid_argument("synthesize: field does not match the grid");
  return grid.synth_value() * f.c;
}

double evaluate(const SphereGrid& grid, const SpectralField& f, const Eigen::Vector3d& dir) {
  Eigen::VectorXd row;
  grid.basis_row(dir, row);
  return row.dot(f.c);
}

double q_inner(const SpectralField& f, const SpectralField& g) {
  require_compatible(f, g);
  double s = 0.0;
  for (int k = 0; k <= f.k_max; ++k) {
    const double w = laplace_eigenvalue(k, f.n) + kQLambda;
    s += w * f.c.segment(k * k, 2 * k + 1).dot(g.c.segment(k * k, 2 * k + 1));
  }
  return s;
}

double q_norm(const SpectralField& f) { return std::sqrt(std::max(0.0, q_inner(f, f))); }

double h1_norm_quadrature(const SphereGrid& grid, const SpectralField& f) {
  const Eigen::VectorXd v = grid.synth_value() * f.c;
  const Eigen::VectorXd vt = grid.synth_dtheta() * f.c;
  const Eigen::VectorXd vp = grid.synth_dphi() * f.c;
  double s = 0.0;
  const double inv_r2 = 1.0 / (grid.radius() * grid.radius());
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const double gp = vp[q] / grid.sin_theta(q);
    const double grad2 = inv_r2 * (vt[q] * vt[q] + gp * gp);
    s += grid.area_weights()[q] * (grad2 + v[q] * v[q]);
  }
  return std::sqrt(s);
}

namespace {
SpectralField degree_band(const SpectralField& f, int k_lo, int k_hi) {
  SpectralField g(f.n, f.k_max);
  k_hi = std::min(k_hi, f.k_max);
  for (int k = k_lo; k <= k_hi; ++k)
    g.c.segment(k * k, 2 * k + 1) = f.c.segment(k * k, 2 * k + 1);
  return g;
}
}  // namespace

SpectralField project_plus(const SpectralField& f) { return degree_band(f, 0, 1); }
SpectralField project_two(const SpectralField& f) { return degree_band(f, 2, 2); }
SpectralField project_minus(const SpectralField& f) { return degree_band(f, 3, f.k_max); }

ModeSplit mode_split(const SpectralField& f) {
  ModeSplit s;
  s.plus = project_plus(f);
  s.two = project_two(f);
  s.minus = project_minus(f);
  s.q_plus = q_norm(s.plus);
  s.q_two = q_norm(s.two);
  s.q_minus = q_norm(s.minus);
  return s;
}

SpectralField heat_semigroup(const SpectralField& f, double t) {
  SpectralField g = f;
  for (int k = 0; k <= f.k_max; ++k)
    g.c.segment(k * k, 2 * k + 1) *= std::exp(t * eigenvalue(k, f.n));
  return g;
}

SpectralField rotate_field(const SphereGrid& grid, const SpectralField& f, const Eigen::Matrix3d& R) {
  // (f o R^{-1})(dir) sampled on the grid; exact for band-limited fields since
  // rotations preserve harmonic degree and the quadrature is product-exact.
  Eigen::VectorXd values(grid.n_nodes());
  Eigen::VectorXd row;
  const Eigen::Matrix3d Rinv = R.transpose();
  for (int q = 0; q < grid.n_nodes(); ++q) {
    grid.basis_row(Rinv * grid.direction(q), row);
    values[q] = row.dot(f.c);
  }
  return analyze(grid, values);
}

SymmetryProjector SymmetryProjector::tetrahedral(const SphereGrid& grid) {
  // Order-12 rotation group: cyclic coordinate permutations times even sign flips.
  std::vector<Eigen::Matrix3d> group;
  const int perms[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
  const int signs[4][3] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  for (const auto& pm : perms)
    for (const auto& sg : signs) {
      Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
      for (int r = 0; r < 3; ++r) R(r, pm[r]) = sg[r];
      group.push_back(R);
    }

  const int nc = grid.n_coeff();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nc, nc);
  Eigen::VectorXd row;
  Eigen::MatrixXd rot_basis(grid.n_nodes(), nc);
  for (const auto& R : group) {
    const Eigen::Matrix3d Rinv = R.transpose();
    for (int q = 0; q < grid.n_nodes(); ++q) {
      grid.basis_row(Rinv * grid.direction(q), row);
      rot_basis.row(q) = row.transpose();
    }
    P += grid.synth_value().transpose() * grid.area_weights().asDiagonal() * rot_basis;
  }
  P /= static_cast<double>(group.size());
  return SymmetryProjector(std::move(P));
}

}  // namespace sphereflow
