#include "sphereflow/geometry.hpp"

#include <cmath>
#include <numbers>

namespace sphereflow {

RadialGraph RadialGraph::sphere(const SphereGrid& grid, double radius) {
  return RadialGraph(SpectralField::constant(grid.n(), grid.k_max(), radius), grid.n());
}

RadialGraph RadialGraph::from_graph_function(const SphereGrid& grid, const SpectralField& u,
                                             double base_radius) {
  SpectralField p = u;
  p.c[0] += SpectralField::constant(grid.n(), grid.k_max(), base_radius).c[0];
  return RadialGraph(std::move(p), grid.n());
}

SpectralField graph_function(const RadialGraph& g, double base_radius) {
  SpectralField u = g.profile;
  u.c[0] -= SpectralField::constant(g.n, u.k_max, base_radius).c[0];
  return u;
}

NodeGeometry node_geometry(const SphereGrid& grid, const Eigen::VectorXd& profile_coeffs) {
  const int nq = grid.n_nodes();
  const Eigen::VectorXd all = grid.synth_stacked() * profile_coeffs;

  NodeGeometry ng;
  ng.r.resize(nq);
  ng.W.resize(nq);
  ng.H.resize(nq);
  ng.phi.resize(nq);
  ng.g_t.resize(nq);
  ng.g_p.resize(nq);
  ng.Hrho_tt.resize(nq);
  ng.Hrho_tp.resize(nq);
  ng.Hrho_pp.resize(nq);

  const double n = grid.n();
  double max_slope = 0.0;
  double min_r = std::numeric_limits<double>::infinity();
  for (int q = 0; q < nq; ++q) {
    const double st = grid.sin_theta(q);
    const double ct = grid.cot_theta(q);
    const double r = all[q];
    const double rt = all[nq + q];
    const double rp = all[2 * nq + q];
    const double rtt = all[3 * nq + q];
    const double rtp = all[4 * nq + q];
    const double rpp = all[5 * nq + q];

    // Orthonormal-frame first derivatives and covariant Hessian of r.
    const double a_t = rt;
    const double a_p = rp / st;
    const double h_tt = rtt;
    const double h_tp = (rtp - ct * rp) / st;
    const double h_pp = rpp / (st * st) + ct * rt;

    const double g_t = a_t / r;
    const double g_p = a_p / r;
    const double Htt = h_tt / r - g_t * g_t;
    const double Htp = h_tp / r - g_t * g_p;
    const double Hpp = h_pp / r - g_p * g_p;

    const double slope2 = g_t * g_t + g_p * g_p;
    const double W = std::sqrt(1.0 + slope2);
    const double lap = Htt + Hpp;
    const double quad = Htt * g_t * g_t + 2.0 * Htp * g_t * g_p + Hpp * g_p * g_p;
    const double H = (n - lap + quad / (W * W)) / (r * W);

    ng.r[q] = r;
    ng.W[q] = W;
    ng.H[q] = H;
    ng.phi[q] = H - r / (2.0 * W);
    ng.g_t[q] = g_t;
    ng.g_p[q] = g_p;
    ng.Hrho_tt[q] = Htt;
    ng.Hrho_tp[q] = Htp;
    ng.Hrho_pp[q] = Hpp;

    max_slope = std::max(max_slope, std::sqrt(slope2));
    min_r = std::min(min_r, r);
  }
  ng.max_slope = max_slope;
  ng.min_r = min_r;
  return ng;
}

Eigen::VectorXd second_form_squared(const NodeGeometry& ng) {
  const int nq = static_cast<int>(ng.r.size());
  Eigen::VectorXd a2(nq);
  for (int q = 0; q < nq; ++q) {
    const double gt = ng.g_t[q], gp = ng.g_p[q];
    const double W2 = ng.W[q] * ng.W[q];
    // h_ab = (r/W)(delta + g g - Hess rho), metric r^2(delta + g g);
    // shape operator S = g^{-1} h, |A|^2 = tr(S^2).
    const double h11 = 1.0 + gt * gt - ng.Hrho_tt[q];
    const double h12 = gt * gp - ng.Hrho_tp[q];
    const double h22 = 1.0 + gp * gp - ng.Hrho_pp[q];
    const double i11 = 1.0 - gt * gt / W2;  // inverse of (delta + g g)
    const double i12 = -gt * gp / W2;
    const double i22 = 1.0 - gp * gp / W2;
    const double c = 1.0 / (ng.r[q] * ng.W[q]);
    const double s11 = c * (i11 * h11 + i12 * h12);
    const double s12 = c * (i11 * h12 + i12 * h22);
    const double s21 = c * (i12 * h11 + i22 * h12);
    const double s22 = c * (i12 * h12 + i22 * h22);
    a2[q] = s11 * s11 + 2.0 * s12 * s21 + s22 * s22;
  }
  return a2;
}

void validate_graph(const SphereGrid& grid, const RadialGraph& g, double slope_limit,
                    double min_radius) {
  const NodeGeometry ng = node_geometry(grid, g.profile.c);
  if (!(ng.min_r > min_radius))
    throw GraphInvariantError("radial graph not star-shaped: min r = " + std::to_string(ng.min_r));
  if (!(ng.max_slope < slope_limit))
    throw GraphInvariantError("radial graph slope bound exceeded: |grad r|/r = " +
                              std::to_string(ng.max_slope));
}

SpectralField mean_curvature(const SphereGrid& grid, const RadialGraph& g) {
  const NodeGeometry ng = node_geometry(grid, g.profile.c);
  if (!(ng.min_r > 0.0)) throw GraphInvariantError("mean_curvature: profile not positive");
  if (!(ng.max_slope < 10.0)) throw GraphInvariantError("mean_curvature: slope bound exceeded");
  return analyze(grid, ng.H);
}

SpectralField rescaled_speed(const SphereGrid& grid, const RadialGraph& g) {
  const NodeGeometry ng = node_geometry(grid, g.profile.c);
  if (!(ng.min_r > 0.0)) throw GraphInvariantError("rescaled_speed: profile not positive");
  if (!(ng.max_slope < 10.0)) throw GraphInvariantError("rescaled_speed: slope bound exceeded");
  return analyze(grid, ng.phi);
}

SimilarityAction SimilarityAction::translation(const Eigen::Vector3d& v) {
  SimilarityAction s;
  s.beta = v.norm();
  s.U = s.beta > 0 ? Eigen::Vector3d(v / s.beta) : Eigen::Vector3d::UnitZ();
  return s;
}

SimilarityAction SimilarityAction::inverse() const {
  // (alpha, beta U)^{-1}: x -> (x - beta U)/alpha.
  SimilarityAction inv;
  inv.alpha = 1.0 / alpha;
  inv.beta = beta / alpha;
  inv.U = -U;
  return inv;
}

std::optional<double> resolve_ray(const SphereGrid& grid, const SpectralField& profile,
                                  double alpha, const Eigen::Vector3d& offset,
                                  const Eigen::Vector3d& dir, double guess) {
  const auto residual = [&](double t) {
    const Eigen::Vector3d p = t * dir - offset;
    const double len = p.norm();
    if (len < 1e-14) return -alpha * evaluate(grid, profile, dir);
    return len - alpha * evaluate(grid, profile, p / len);
  };

  // Bracket around the guess, then bisection refined by secant steps.
  double lo = std::max(1e-12, 0.5 * guess), hi = 1.5 * guess + 1e-6;
  double flo = residual(lo), fhi = residual(hi);
  for (int i = 0; i < 60 && flo * fhi > 0; ++i) {
    lo *= 0.7;
    hi *= 1.4;
    flo = residual(lo);
    fhi = residual(hi);
  }
  if (flo * fhi > 0) return std::nullopt;

  double a = lo, b = hi, fa = flo, fb = fhi;
  for (int it = 0; it < 200; ++it) {
    double mid;
    if (std::abs(fb - fa) > 1e-300) {
      mid = b - fb * (b - a) / (fb - fa);  // secant
      if (!(mid > a && mid < b)) mid = 0.5 * (a + b);
    } else {
      mid = 0.5 * (a + b);
    }
    const double fm = residual(mid);
    if (std::abs(fm) < 1e-12 || (b - a) < 1e-13 * std::max(1.0, b)) return mid;
    if (fa * fm <= 0) {
      b = mid;
      fb = fm;
    } else {
      a = mid;
      fa = fm;
    }
  }
  return 0.5 * (a + b);
}

RadialGraph apply_similarity(const SphereGrid& grid, const RadialGraph& g,
                             const SimilarityAction& s) {
  if (s.alpha <= 0.0) throw std::invalid_argument("apply_similarity: alpha must be positive");
  if (s.beta == 0.0) {
    if (s.alpha == 1.0) return g;  // identity: bitwise equal
    RadialGraph out = g;
    out.profile.c *= s.alpha;  // pure dilation is exact on coefficients
    return out;
  }

  const Eigen::Vector3d offset = s.beta * s.U;
  Eigen::VectorXd values(grid.n_nodes());
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const Eigen::Vector3d dir = grid.direction(q);
    const double guess = s.alpha * evaluate(grid, g.profile, dir) + s.beta * s.U.dot(dir);
    const auto t = resolve_ray(grid, g.profile, s.alpha, offset, dir, std::max(guess, 1e-6));
    if (!t || *t <= 0.0)
      throw GraphInvariantError("apply_similarity: transformed surface lost star-shapedness");
    values[q] = *t;
  }
  return RadialGraph(analyze(grid, values), g.n);
}

SpectralField similarity_first_order(const SphereGrid& grid, const SpectralField& u,
                                     const SimilarityAction& s) {
  const int nq = grid.n_nodes();
  const Eigen::VectorXd v = grid.synth_value() * u.c;
  const Eigen::VectorXd vt = grid.synth_dtheta() * u.c;
  const Eigen::VectorXd vp = grid.synth_dphi() * u.c;
  Eigen::VectorXd w(nq);
  for (int q = 0; q < nq; ++q) {
    const int i = q / grid.n_lon();
    const int j = q % grid.n_lon();
    const double st = grid.sin_theta(q);
    const double ctheta = std::cos(grid.theta(i));
    const double cphi = std::cos(grid.phi(j));
    const double sphi = std::sin(grid.phi(j));
    const Eigen::Vector3d x0(st * cphi, st * sphi, ctheta);
    const Eigen::Vector3d e_t(ctheta * cphi, ctheta * sphi, -st);
    const Eigen::Vector3d e_p(-sphi, cphi, 0.0);
    const double grad_dot_U = vt[q] * e_t.dot(s.U) + (vp[q] / st) * e_p.dot(s.U);
    w[q] = v[q] + (1.0 + v[q]) * (s.alpha - 1.0) +
           (s.U.dot(x0) - grad_dot_U / (1.0 + v[q])) * s.beta;
  }
  return analyze(grid, w);
}

SpectralField transplant(const SphereGrid& grid, const SpectralField& f, const SpectralField& g,
                         double smallness) {
  require_compatible(f, g);
  const SurrogateNorms nf = surrogate_norms(grid, f);
  const SurrogateNorms ngs = surrogate_norms(grid, g);
  if (nf.c2 > smallness || ngs.c2 > smallness)
    throw std::invalid_argument("transplant: graphs exceed the smallness threshold");

  const double R = grid.radius();

  // z(omega): the point of the stacked surface over the Sigma_1 parameter omega.
  const auto compose_point = [&](const Eigen::Vector3d& dir) -> Eigen::Vector3d {
    const double x = std::clamp(dir.z() / dir.norm(), -1.0, 1.0);
    const double ph = std::atan2(dir.y(), dir.x());
    const double st = std::sqrt(std::max(1e-30, 1.0 - x * x));
    std::vector<double> p, dp;
    legendre_column(grid.k_max(), x, p, dp);
    double fv = 0, ft = 0, fp = 0, gv = 0;
    for (int k = 0; k <= grid.k_max(); ++k) {
      for (int m = -k; m <= k; ++m) {
        const int am = std::abs(m);
        double tr, dtr;
        if (m > 0) {
          tr = std::numbers::sqrt2 * std::cos(m * ph);
          dtr = -m * std::numbers::sqrt2 * std::sin(m * ph);
        } else if (m == 0) {
          tr = 1.0;
          dtr = 0.0;
        } else {
          tr = std::numbers::sqrt2 * std::sin(am * ph);
          dtr = am * std::numbers::sqrt2 * std::cos(am * ph);
        }
        const double base = p[legendre_index(k, am)] / grid.radius();
        const double dbase = dp[legendre_index(k, am)] / grid.radius();
        const int idx = coeff_index(k, m);
        fv += f.c[idx] * base * tr;
        ft += f.c[idx] * dbase * tr;
        fp += f.c[idx] * base * dtr;
        gv += g.c[idx] * base * tr;
      }
    }
    const double ct = x;
    const double cphi = std::cos(ph), sphi = std::sin(ph);
    const Eigen::Vector3d omega(st * cphi, st * sphi, ct);
    const Eigen::Vector3d e_t(ct * cphi, ct * sphi, -st);
    const Eigen::Vector3d e_p(-sphi, cphi, 0.0);
    const double r1 = R + fv;
    const double gt = ft / r1;
    const double gp = (fp / st) / r1;
    const double W = std::sqrt(1.0 + gt * gt + gp * gp);
    const Eigen::Vector3d nu = (omega - gt * e_t - gp * e_p) / W;
    return r1 * omega + gv * nu;
  };

  Eigen::VectorXd values(grid.n_nodes());
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const Eigen::Vector3d target = grid.direction(q);
    Eigen::Vector3d omega = target;
    Eigen::Vector3d z = compose_point(omega);
    bool ok = false;
    for (int it = 0; it < 80; ++it) {
      const Eigen::Vector3d d = z / z.norm();
      const Eigen::Vector3d step = target - d;
      if (step.norm() < 1e-14) {
        ok = true;
        break;
      }
      omega = (omega + step).normalized();
      z = compose_point(omega);
    }
    if (!ok) throw GraphInvariantError("transplant: composed surface is not a graph");
    values[q] = z.norm() - R;
  }
  return analyze(grid, values);
}

SurrogateNorms surrogate_norms(const SphereGrid& grid, const SpectralField& u) {
  const int nq = grid.n_nodes();
  const Eigen::VectorXd all = grid.synth_stacked() * u.c;
  SurrogateNorms s;
  for (int q = 0; q < nq; ++q) {
    const double st = grid.sin_theta(q);
    const double ct = grid.cot_theta(q);
    const double v = std::abs(all[q]);
    const double a_t = all[nq + q];
    const double a_p = all[2 * nq + q] / st;
    const double h_tt = all[3 * nq + q];
    const double h_tp = (all[4 * nq + q] - ct * all[2 * nq + q]) / st;
    const double h_pp = all[5 * nq + q] / (st * st) + ct * all[nq + q];
    const double grad = std::hypot(a_t, a_p);
    const double hess = std::max({std::abs(h_tt), std::abs(h_tp), std::abs(h_pp)});
    s.c0 = std::max(s.c0, v);
    s.c1 = std::max({s.c1, v, grad});
    s.c2 = std::max({s.c2, v, grad, hess});
  }
  return s;
}

}  // namespace sphereflow
