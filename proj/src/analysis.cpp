#include "sphereflow/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace sphereflow {

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  const double den = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

}  // namespace

ConeMembership cone_membership(const SpectralField& u, const ConeQuery& q) {
  if (!(q.kappa > 0)) throw std::invalid_argument("cone_membership: kappa must be positive");
  const ModeSplit s = mode_split(u);
  double axis, comp;
  if (q.kind == ConeQuery::Kind::AroundPlus) {
    axis = s.q_plus;
    comp = std::hypot(s.q_two, s.q_minus);
  } else {
    axis = std::hypot(s.q_plus, s.q_two);
    comp = s.q_minus;
  }
  ConeMembership m;
  m.margin = axis - q.kappa * comp;
  m.member = m.margin >= 0.0;
  return m;
}

double effective_cone_parameter(const SpectralField& u, ConeQuery::Kind kind) {
  const ModeSplit s = mode_split(u);
  const double axis =
      kind == ConeQuery::Kind::AroundPlus ? s.q_plus : std::hypot(s.q_plus, s.q_two);
  const double comp =
      kind == ConeQuery::Kind::AroundPlus ? std::hypot(s.q_two, s.q_minus) : s.q_minus;
  if (comp == 0.0) return std::numeric_limits<double>::infinity();
  return axis / comp;
}

ConeGrowthReport cone_growth_check(const SphereGrid& grid, const FlowTrajectory& a,
                                   const FlowTrajectory& b, const ConeGrowthOptions& opts) {
  const double R = sphere_radius(grid.n());
  ConeGrowthReport rep;
  rep.regime_ok = true;
  for (int t = 0; t <= opts.m; ++t) {
    const SpectralField ua = graph_of(a.at_time(t), R);
    const SpectralField ub = graph_of(b.at_time(t), R);
    if (surrogate_norms(grid, ua).c2 > opts.regime_c2 ||
        surrogate_norms(grid, ub).c2 > opts.regime_c2)
      rep.regime_ok = false;
    const SpectralField d = ua - ub;
    rep.times.push_back(t);
    rep.kappa_plus.push_back(effective_cone_parameter(d, ConeQuery::Kind::AroundPlus));
    rep.kappa_full.push_back(effective_cone_parameter(d, ConeQuery::Kind::AroundPlusTwo));
  }

  const auto check = [&](const std::vector<double>& kappa, double floor, double& total,
                         double& cap) {
    bool ok = true;
    cap = 0.0;
    for (double k : kappa) cap = std::max(cap, k);
    for (size_t i = 0; i + 1 < kappa.size(); ++i) {
      if (kappa[i] >= opts.cap || std::isinf(kappa[i])) continue;  // already capped
      const double factor = kappa[i + 1] / kappa[i];
      if (!(factor >= floor * opts.floor_factor) && !(kappa[i + 1] >= opts.cap)) ok = false;
    }
    total = kappa.back() / kappa.front();
    return ok;
  };
  rep.plus_growth_ok = check(rep.kappa_plus, std::exp(0.25), rep.plus_total_factor,
                             rep.empirical_cap_plus);
  rep.full_growth_ok = check(rep.kappa_full, std::exp(1.0 / grid.n()), rep.full_total_factor,
                             rep.empirical_cap_full);
  return rep;
}

// ---------------------------------------------------------------------------

DecayFit decay_rate(const FlowTrajectory& traj, const DecayOptions& opts) {
  if (traj.clock != FlowClock::Rescaled)
    throw std::invalid_argument("decay_rate: expected a rescaled trajectory");
  const double R = sphere_radius(traj.n);

  struct Point {
    double t;
    SpectralField u;
    double norm;
  };
  std::vector<Point> pts;
  for (const auto& s : traj.snapshots) {
    Point p;
    p.t = s.time;
    p.u = graph_of(s, R);
    p.norm = opts.mode == DecayOptions::NormMode::Full
                 ? q_norm(p.u)
                 : std::hypot(q_norm(project_two(p.u)), q_norm(project_minus(p.u)));
    pts.push_back(std::move(p));
  }
  if (pts.empty() || pts.back().norm == 0.0)
    throw std::domain_error("decay_rate: zero field at the end of the trajectory");

  // Usable band, then the last window_fraction of it.
  std::vector<int> usable;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    if (pts[i].norm >= opts.norm_floor && pts[i].norm <= opts.norm_cap) usable.push_back(i);
  if (static_cast<int>(usable.size()) < opts.min_points)
    throw std::domain_error("decay_rate: too few snapshots inside the norm band");
  const int start = static_cast<int>(usable.size() * (1.0 - opts.window_fraction));
  std::vector<int> win(usable.begin() + std::min<size_t>(start, usable.size() - opts.min_points),
                       usable.end());

  // The norm must be monotone over the window (either direction).
  bool dec = true, inc = true;
  for (size_t i = 0; i + 1 < win.size(); ++i) {
    if (pts[win[i + 1]].norm > pts[win[i]].norm) dec = false;
    if (pts[win[i + 1]].norm < pts[win[i]].norm) inc = false;
  }
  if (!dec && !inc)
    throw std::domain_error("decay_rate: norm is not monotone on the fit window (too early)");

  std::vector<double> ts, logn;
  for (int i : win) {
    ts.push_back(pts[i].t);
    logn.push_back(std::log(pts[i].norm));
  }
  const LineFit lf = fit_line(ts, logn);

  DecayFit fit;
  fit.lambda_hat = lf.slope;
  fit.window_begin = ts.front();
  fit.window_end = ts.back();
  fit.fit_residual = lf.rms;

  // Dominant degree: average energy fraction per degree over the window.
  const int k_max = pts.front().u.k_max;
  const int k_lo = opts.mode == DecayOptions::NormMode::Decaying ? 2 : 0;
  std::vector<double> frac(k_max + 1, 0.0);
  for (int i : win) {
    const double total = pts[i].norm;
    for (int k = k_lo; k <= k_max; ++k) {
      SpectralField part(pts[i].u.n, k_max);
      part.c.segment(k * k, 2 * k + 1) = pts[i].u.c.segment(k * k, 2 * k + 1);
      frac[k] += q_norm(part) / total;
    }
  }
  int k_dom = k_lo;
  for (int k = k_lo; k <= k_max; ++k)
    if (frac[k] > frac[k_dom]) k_dom = k;
  fit.dominant_degree = k_dom;

  // Profile of the dominant degree, rescaled by the theoretical rate.
  const double lam_k = eigenvalue(k_dom, traj.n);
  SpectralField pk(pts.front().u.n, k_max);
  for (int i : win) {
    SpectralField part(pts.front().u.n, k_max);
    part.c.segment(k_dom * k_dom, 2 * k_dom + 1) =
        pts[i].u.c.segment(k_dom * k_dom, 2 * k_dom + 1);
    pk += std::exp(-lam_k * pts[i].t) * part;
  }
  pk *= 1.0 / static_cast<double>(win.size());
  fit.pk = pk;

  // Residual decay after removing the fitted leading term.
  std::vector<double> rt, rlog;
  for (int i : win) {
    SpectralField lead = heat_semigroup(pk, pts[i].t);
    const double res = opts.mode == DecayOptions::NormMode::Full
                           ? q_norm(pts[i].u - lead)
                           : std::hypot(q_norm(project_two(pts[i].u - lead)),
                                        q_norm(project_minus(pts[i].u - lead)));
    if (res > 1e-14) {
      rt.push_back(pts[i].t);
      rlog.push_back(std::log(res));
    }
  }
  fit.sigma_hat = rt.size() >= 3 ? lam_k - fit_line(rt, rlog).slope : 0.0;

  const SpectralField& u_end = pts[win.back()].u;
  const ModeSplit end_split = mode_split(u_end);
  const double total_end = q_norm(u_end);
  fit.plus_fraction_end = total_end > 0 ? end_split.q_plus / total_end : 0.0;
  fit.two_vs_minus_end =
      end_split.q_minus > 0 ? end_split.q_two / end_split.q_minus
                            : std::numeric_limits<double>::infinity();
  return fit;
}

SingularityReport classify_singularity(const FlowTrajectory& traj, const ClassifyOptions& opts) {
  SingularityReport rep;
  DecayFit fit;
  try {
    fit = decay_rate(traj, opts.decay);
  } catch (const std::domain_error& e) {
    rep.verdict = SingularityReport::Verdict::Indeterminate;
    rep.reason = e.what();
    return rep;
  }
  rep.dominant_degree = fit.dominant_degree;
  rep.decay_rate = fit.lambda_hat;
  rep.pk_coeffs = fit.pk;
  rep.gap = fit.sigma_hat;
  rep.window_begin = fit.window_begin;
  rep.window_end = fit.window_end;
  rep.fit_residual = fit.fit_residual;
  rep.plus_fraction_end = fit.plus_fraction_end;

  const double ratio = fit.two_vs_minus_end;
  const double lo = 1.0 / opts.dominance_factor, hi = opts.dominance_factor;
  if (ratio > lo && ratio < hi) {
    rep.verdict = SingularityReport::Verdict::Indeterminate;
    rep.reason = "degree-2 and high-degree parts are within the tie-break band";
    return rep;
  }
  if (fit.dominant_degree == 2 &&
      std::abs(fit.lambda_hat + 1.0 / traj.n) <= opts.rate_tolerance) {
    rep.verdict = SingularityReport::Verdict::Slow;
  } else if (fit.dominant_degree >= 3) {
    rep.verdict = SingularityReport::Verdict::Fast;
  } else {
    rep.verdict = SingularityReport::Verdict::Indeterminate;
    rep.reason = "dominant degree 2 but the fitted rate misses -1/n";
  }
  return rep;
}

// ---------------------------------------------------------------------------

DesignResult design_perturbation(const SphereGrid& grid, const PropagatorMatrix& P,
                                 const DesignOptions& opts) {
  const int nc = grid.n_coeff();
  Eigen::MatrixXd T = P.T;
  if (opts.exclude_two_input) {
    for (int m = -2; m <= 2; ++m) T.col(coeff_index(2, m)).setZero();
  }

  // Numerically meaningful input subspace from the SVD.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cut = svd.singularValues()[0] * opts.rank_cutoff;
  int rank = 0;
  while (rank < svd.singularValues().size() && svd.singularValues()[rank] > cut) ++rank;
  const Eigen::MatrixXd V = svd.matrixV().leftCols(rank);
  const Eigen::MatrixXd W = T * V;  // images of the retained input directions

  // Q-weights, full and restricted to degree 2.
  Eigen::VectorXd qw(nc), qw2 = Eigen::VectorXd::Zero(nc);
  for (int k = 0; k <= grid.k_max(); ++k) {
    const double w = laplace_eigenvalue(k, grid.n()) + kQLambda;
    for (int m = -k; m <= k; ++m) {
      qw[coeff_index(k, m)] = w;
      if (k == 2) qw2[coeff_index(k, m)] = w;
    }
  }
  const Eigen::MatrixXd A = W.transpose() * qw2.asDiagonal() * W;
  const Eigen::MatrixXd B = W.transpose() * qw.asDiagonal() * W;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, B);
  const int best = static_cast<int>(ges.eigenvalues().size()) - 1;
  const double theta = std::max(0.0, ges.eigenvalues()[best]);
  Eigen::VectorXd v0 = V * ges.eigenvectors().col(best);

  // Normalize to the requested L^2(M_0) budget.
  const double n0 = std::sqrt(v0.dot(P.gram0 * v0));
  v0 *= opts.budget / n0;

  DesignResult out;
  out.v0 = SpectralField(grid.n(), grid.k_max());
  out.v0.c = v0;
  out.achieved_ratio = std::sqrt(theta);
  out.ok = out.achieved_ratio >= opts.target;
  out.subspace_rank = rank;
  return out;
}

}  // namespace sphereflow
