#include "sphereflow/arrival.hpp"

#include <cmath>

namespace sphereflow {

namespace {

const std::vector<Eigen::Vector3d>& probe_directions() {
  static const std::vector<Eigen::Vector3d> dirs = [] {
    std::vector<Eigen::Vector3d> d = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                      Eigen::Vector3d::UnitZ()};
    d.emplace_back(Eigen::Vector3d(1, 1, 0).normalized());
    d.emplace_back(Eigen::Vector3d(1, -1, 0).normalized());
    d.emplace_back(Eigen::Vector3d(0, 1, 1).normalized());
    d.emplace_back(Eigen::Vector3d(1, 0, 1).normalized());
    return d;
  }();
  return dirs;
}

std::vector<double> default_ladder() {
  std::vector<double> r;
  for (int j = 0; j <= 6; ++j) r.push_back(0.2 * std::pow(2.0, -j));
  return r;
}

double line_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

ArrivalSampler::ArrivalSampler(const SphereGrid& grid, FlowTrajectory rescaled,
                               ExtinctionEvent event)
    : grid_(grid), traj_(std::move(rescaled)), event_(std::move(event)) {
  if (traj_.clock != FlowClock::Rescaled)
    throw std::invalid_argument("ArrivalSampler: expected a rescaled trajectory");
  if (traj_.snapshots.size() < 4)
    throw std::invalid_argument("ArrivalSampler: trajectory needs at least 4 snapshots");
  // Conservative resolved-radius range (min profile radius shrinks like e^{-t/2}).
  const auto range = [&](const Snapshot& s) {
    const Eigen::VectorXd v = grid_.synth_value() * s.profile.c;
    return std::pair<double, double>(v.minCoeff(), v.maxCoeff());
  };
  const auto first = range(traj_.snapshots.front());
  const auto last = range(traj_.snapshots.back());
  max_radius_ = std::exp(-traj_.t_begin() / 2.0) * first.first;
  min_radius_ = std::exp(-traj_.t_end() / 2.0) * last.second;
}

double ArrivalSampler::radius_at(int snap_index, const Eigen::Vector3d& omega) const {
  const Snapshot& s = traj_.snapshots[snap_index];
  return std::exp(-s.time / 2.0) * evaluate(grid_, s.profile, omega);
}

double ArrivalSampler::operator()(const Eigen::Vector3d& x) const {
  const double s = x.norm();
  if (s <= 0.0) return event_.time;
  const Eigen::Vector3d omega = x / s;

  const int n_snap = static_cast<int>(traj_.snapshots.size());
  double g_first = radius_at(0, omega);
  double g_last = radius_at(n_snap - 1, omega);
  if (s > g_first) {
    if (s <= g_first * (1.0 + 1e-12) + 1e-12)
      return event_.time - std::exp(-traj_.t_begin());
    throw std::out_of_range("arrival: point outside the initial surface");
  }
  if (s < g_last)
    throw std::out_of_range("arrival: radius below the resolved range of the trajectory");

  // Binary search for the bracketing snapshot pair; the front radius decreases.
  int lo = 0, hi = n_snap - 1;
  double g_lo = g_first;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    const double g_mid = radius_at(mid, omega);
    if (g_mid >= s) {
      if (g_mid > g_lo + 1e-12)
        throw GraphInvariantError("arrival: non-monotone sweep along the ray");
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }

  // Local polynomial of log-radius against t through up to 4 snapshots.
  const int i0 = std::max(0, lo - 1);
  const int i1 = std::min(n_snap - 1, hi + 1);
  std::vector<double> ts, lg;
  for (int i = i0; i <= i1; ++i) {
    ts.push_back(traj_.snapshots[i].time);
    lg.push_back(std::log(radius_at(i, omega)));
  }
  const double target = std::log(s);

  // Newton on the Lagrange interpolant, seeded by the linear crossing.
  const auto interp = [&](double t, double* deriv) {
    const int m = static_cast<int>(ts.size());
    double value = 0.0, dvalue = 0.0;
    for (int i = 0; i < m; ++i) {
      double li = 1.0, dli = 0.0;
      for (int j = 0; j < m; ++j) {
        if (j == i) continue;
        const double f = (t - ts[j]) / (ts[i] - ts[j]);
        dli = dli * f + li / (ts[i] - ts[j]);
        li *= f;
      }
      value += lg[i] * li;
      dvalue += lg[i] * dli;
    }
    if (deriv) *deriv = dvalue;
    return value;
  };

  const double t_lo = traj_.snapshots[lo].time, t_hi = traj_.snapshots[hi].time;
  const double gl = std::log(g_lo), gh = std::log(radius_at(hi, omega));
  double t = t_lo + (target - gl) * (t_hi - t_lo) / (gh - gl);
  for (int it = 0; it < 30; ++it) {
    double d;
    const double v = interp(t, &d);
    const double dt = (v - target) / d;
    t -= dt;
    t = std::clamp(t, t_lo - traj_.snapshot_every, t_hi + traj_.snapshot_every);
    if (std::abs(dt) < 1e-14) break;
  }
  return event_.time - std::exp(-t);
}

ArrivalSamples ArrivalSampler::sample(const std::vector<Eigen::Vector3d>& points) const {
  ArrivalSamples out;
  out.event = event_;
  out.points = points;
  out.times.reserve(points.size());
  for (const auto& p : points) out.times.push_back((*this)(p));
  return out;
}

double ArrivalSampler::self_consistency_error(int n_rays) const {
  // Cross-validation: a sampler on the decimated trajectory (every other
  // snapshot) must reproduce the removed snapshots' crossing times. This
  // bounds the interpolation error of the full-cadence sampler conservatively
  // (the decimated stencil is 2x coarser).
  FlowTrajectory half;
  half.clock = traj_.clock;
  half.n = traj_.n;
  half.k_max = traj_.k_max;
  half.dt = traj_.dt;
  half.snapshot_every = 2.0 * traj_.snapshot_every;
  for (size_t j = 0; j < traj_.snapshots.size(); j += 2) half.snapshots.push_back(traj_.snapshots[j]);
  const ArrivalSampler coarse(grid_, std::move(half), event_);

  double worst = 0.0;
  for (int r = 0; r < n_rays; ++r) {
    const Eigen::Vector3d omega = grid_.direction((r * 37 + 11) % grid_.n_nodes());
    for (size_t j = 3; j + 2 < traj_.snapshots.size(); j += 4) {  // odd: removed nodes
      const double radius = radius_at(static_cast<int>(j), omega);
      const double tau = event_.time - std::exp(-traj_.snapshots[j].time);
      const double got = coarse(radius * omega);
      worst = std::max(worst, std::abs(got - tau));
    }
  }
  return worst;
}

bool ArrivalSampler::ray_monotone(const Eigen::Vector3d& omega) const {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(traj_.snapshots.size()); ++i) {
    const double g = radius_at(i, omega);
    if (g >= prev) return false;
    prev = g;
  }
  return true;
}

// ---------------------------------------------------------------------------

ExpansionFitOptions::ExpansionFitOptions() : radii(default_ladder()) {}
RegularityProbeOptions::RegularityProbeOptions() : radii(default_ladder()) {}

ExpansionFit fit_arrival_expansion(const SphereGrid& grid,
                                   const std::function<double(const Eigen::Vector3d&)>& t,
                                   double T, int n, const ExpansionFitOptions& opts) {
  ExpansionFit out;
  const int k_max = grid.k_max();

  // Remainder after the universal quadratic term, per radius, split by degree.
  std::vector<SpectralField> remainders;
  std::vector<double> radii;
  for (double s : opts.radii) {
    Eigen::VectorXd values(grid.n_nodes());
    bool ok = true;
    for (int q = 0; q < grid.n_nodes() && ok; ++q) {
      try {
        values[q] = t(s * grid.direction(q)) - T + s * s / (2.0 * n);
      } catch (const std::out_of_range&) {
        ok = false;
      }
    }
    if (!ok) continue;
    remainders.push_back(analyze(grid, values));
    radii.push_back(s);
  }
  if (radii.size() < 3) return out;
  out.radii_used = radii;

  // Smallest degree k >= 2 whose amplitude follows s^{k + k(k-1)/n}. Only
  // radii with the degree amplitude above the noise floor participate.
  out.degree_amplitudes.assign(k_max + 1, 0.0);
  std::vector<size_t> sel;
  for (int k = 2; k <= k_max && !out.detected; ++k) {
    const double gamma = k + static_cast<double>(k) * (k - 1) / n;
    std::vector<double> lx, ly;
    std::vector<size_t> idx;
    double amp = 0.0;
    for (size_t j = 0; j < radii.size(); ++j) {
      const double a = remainders[j].degree_norm(k);
      if (a > opts.noise_floor) {
        amp = std::max(amp, a / std::pow(radii[j], gamma));
        lx.push_back(std::log(radii[j]));
        ly.push_back(std::log(a));
        idx.push_back(j);
      }
    }
    out.degree_amplitudes[k] = amp;
    if (lx.size() < 3) continue;
    const double slope = line_slope(lx, ly);
    if (std::abs(slope - gamma) <= opts.slope_tolerance) {
      out.detected = true;
      out.k = k;
      sel = idx;
    }
  }
  if (!out.detected) return out;

  // Coefficients: rescale by s^{gamma} and extrapolate affinely to s = 0.
  const double gamma = out.k + static_cast<double>(out.k) * (out.k - 1) / n;
  SpectralField pk(grid.n(), k_max);
  {
    const int kk = out.k;
    const int base = kk * kk;
    const int len = 2 * kk + 1;
    for (int m = 0; m < len; ++m) {
      std::vector<double> xs, ys;
      for (size_t j : sel) {
        xs.push_back(radii[j]);
        ys.push_back(remainders[j].c[base + m] / std::pow(radii[j], gamma));
      }
      const double slope = line_slope(xs, ys);
      double sx = 0, sy = 0;
      for (size_t j = 0; j < xs.size(); ++j) {
        sx += xs[j];
        sy += ys[j];
      }
      pk.c[base + m] = (sy - slope * sx) / static_cast<double>(xs.size());
    }
  }
  out.pk = pk;

  // Residual decay beyond the fitted term.
  std::vector<double> rx, ry;
  for (size_t j : sel) {
    SpectralField lead = pk;
    lead *= std::pow(radii[j], gamma);
    SpectralField resid = remainders[j] - lead;
    // Degrees 0 and 1 carry recentering offsets, not expansion content.
    for (int k = 0; k <= 1; ++k) resid.c.segment(k * k, 2 * k + 1).setZero();
    const double rnorm = resid.l2_norm();
    if (rnorm > opts.noise_floor) {
      rx.push_back(std::log(radii[j]));
      ry.push_back(std::log(rnorm));
    }
  }
  out.sigma_hat = rx.size() >= 3 ? line_slope(rx, ry) - gamma : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

HessianProbe hessian_probe(const std::function<double(const Eigen::Vector3d&)>& t, int n,
                           const RegularityProbeOptions& opts, double tolerance) {
  HessianProbe out;
  const double t_origin = t(Eigen::Vector3d::Zero());
  for (double s : opts.radii) {
    Eigen::Matrix3d D;
    bool ok = true;
    try {
      const Eigen::Vector3d e[3] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                    Eigen::Vector3d::UnitZ()};
      for (int i = 0; i < 3; ++i)
        D(i, i) = (t(s * e[i]) - 2.0 * t_origin + t(-s * e[i])) / (s * s);
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          D(i, j) = (t(s * (e[i] + e[j])) - t(s * (e[i] - e[j])) - t(s * (e[j] - e[i])) +
                     t(-s * (e[i] + e[j]))) /
                    (4.0 * s * s);
          D(j, i) = D(i, j);
        }
    } catch (const std::out_of_range&) {
      ok = false;
    }
    if (!ok) continue;
    out.radii.push_back(s);
    out.hessians.push_back(D);
  }
  if (out.hessians.empty()) return out;
  const Eigen::Matrix3d limit = -Eigen::Matrix3d::Identity() / n;
  out.deviation_from_limit = (out.hessians.back() - limit).cwiseAbs().maxCoeff();
  out.consistent = out.deviation_from_limit <= tolerance;
  return out;
}

ThirdProbe third_difference_probe(const std::function<double(const Eigen::Vector3d&)>& t,
                                  const RegularityProbeOptions& opts) {
  ThirdProbe out;
  const auto& dirs = probe_directions();
  for (double s : opts.radii) {
    const double h = opts.step_fraction * s;
    std::vector<double> qs;
    bool ok = true;
    for (const auto& w : dirs) {
      try {
        const double f2p = t((s + 2 * h) * w);
        const double f1p = t((s + h) * w);
        const double f1m = t((s - h) * w);
        const double f2m = t((s - 2 * h) * w);
        qs.push_back((f2p - 2.0 * f1p + 2.0 * f1m - f2m) / (2.0 * h * h * h));
      } catch (const std::out_of_range&) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.radii.push_back(s);
    out.quotients.push_back(qs);
    const auto [mn, mx] = std::minmax_element(qs.begin(), qs.end());
    out.oscillation.push_back(*mx - *mn);
    out.floor.push_back(opts.floor_factor * 3.0 * opts.time_noise / (h * h * h));
  }
  if (out.radii.size() < 3) {
    out.verdict = ThirdProbe::Verdict::Inconclusive;
    out.stopped_at = out.radii.empty() ? 0.0 : out.radii.back();
    return out;
  }
  out.stopped_at = out.radii.back();

  const size_t nr = out.radii.size();
  const bool smallest_clean = out.oscillation[nr - 1] <= out.floor[nr - 1] &&
                              out.oscillation[nr - 2] <= out.floor[nr - 2];
  if (smallest_clean) {
    out.verdict = ThirdProbe::Verdict::C3Consistent;
    return out;
  }

  // Above-floor tail: bounded direction dependence or divergence both read as
  // a third-derivative defect at the origin.
  size_t tail = 0;
  double osc_max = 0.0;
  for (size_t i = 0; i < nr; ++i) osc_max = std::max(osc_max, out.oscillation[i]);
  for (size_t i = 0; i < nr; ++i)
    if (out.oscillation[i] > out.floor[i]) ++tail;
  const bool stays_up = out.oscillation[nr - 1] > out.floor[nr - 1] &&
                        out.oscillation[nr - 1] >= 0.25 * osc_max && tail >= 3;
  bool diverges = true;
  for (size_t i = nr - 3; i + 1 < nr; ++i)
    if (!(out.oscillation[i + 1] > 1.5 * out.oscillation[i] &&
          out.oscillation[i + 1] > out.floor[i + 1]))
      diverges = false;
  if (stays_up || diverges) {
    out.verdict = ThirdProbe::Verdict::NotC3;
  } else {
    out.verdict = ThirdProbe::Verdict::Inconclusive;
  }
  return out;
}

}  // namespace sphereflow
