#include "sphereflow/flow.hpp"

#include <cmath>
#include <numbers>

namespace sphereflow {

namespace {

double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

double phi2(double z) {
  if (std::abs(z) < 1e-5) return 0.5 + z / 6.0 + z * z / 24.0;
  return (std::expm1(z) - z) / (z * z);
}

// dr/dt = r/2 - W H (rescaled) or -W H (unrescaled) at one node.
struct SpeedSample {
  double rescaled;
  double unrescaled;
  double slope;
};

inline SpeedSample speed_kernel(double n, double st, double ct, double r, double rt, double rp,
                                double rtt, double rtp, double rpp) {
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
  const double quad = Htt * g_t * g_t + 2.0 * Htp * g_t * g_p + Hpp * g_p * g_p;
  const double WH = (n - (Htt + Hpp) + quad / (W * W)) / r;  // W * H
  return {r / 2.0 - WH, -WH, std::sqrt(slope2)};
}

}  // namespace

const Snapshot& FlowTrajectory::at_time(double t) const {
  const double tol = std::max(dt, 1e-12) * 0.51;
  for (const auto& s : snapshots)
    if (std::abs(s.time - t) <= tol) return s;
  throw std::out_of_range("FlowTrajectory: no snapshot near t = " + std::to_string(t));
}

bool FlowTrajectory::covers(double t) const {
  return t >= t_begin() - 1e-12 && t <= t_end() + 1e-12;
}

SpectralField graph_of(const Snapshot& snap, double base_radius) {
  SpectralField u = snap.profile;
  u.c[0] -= SpectralField::constant(u.n, u.k_max, base_radius).c[0];
  return u;
}

// ---------------------------------------------------------------------------
// Rescaled flow

RescaledStepper::RescaledStepper(const SphereGrid& grid, double dt, SymmetryTag symmetry)
    : grid_(grid), dt_(dt) {
  if (!(dt > 0.0 && dt <= 0.01))
    throw std::invalid_argument("RescaledStepper: dt must lie in (0, 0.01]");
  shift_ = SpectralField::constant(grid.n(), grid.k_max(), sphere_radius(grid.n())).c[0];
  const int nc = grid.n_coeff();
  lambda_.resize(nc);
  exp_dt_.resize(nc);
  phi1_dt_.resize(nc);
  phi2_dt_.resize(nc);
  for (int k = 0; k <= grid.k_max(); ++k) {
    const double lam = eigenvalue(k, grid.n());
    for (int m = -k; m <= k; ++m) {
      const int i = coeff_index(k, m);
      lambda_[i] = lam;
      exp_dt_[i] = std::exp(dt * lam);
      phi1_dt_[i] = dt * phi1(dt * lam);
      phi2_dt_[i] = dt * phi2(dt * lam);
    }
  }
  if (symmetry == SymmetryTag::Tetrahedral) sym_ = SymmetryProjector::tetrahedral(grid);
}

Eigen::VectorXd RescaledStepper::nonlinear(const Eigen::VectorXd& u_coeffs, double* min_r,
                                           double* max_slope) const {
  const int nq = grid_.n_nodes();
  Eigen::VectorXd profile = u_coeffs;
  profile[0] += shift_;
  const Eigen::VectorXd all = grid_.synth_stacked() * profile;

  Eigen::VectorXd speed(nq);
  double mr = std::numeric_limits<double>::infinity();
  double ms = 0.0;
  const double n = grid_.n();
  for (int q = 0; q < nq; ++q) {
    const double st = grid_.sin_theta(q);
    const double ct = grid_.cot_theta(q);
    const SpeedSample s = speed_kernel(n, st, ct, all[q], all[nq + q], all[2 * nq + q],
                                       all[3 * nq + q], all[4 * nq + q], all[5 * nq + q]);
    speed[q] = s.rescaled;
    mr = std::min(mr, all[q]);
    ms = std::max(ms, s.slope);
  }
  if (min_r) *min_r = mr;
  if (max_slope) *max_slope = ms;

  Eigen::VectorXd coeffs =
      grid_.synth_value().transpose() * grid_.area_weights().cwiseProduct(speed);
  coeffs -= lambda_.cwiseProduct(u_coeffs);
  return coeffs;
}

Eigen::MatrixXd RescaledStepper::nonlinear_block(const Eigen::MatrixXd& u_coeffs) const {
  const int nq = grid_.n_nodes();
  const int p = static_cast<int>(u_coeffs.cols());
  Eigen::MatrixXd profiles = u_coeffs;
  profiles.row(0).array() += shift_;
  const Eigen::MatrixXd all = grid_.synth_stacked() * profiles;

  Eigen::MatrixXd speed(nq, p);
  const double n = grid_.n();
  for (int c = 0; c < p; ++c) {
    const auto col = all.col(c);
    for (int q = 0; q < nq; ++q) {
      const double st = grid_.sin_theta(q);
      const double ct = grid_.cot_theta(q);
      speed(q, c) = speed_kernel(n, st, ct, col[q], col[nq + q], col[2 * nq + q], col[3 * nq + q],
                                 col[4 * nq + q], col[5 * nq + q])
                        .rescaled;
    }
  }
  Eigen::MatrixXd coeffs =
      grid_.synth_value().transpose() * grid_.area_weights().asDiagonal() * speed;
  coeffs -= lambda_.asDiagonal() * u_coeffs;
  return coeffs;
}

RescaledStepper::Velocity RescaledStepper::velocity(const Eigen::VectorXd& u_coeffs) const {
  Velocity v;
  Eigen::VectorXd nl = nonlinear(u_coeffs, &v.min_r, &v.max_slope);
  v.coeffs = nl + lambda_.cwiseProduct(u_coeffs);
  return v;
}

RescaledStepper::StepDiag RescaledStepper::step(SpectralField& u) const {
  StepDiag d;
  const Eigen::VectorXd n0 = nonlinear(u.c, nullptr, nullptr);
  const Eigen::VectorXd a = exp_dt_.cwiseProduct(u.c) + phi1_dt_.cwiseProduct(n0);
  const Eigen::VectorXd n1 = nonlinear(a, &d.min_r, &d.max_slope);
  u.c = a + phi2_dt_.cwiseProduct(n1 - n0);
  if (sym_) sym_->apply(u);
  return d;
}

void RescaledStepper::step_states(Eigen::MatrixXd& states) const {
  const Eigen::MatrixXd n0 = nonlinear_block(states);
  const Eigen::MatrixXd a = exp_dt_.asDiagonal() * states + phi1_dt_.asDiagonal() * n0;
  const Eigen::MatrixXd n1 = nonlinear_block(a);
  states = a + phi2_dt_.asDiagonal() * (n1 - n0);
  if (sym_) states = sym_->matrix() * states;
}

FlowTrajectory evolve_rescaled(const SphereGrid& grid, const SpectralField& u0,
                               const EvolveControls& controls) {
  const RescaledStepper stepper(grid, controls.dt, controls.symmetry);
  const double R = sphere_radius(grid.n());

  FlowTrajectory traj;
  traj.clock = FlowClock::Rescaled;
  traj.n = grid.n();
  traj.k_max = grid.k_max();
  traj.dt = controls.dt;
  traj.snapshot_every = controls.snapshot_every;
  traj.symmetry = controls.symmetry;

  const int snap_stride =
      std::max(1, static_cast<int>(std::lround(controls.snapshot_every / controls.dt)));
  const long n_steps = std::lround(controls.horizon / controls.dt);

  SpectralField u = u0;
  const auto push = [&](double t) {
    Snapshot s;
    s.time = t;
    s.profile = RadialGraph::from_graph_function(grid, u, R).profile;
    traj.snapshots.push_back(std::move(s));
  };
  push(0.0);

  for (long i = 1; i <= n_steps; ++i) {
    const SpectralField prev = u;
    const RescaledStepper::StepDiag diag = stepper.step(u);
    if (!(diag.min_r > controls.min_radius) || !(diag.max_slope < controls.slope_limit) ||
        !u.c.allFinite()) {
      u = prev;  // keep the last valid state
      traj.stop = StopInfo{"graph invariants failed (slope or radius)", (i - 1) * controls.dt};
      if (std::abs(traj.snapshots.back().time - (i - 1) * controls.dt) > controls.dt / 2)
        push((i - 1) * controls.dt);
      return traj;
    }
    if (i % snap_stride == 0) push(i * controls.dt);
  }
  if (std::abs(traj.snapshots.back().time - n_steps * controls.dt) > controls.dt / 2)
    push(n_steps * controls.dt);
  return traj;
}

// ---------------------------------------------------------------------------
// Unrescaled flow

namespace {

// One ETDRK2 step of dr/dtau = -W H with the linear part frozen at the current
// mean radius: rate (n - k(k+n-1))/mean_r^2 per degree.
class McfStepper {
 public:
  explicit McfStepper(const SphereGrid& grid) : grid_(grid) {
    rate_unit_.resize(grid.n_coeff());
    for (int k = 0; k <= grid.k_max(); ++k)
      for (int m = -k; m <= k; ++m)
        rate_unit_[coeff_index(k, m)] =
            grid.n() - static_cast<double>(k) * (k + grid.n() - 1);
  }

  struct Eval {
    Eigen::VectorXd speed_coeffs;
    double min_r = 0.0;
    double max_slope = 0.0;
  };

  Eval eval_speed(const Eigen::VectorXd& profile) const {
    const int nq = grid_.n_nodes();
    const Eigen::VectorXd all = grid_.synth_stacked() * profile;
    Eigen::VectorXd speed(nq);
    double mr = std::numeric_limits<double>::infinity();
    double ms = 0.0;
    for (int q = 0; q < nq; ++q) {
      const double st = grid_.sin_theta(q);
      const double ct = grid_.cot_theta(q);
      const SpeedSample s =
          speed_kernel(grid_.n(), st, ct, all[q], all[nq + q], all[2 * nq + q], all[3 * nq + q],
                       all[4 * nq + q], all[5 * nq + q]);
      speed[q] = s.unrescaled;
      mr = std::min(mr, all[q]);
      ms = std::max(ms, s.slope);
    }
    Eval e;
    e.speed_coeffs = grid_.synth_value().transpose() * grid_.area_weights().cwiseProduct(speed);
    e.min_r = mr;
    e.max_slope = ms;
    return e;
  }

  Eval step(Eigen::VectorXd& profile, double dt) const {
    const double mean_r = profile[0] / std::sqrt(16.0 * std::numbers::pi);
    const Eigen::VectorXd rate = rate_unit_ / (mean_r * mean_r);

    const Eval e0 = eval_speed(profile);
    const Eigen::VectorXd n0 = e0.speed_coeffs - rate.cwiseProduct(profile);
    Eigen::VectorXd a(profile.size());
    Eigen::VectorXd phi2v(profile.size());
    for (int i = 0; i < profile.size(); ++i) {
      const double z = dt * rate[i];
      a[i] = std::exp(z) * profile[i] + dt * phi1(z) * n0[i];
      phi2v[i] = dt * phi2(z);
    }
    const Eval e1 = eval_speed(a);
    const Eigen::VectorXd n1 = e1.speed_coeffs - rate.cwiseProduct(a);
    profile = a + phi2v.cwiseProduct(n1 - n0);
    return eval_speed(profile);
  }

 private:
  const SphereGrid& grid_;
  Eigen::VectorXd rate_unit_;
};

}  // namespace

Eigen::Vector3d surface_barycenter(const SphereGrid& grid, const Snapshot& snap) {
  const NodeGeometry ng = node_geometry(grid, snap.profile.c);
  Eigen::Vector3d num = Eigen::Vector3d::Zero();
  double den = 0.0;
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const double w = grid.unit_weights()[q] * ng.r[q] * ng.r[q] * ng.W[q];
    num += w * (ng.r[q] * grid.direction(q));
    den += w;
  }
  return snap.center + num / den;
}

RadiusStats radius_about(const SphereGrid& grid, const Snapshot& snap, const Eigen::Vector3d& b) {
  const Eigen::VectorXd r = grid.synth_value() * snap.profile.c;
  const Eigen::Vector3d d = b - snap.center;
  RadiusStats st;
  st.min = std::numeric_limits<double>::infinity();
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const double dist = (r[q] * grid.direction(q) - d).norm();
    st.min = std::min(st.min, dist);
    st.max = std::max(st.max, dist);
    st.mean += grid.unit_weights()[q] * dist;
  }
  st.mean /= 4.0 * std::numbers::pi;
  return st;
}

SpectralField regraph_about(const SphereGrid& grid, const SpectralField& profile,
                            const Eigen::Vector3d& shift) {
  if (shift.norm() == 0.0) return profile;
  Eigen::VectorXd values(grid.n_nodes());
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const Eigen::Vector3d dir = grid.direction(q);
    const double guess = std::max(1e-6, evaluate(grid, profile, dir) - shift.dot(dir));
    // Point p = shift + t dir must satisfy |p| = r(dir of p).
    const auto t = resolve_ray(grid, profile, 1.0, -shift, dir, guess);
    if (!t || *t <= 0.0)
      throw GraphInvariantError("regraph_about: surface is not a graph about the new center");
    values[q] = *t;
  }
  return analyze(grid, values);
}

McfResult evolve_mcf(const SphereGrid& grid, const RadialGraph& g0, const Eigen::Vector3d& center0,
                     const McfControls& controls) {
  const McfStepper stepper(grid);
  validate_graph(grid, g0, controls.slope_limit, 0.0);

  FlowTrajectory traj;
  traj.clock = FlowClock::Unrescaled;
  traj.n = grid.n();
  traj.k_max = grid.k_max();
  traj.dt = controls.dt;
  traj.snapshot_every = controls.snapshot_every;

  Eigen::VectorXd profile = g0.profile.c;
  Eigen::Vector3d center = center0;
  double tau = 0.0;
  double mean_r_prev = profile[0] / std::sqrt(16.0 * std::numbers::pi);
  int expanding_steps = 0;

  const auto make_snapshot = [&]() {
    Snapshot s;
    s.time = tau;
    s.center = center;
    s.profile = SpectralField(grid.n(), grid.k_max());
    s.profile.c = profile;
    return s;
  };
  traj.snapshots.push_back(make_snapshot());
  double next_snap = controls.snapshot_every;

  McfResult out;
  out.stop_inradius = controls.stop_inradius;

  long step_count = 0;
  while (tau < controls.max_time) {
    // Remaining-time estimate from the current mean radius drives the step size.
    const double mean_r = profile[0] / std::sqrt(16.0 * std::numbers::pi);
    const double remaining = mean_r * mean_r / (2.0 * grid.n());
    const double dt = std::min(controls.dt, std::max(1e-9, controls.adaptive_frac * remaining));

    const McfStepper::Eval diag = stepper.step(profile, dt);
    tau += dt;
    ++step_count;

    if (!profile.allFinite() || !(diag.min_r > 0.0)) {
      traj.stop = StopInfo{"graph lost (radius collapsed)", tau};
      break;
    }
    if (!(diag.max_slope < controls.slope_limit)) {
      traj.stop = StopInfo{"graph lost (slope bound)", tau};
      break;
    }

    const double mean_now = profile[0] / std::sqrt(16.0 * std::numbers::pi);
    expanding_steps = mean_now > mean_r_prev ? expanding_steps + 1 : 0;
    mean_r_prev = mean_now;
    if (expanding_steps > controls.expanding_limit) {
      traj.stop = StopInfo{"non-shrinking input (outward motion)", tau};
      break;
    }

    // Keep the graph center near the surface barycenter.
    if (controls.recenter_every > 0 && step_count % controls.recenter_every == 0) {
      const Snapshot cur = make_snapshot();
      const Eigen::Vector3d b = surface_barycenter(grid, cur);
      if ((b - center).norm() > controls.recenter_trigger * diag.min_r) {
        profile = regraph_about(grid, cur.profile, b - center).c;
        center = b;
      }
    }

    if (tau >= next_snap - dt / 2) {
      traj.snapshots.push_back(make_snapshot());
      next_snap += controls.snapshot_every;
    }

    if (diag.min_r < controls.stop_inradius) {
      if (traj.snapshots.back().time != tau) traj.snapshots.push_back(make_snapshot());
      traj.stop = StopInfo{"inradius below stop threshold", tau};
      break;
    }
  }
  if (traj.snapshots.back().time != tau) traj.snapshots.push_back(make_snapshot());
  if (!traj.stop && tau >= controls.max_time)
    traj.stop = StopInfo{"max_time reached before extinction threshold", tau};

  const RadiusStats rs =
      radius_about(grid, traj.snapshots.back(), surface_barycenter(grid, traj.snapshots.back()));
  out.window_begin = tau;
  out.window_end = tau + 1.05 * rs.max * rs.max / (2.0 * grid.n());
  out.traj = std::move(traj);
  return out;
}

FlowTrajectory rescale_trajectory(const SphereGrid& grid, const FlowTrajectory& mcf,
                                  const Eigen::Vector3d& x, double T) {
  if (mcf.clock != FlowClock::Unrescaled)
    throw std::invalid_argument("rescale_trajectory: expected an unrescaled trajectory");
  FlowTrajectory out;
  out.clock = FlowClock::Rescaled;
  out.n = mcf.n;
  out.k_max = mcf.k_max;
  out.dt = mcf.dt;
  out.snapshot_every = mcf.snapshot_every;
  for (const auto& s : mcf.snapshots) {
    if (s.time < T - 1.0 - 1e-12 || s.time >= T) continue;
    const double t = -std::log(T - s.time);
    Snapshot r;
    r.time = t;
    r.center = Eigen::Vector3d::Zero();
    // Graph about x of the stored surface, then the parabolic dilation.
    SpectralField about_x = regraph_about(grid, s.profile, x - s.center);
    about_x.c *= std::exp(t / 2.0);
    r.profile = std::move(about_x);
    out.snapshots.push_back(std::move(r));
  }
  if (out.snapshots.empty())
    throw std::invalid_argument("rescale_trajectory: no snapshots in the rescaling window");
  return out;
}

// ---------------------------------------------------------------------------
// Linearized flow

namespace {

// March base + probe directions from traj start to t0, then to t1, invoking the
// recorder at stored snapshot times. Columns of V are direction vectors.
void march_linear(const SphereGrid& grid, const FlowTrajectory& traj, Eigen::MatrixXd& V,
                  double t0, double t1, double probe,
                  const std::function<void(double, const Eigen::MatrixXd&)>& record) {
  if (traj.clock != FlowClock::Rescaled)
    throw std::invalid_argument("linear propagator requires a rescaled trajectory");
  if (!traj.covers(t0) || !traj.covers(t1) || t1 < t0)
    throw std::out_of_range("linear propagator: requested times not covered by the trajectory");

  // A symmetry projector on the base trajectory is a numerical guard, not part
  // of the dynamics; the linearization differentiates the plain step (probe
  // directions may break the symmetry). The re-run base then deviates from a
  // symmetrized trajectory only at roundoff scale.
  const RescaledStepper stepper(grid, traj.dt, SymmetryTag::None);
  const double R = sphere_radius(grid.n());
  SpectralField u = graph_of(traj.snapshots.front(), R);

  const long i0 = std::lround((t0 - traj.t_begin()) / traj.dt);
  const long i1 = std::lround((t1 - traj.t_begin()) / traj.dt);
  for (long i = 0; i < i0; ++i) stepper.step(u);

  const int nc = grid.n_coeff();
  const int p = static_cast<int>(V.cols());
  Eigen::VectorXd scale(p);

  record(t0, V);
  const long snap_stride = std::max(1L, std::lround(traj.snapshot_every / traj.dt));
  Eigen::MatrixXd states(nc, 2 * p + 1);
  for (long i = i0; i < i1; ++i) {
    states.col(0) = u.c;
    for (int j = 0; j < p; ++j) {
      const double s = V.col(j).norm();
      scale[j] = s;
      if (s > 0) {
        states.col(1 + j) = u.c + (probe / s) * V.col(j);
        states.col(1 + p + j) = u.c - (probe / s) * V.col(j);
      } else {
        states.col(1 + j) = u.c;
        states.col(1 + p + j) = u.c;
      }
    }
    stepper.step_states(states);
    u.c = states.col(0);
    for (int j = 0; j < p; ++j)
      V.col(j) = (states.col(1 + j) - states.col(1 + p + j)) * (scale[j] / (2.0 * probe));
    if ((i + 1 - i0) % snap_stride == 0 || i + 1 == i1) record(traj.t_begin() + (i + 1) * traj.dt, V);
  }
}

}  // namespace

LinearFlow linear_propagator(const SphereGrid& grid, const FlowTrajectory& traj,
                             const SpectralField& v0, double t0, double t1,
                             const PropagatorOptions& opts) {
  Eigen::MatrixXd V = v0.c;
  LinearFlow out;
  march_linear(grid, traj, V, t0, t1, opts.probe, [&](double t, const Eigen::MatrixXd& cols) {
    SpectralField f(grid.n(), grid.k_max());
    f.c = cols.col(0);
    out.times.push_back(t);
    out.v.push_back(std::move(f));
  });
  return out;
}

Eigen::MatrixXd surface_gram(const SphereGrid& grid, const Eigen::VectorXd& profile_coeffs) {
  // Gaussian-weighted surface pairing e^{-|x|^2/4} dA, normalized so the weight
  // is 1 on the shrinker sphere. The drift operator Lap - <x, grad .>/2 is
  // self-adjoint exactly in this inner product, which is what makes the
  // conjugate-equation adjoint and the matrix transpose agree.
  const NodeGeometry ng = node_geometry(grid, profile_coeffs);
  const double r2_shrinker = 2.0 * grid.n();
  Eigen::VectorXd w = grid.unit_weights();
  for (int q = 0; q < grid.n_nodes(); ++q)
    w[q] *= ng.r[q] * ng.r[q] * ng.W[q] *
            std::exp((r2_shrinker - ng.r[q] * ng.r[q]) / 4.0);
  return grid.synth_value().transpose() * w.asDiagonal() * grid.synth_value();
}

PropagatorMatrix propagator_matrix(const SphereGrid& grid, const FlowTrajectory& traj, double t0,
                                   double t1, const PropagatorOptions& opts) {
  const int nc = grid.n_coeff();
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(nc, nc);
  Eigen::MatrixXd final_cols = V;
  march_linear(grid, traj, V, t0, t1, opts.probe, [&](double t, const Eigen::MatrixXd& cols) {
    if (std::abs(t - t1) <= traj.dt / 2) final_cols = cols;
  });
  PropagatorMatrix P;
  P.t0 = t0;
  P.t1 = t1;
  P.T = final_cols;
  P.gram0 = surface_gram(grid, traj.at_time(t0).profile.c);
  P.gram1 = surface_gram(grid, traj.at_time(t1).profile.c);
  P.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(P.T).singularValues();
  return P;
}

Eigen::VectorXd PropagatorMatrix::apply_adjoint(const Eigen::VectorXd& v) const {
  return Eigen::LLT<Eigen::MatrixXd>(gram0).solve(T.transpose() * (gram1 * v));
}

double duhamel_residual(const PropagatorMatrix& P, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& v) {
  const double lhs = v.dot(P.gram1 * (P.T * u));
  const double rhs = P.apply_adjoint(v).dot(P.gram0 * u);
  return std::abs(lhs - rhs) / std::max(1e-300, std::abs(lhs));
}

SpectralField moving_operator_apply(const SphereGrid& grid, const NodeGeometry& ng,
                                    const SpectralField& f) {
  const int nq = grid.n_nodes();
  const Eigen::VectorXd all = grid.synth_stacked() * f.c;
  const Eigen::VectorXd A2 = second_form_squared(ng);
  Eigen::VectorXd values(nq);
  for (int q = 0; q < nq; ++q) {
    const double st = grid.sin_theta(q);
    const double ct = grid.cot_theta(q);
    const double fv = all[q];
    const double f_t = all[nq + q];
    const double f_p = all[2 * nq + q] / st;
    const double Hf_tt = all[3 * nq + q];
    const double Hf_tp = (all[4 * nq + q] - ct * all[2 * nq + q]) / st;
    const double Hf_pp = all[5 * nq + q] / (st * st) + ct * all[nq + q];

    const double gt = ng.g_t[q], gp = ng.g_p[q];
    const double W = ng.W[q];
    const double r = ng.r[q];
    const double dot = gt * f_t + gp * f_p;  // <grad rho, grad f>
    const double b = dot / W;

    // grad W = Hess(rho) grad(rho)/W; grad<grad rho,grad f> = Hess(rho)grad f + Hess(f)grad rho.
    const double wt = (ng.Hrho_tt[q] * gt + ng.Hrho_tp[q] * gp) / W;
    const double wp = (ng.Hrho_tp[q] * gt + ng.Hrho_pp[q] * gp) / W;
    const double dt_ = ng.Hrho_tt[q] * f_t + ng.Hrho_tp[q] * f_p + Hf_tt * gt + Hf_tp * gp;
    const double dp_ = ng.Hrho_tp[q] * f_t + ng.Hrho_pp[q] * f_p + Hf_tp * gt + Hf_pp * gp;
    const double bt = dt_ / W - dot * wt / (W * W);
    const double bp = dp_ / W - dot * wp / (W * W);

    const double lap_f = Hf_tt + Hf_pp;
    const double lap_rho = ng.Hrho_tt[q] + ng.Hrho_pp[q];
    const double lap_M =
        (W * lap_f + (wt * f_t + wp * f_p) - b * lap_rho - (bt * gt + bp * gp)) / (r * r * W);

    values[q] = lap_M + (A2[q] + 0.5) * fv - 0.5 * dot / (W * W);
  }
  return analyze(grid, values);
}

SpectralField adjoint_pde_backward(const SphereGrid& grid, const FlowTrajectory& traj,
                                   const SpectralField& w1, double t0, double t1) {
  if (traj.clock != FlowClock::Rescaled)
    throw std::invalid_argument("adjoint_pde_backward: expected a rescaled trajectory");
  if (!traj.covers(t0) || !traj.covers(t1) || t1 <= t0)
    throw std::out_of_range("adjoint_pde_backward: times not covered");

  // Recreate the base flow at step resolution over [t0, t1].
  const RescaledStepper stepper(grid, traj.dt, traj.symmetry);
  const double R = sphere_radius(grid.n());
  SpectralField u = graph_of(traj.snapshots.front(), R);
  const long i0 = std::lround((t0 - traj.t_begin()) / traj.dt);
  const long i1 = std::lround((t1 - traj.t_begin()) / traj.dt);
  for (long i = 0; i < i0; ++i) stepper.step(u);
  std::vector<Eigen::VectorXd> base;
  base.reserve(i1 - i0 + 1);
  base.push_back(u.c);
  for (long i = i0; i < i1; ++i) {
    stepper.step(u);
    base.push_back(u.c);
  }

  // Conjugate equation backward in t: with s = t1 - t, dw/ds = L_M w - Htilde^2 w,
  // stepped by ETDRK2 about the sphere operator (diagonal lambda_k).
  const int nc = grid.n_coeff();
  Eigen::VectorXd lambda(nc), exp_dt(nc), phi1_dt(nc), phi2_dt(nc);
  for (int k = 0; k <= grid.k_max(); ++k)
    for (int m = -k; m <= k; ++m) {
      const int i = coeff_index(k, m);
      lambda[i] = eigenvalue(k, grid.n());
      exp_dt[i] = std::exp(traj.dt * lambda[i]);
      phi1_dt[i] = traj.dt * phi1(traj.dt * lambda[i]);
      phi2_dt[i] = traj.dt * phi2(traj.dt * lambda[i]);
    }

  const double shift = SpectralField::constant(grid.n(), grid.k_max(), R).c[0];
  std::vector<NodeGeometry> geo(base.size());
  std::vector<char> have(base.size(), 0);
  const auto geometry_at = [&](size_t idx) -> const NodeGeometry& {
    if (!have[idx]) {
      Eigen::VectorXd profile = base[idx];
      profile[0] += shift;
      geo[idx] = node_geometry(grid, profile);
      have[idx] = 1;
    }
    return geo[idx];
  };

  const auto conj_rhs = [&](const Eigen::VectorXd& w, size_t idx) {
    const NodeGeometry& ng = geometry_at(idx);
    SpectralField f(grid.n(), grid.k_max());
    f.c = w;
    const SpectralField lm = moving_operator_apply(grid, ng, f);
    const Eigen::VectorXd wv = grid.synth_value() * w;
    Eigen::VectorXd corr(grid.n_nodes());
    for (int q = 0; q < grid.n_nodes(); ++q) corr[q] = ng.phi[q] * ng.phi[q] * wv[q];
    return Eigen::VectorXd(lm.c - analyze(grid, corr).c);
  };

  Eigen::VectorXd w = w1.c;
  const long nsteps = i1 - i0;
  for (long i = 0; i < nsteps; ++i) {
    const size_t idx_here = base.size() - 1 - i;
    const Eigen::VectorXd n0 = conj_rhs(w, idx_here) - lambda.cwiseProduct(w);
    const Eigen::VectorXd a = exp_dt.cwiseProduct(w) + phi1_dt.cwiseProduct(n0);
    const Eigen::VectorXd n1 = conj_rhs(a, idx_here - 1) - lambda.cwiseProduct(a);
    w = a + phi2_dt.cwiseProduct(n1 - n0);
  }
  SpectralField out(grid.n(), grid.k_max());
  out.c = w;
  return out;
}

}  // namespace sphereflow
