// Time integration of the rescaled flow (graph functions u over the shrinker
// sphere, dr/dt = r/2 - W H) and the unrescaled flow (profiles about a moving
// center, dr/dtau = -W H), both with ETDRK2 exponential stepping: the diagonal
// linear part is advanced exactly, the nonlinear remainder goes through the
// two-stage exponential rule, and every pointwise product is analyzed on the
// oversized grid (dealiasing).
//
// The linearized flow is differentiated numerically from the nonlinear step
// (central differences), which keeps the propagator consistent with the
// dynamics by construction. Its matrix form supports the weighted-transpose
// adjoint (discrete Duhamel identity, exact) and an independent PDE backward
// integration of the conjugate equation as a cross-check.
#pragma once

#include "sphereflow/geometry.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sphereflow {

enum class FlowClock { Rescaled, Unrescaled };
enum class SymmetryTag { None, Tetrahedral };

struct Snapshot {
  double time = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // ambient center of the graph
  SpectralField profile;                             // r(omega) about the center
};

struct StopInfo {
  std::string reason;
  double time = 0.0;
};

struct FlowTrajectory {
  FlowClock clock = FlowClock::Rescaled;
  int n = 2;
  int k_max = 0;
  double dt = 0.0;
  double snapshot_every = 0.0;
  SymmetryTag symmetry = SymmetryTag::None;
  std::vector<Snapshot> snapshots;
  std::optional<StopInfo> stop;

  double t_begin() const { return snapshots.front().time; }
  double t_end() const { return snapshots.back().time; }
  // Snapshot at the given time (within dt/2); throws on a trajectory gap.
  const Snapshot& at_time(double t) const;
  bool covers(double t) const;
};

// ---------------------------------------------------------------------------
// Rescaled flow

struct EvolveControls {
  double dt = 1e-3;
  double horizon = 5.0;
  double snapshot_every = 0.05;
  double slope_limit = 10.0;
  double min_radius = 1e-3;
  SymmetryTag symmetry = SymmetryTag::None;
};

class RescaledStepper {
 public:
  RescaledStepper(const SphereGrid& grid, double dt, SymmetryTag symmetry = SymmetryTag::None);

  // One ETDRK2 step of the graph function u (r = sqrt(2n) + u). The returned
  // diagnostics come from the second stage evaluation (cheap blow-up guard).
  struct StepDiag {
    double min_r = 0.0;
    double max_slope = 0.0;
  };
  StepDiag step(SpectralField& u) const;
  // Same step applied to each column of a bundle of graph functions.
  void step_states(Eigen::MatrixXd& states) const;

  // dr/dt values at the nodes plus graph diagnostics.
  struct Velocity {
    Eigen::VectorXd coeffs;
    double min_r = 0.0;
    double max_slope = 0.0;
  };
  Velocity velocity(const Eigen::VectorXd& u_coeffs) const;

  const SphereGrid& grid() const { return grid_; }
  double dt() const { return dt_; }
  double shrinker_coeff() const { return shift_; }

 private:
  Eigen::VectorXd nonlinear(const Eigen::VectorXd& u_coeffs, double* min_r,
                            double* max_slope) const;
  Eigen::MatrixXd nonlinear_block(const Eigen::MatrixXd& u_coeffs) const;

  const SphereGrid& grid_;
  double dt_;
  double shift_;  // coefficient of the constant mode for the shrinker radius
  Eigen::VectorXd lambda_, exp_dt_, phi1_dt_, phi2_dt_;
  std::optional<SymmetryProjector> sym_;
};

FlowTrajectory evolve_rescaled(const SphereGrid& grid, const SpectralField& u0,
                               const EvolveControls& controls);

// Graph functions u(t) = r(t) - sqrt(2n) of a rescaled trajectory.
SpectralField graph_of(const Snapshot& snap, double base_radius);

// ---------------------------------------------------------------------------
// Unrescaled flow

struct McfControls {
  double dt = 2e-4;
  double stop_inradius = 0.1;
  double snapshot_every = 2e-3;
  double slope_limit = 10.0;
  double adaptive_frac = 0.05;  // dt <= frac * estimated remaining time
  int recenter_every = 20;
  double recenter_trigger = 0.01;  // re-graph when |barycenter-center| > trigger*inradius
  double max_time = 10.0;
  int expanding_limit = 200;  // consecutive mean-radius increases before "non-shrinking"
};

struct McfResult {
  FlowTrajectory traj;
  double stop_inradius = 0.0;
  // Bracket for the vanishing time implied by the final snapshot.
  double window_begin = 0.0;
  double window_end = 0.0;
};

McfResult evolve_mcf(const SphereGrid& grid, const RadialGraph& g0,
                     const Eigen::Vector3d& center0, const McfControls& controls);

// Surface barycenter (area-weighted) of a snapshot.
Eigen::Vector3d surface_barycenter(const SphereGrid& grid, const Snapshot& snap);
// Min/mean distance from the surface to a point (radius statistics about b).
struct RadiusStats {
  double min = 0, mean = 0, max = 0;
};
RadiusStats radius_about(const SphereGrid& grid, const Snapshot& snap, const Eigen::Vector3d& b);

// Profile of the same surface re-graphed about center + shift (exact ray re-solution).
SpectralField regraph_about(const SphereGrid& grid, const SpectralField& profile,
                            const Eigen::Vector3d& shift);

// Rescaled view of an unrescaled trajectory about the spacetime point (x, T):
// t = -log(T - tau), profile e^{t/2}(surface - x). Snapshots with tau >= T - 1.
FlowTrajectory rescale_trajectory(const SphereGrid& grid, const FlowTrajectory& mcf,
                                  const Eigen::Vector3d& x, double T);

// ---------------------------------------------------------------------------
// Linearized flow

struct PropagatorOptions {
  double probe = 3e-5;  // central-difference step on unit directions
};

// v(t) at the trajectory's snapshot times in [t0, t1], differentiating the
// nonlinear step along the stored base flow. Linear in v0 by construction.
struct LinearFlow {
  std::vector<double> times;
  std::vector<SpectralField> v;
};
LinearFlow linear_propagator(const SphereGrid& grid, const FlowTrajectory& traj,
                             const SpectralField& v0, double t0, double t1,
                             const PropagatorOptions& opts = {});

struct PropagatorMatrix {
  double t0 = 0, t1 = 0;
  Eigen::MatrixXd T;        // coefficient-basis propagator
  Eigen::MatrixXd gram0;    // L^2(M_{t0}) Gram matrix on coefficients
  Eigen::MatrixXd gram1;    // L^2(M_{t1})
  Eigen::VectorXd singular_values;

  // Weighted transpose: <v, T u>_{L2(M_t1)} = <adjoint(v), u>_{L2(M_t0)} exactly.
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& v) const;
};

PropagatorMatrix propagator_matrix(const SphereGrid& grid, const FlowTrajectory& traj, double t0,
                                   double t1, const PropagatorOptions& opts = {});

// L^2(M) Gram matrix of coefficient vectors for the surface r = profile.
Eigen::MatrixXd surface_gram(const SphereGrid& grid, const Eigen::VectorXd& profile_coeffs);

// |<v,Tu>_1 - <T*v,u>_0| / |<v,Tu>_1| for the matrix adjoint.
double duhamel_residual(const PropagatorMatrix& P, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& v);

// Independent cross-check: backward integration of the conjugate equation
// d/dt w = -L_M w + Htilde^2 w along the stored base flow, with the moving-surface
// operator L_M = Lap_M + |A|^2 + 1/2 - (1/2)<x, grad .> evaluated pseudospectrally.
SpectralField adjoint_pde_backward(const SphereGrid& grid, const FlowTrajectory& traj,
                                   const SpectralField& w1, double t0, double t1);

// Pointwise application of L_M - offset used by tests (offset 0 gives L_M f).
SpectralField moving_operator_apply(const SphereGrid& grid, const NodeGeometry& ng,
                                    const SpectralField& f);

}  // namespace sphereflow
