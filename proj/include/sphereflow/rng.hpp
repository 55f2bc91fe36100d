// Deterministic random sources for seeded experiments. Gaussian deviates come
// from a hand-rolled Box-Muller on mt19937_64 so that archives replay
// bit-identically regardless of the standard library in use.
#pragma once

#include "sphereflow/harmonics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sphereflow {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa uniform in [0,1).
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Gaussian coefficients on degrees [k_lo, k_hi], damped by (1+k)^{-smoothness}.
inline SpectralField random_field(Rng& rng, int n, int k_max, int k_lo, int k_hi,
                                  double smoothness = 2.0) {
  SpectralField f(n, k_max);
  for (int k = k_lo; k <= std::min(k_hi, k_max); ++k) {
    const double damp = std::pow(1.0 + k, -smoothness);
    for (int m = -k; m <= k; ++m) f.at(k, m) = damp * rng.normal();
  }
  return f;
}

inline Eigen::Vector3d random_unit_vector(Rng& rng) {
  Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-8) v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  // Uniform-ish rotation from a normalized random quaternion.
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  return quat.toRotationMatrix();
}

}  // namespace sphereflow
