#pragma once

// Reference implementations used only by tests. They avoid the library's
// centering, closed forms and solvers so that agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "catpose/core_model.hpp"

namespace oracle {

/// Full objective accumulated in long double directly from the definition.
inline long double objective(const catpose::KeypointMeasurements& meas,
                             const catpose::ShapeLibrary& lib, const Eigen::Matrix3d& R,
                             const Eigen::Vector3d& t, const Eigen::VectorXd& c, double lambda) {
  long double total = 0.0L;
  for (int i = 0; i < meas.size(); ++i) {
    long double s[3] = {0.0L, 0.0L, 0.0L};
    for (int k = 0; k < lib.num_models(); ++k) {
      for (int a = 0; a < 3; ++a) s[a] += static_cast<long double>(c[k]) * lib.model(k)(a, i);
    }
    for (int a = 0; a < 3; ++a) {
      long double rs = 0.0L;
      for (int b = 0; b < 3; ++b) rs += static_cast<long double>(R(a, b)) * s[b];
      const long double d = static_cast<long double>(meas.points()(a, i)) - rs - t[a];
      total += static_cast<long double>(meas.weights()[i]) * d * d;
    }
  }
  long double reg = 0.0L;
  for (int k = 0; k < c.size(); ++k) reg += static_cast<long double>(c[k]) * c[k];
  return total + static_cast<long double>(lambda) * reg;
}

struct ShapeTranslation {
  Eigen::VectorXd c;
  Eigen::Vector3d t;
  double multiplier = 0.0;
};

/// For fixed R, solves the equality-constrained least squares in (c, t) from
/// the uncentered data via one bordered KKT system (full-pivot LU).
inline ShapeTranslation kkt_shape_translation(const catpose::KeypointMeasurements& meas,
                                              const catpose::ShapeLibrary& lib,
                                              const Eigen::Matrix3d& R, double lambda) {
  const int n = meas.size();
  const int K = lib.num_models();
  const int dim = K + 3;
  // Stack sqrt(w_i) [R B_i, I] x = sqrt(w_i) y_i
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * n, dim);
  Eigen::VectorXd rhs(3 * n);
  for (int i = 0; i < n; ++i) {
    const double sw = std::sqrt(meas.weights()[i]);
    for (int k = 0; k < K; ++k) A.block<3, 1>(3 * i, k) = sw * R * lib.model(k).col(i);
    A.block<3, 3>(3 * i, K) = sw * Eigen::Matrix3d::Identity();
    rhs.segment<3>(3 * i) = sw * meas.points().col(i);
  }
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim + 1, dim + 1);
  kkt.topLeftCorner(dim, dim) = 2.0 * A.transpose() * A;
  kkt.topLeftCorner(K, K).diagonal().array() += 2.0 * lambda;
  kkt.block(0, dim, K, 1).setOnes();
  kkt.block(dim, 0, 1, K).setOnes();
  Eigen::VectorXd b(dim + 1);
  b.head(dim) = 2.0 * A.transpose() * rhs;
  b[dim] = 1.0;
  const Eigen::VectorXd x = kkt.fullPivLu().solve(b);
  return {x.head(K), x.segment<3>(K), x[dim]};
}

/// Rotation about a unit axis by angle (radians), via Rodrigues.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d u = axis.normalized();
  Eigen::Matrix3d k;
  k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::Vector3d axis(nd(rng), nd(rng), nd(rng));
  std::uniform_real_distribution<double> angle(0.0, M_PI);
  return rodrigues(axis, angle(rng));
}

/// Minimum over a regular grid of the simplex (step h) of ||sum_k c_k p_k||.
/// Supports K <= 4.
inline double simplex_grid_min_norm(const Eigen::Matrix3Xd& p, double h) {
  const int K = static_cast<int>(p.cols());
  const int steps = static_cast<int>(std::lround(1.0 / h));
  double best = std::numeric_limits<double>::infinity();
  if (K == 1) return p.col(0).norm();
  const Eigen::Vector3d last = p.col(K - 1);
  Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
  for (int k = 0; k + 1 < K; ++k) d.col(k) = p.col(k) - last;
  const int amax = steps;
  const int bmax = K >= 3 ? steps : 0;
  const int cmax = K >= 4 ? steps : 0;
  for (int a = 0; a <= amax; ++a) {
    for (int b = 0; b <= bmax && a + b <= steps; ++b) {
      const Eigen::Vector3d base = last + (a * h) * d.col(0) + (b * h) * d.col(1);
      for (int c = 0; c <= cmax && a + b + c <= steps; ++c) {
        best = std::min(best, (base + (c * h) * d.col(2)).squaredNorm());
      }
    }
  }
  return std::sqrt(best);
}

/// Exhaustive maximum clique for n <= 22 by subset dynamic programming.
/// Returns the lexicographically smallest sorted index set among maximum cliques.
inline std::vector<int> brute_force_max_clique(const std::vector<std::uint32_t>& adj_masks) {
  const int n = static_cast<int>(adj_masks.size());
  const std::uint32_t total = 1u << n;
  std::vector<std::uint8_t> is_clique(total, 0);
  is_clique[0] = 1;
  int best_size = 0;
  std::vector<int> best;
  for (std::uint32_t mask = 1; mask < total; ++mask) {
    const int low = __builtin_ctz(mask);
    const std::uint32_t rest = mask & (mask - 1);
    is_clique[mask] = is_clique[rest] && (adj_masks[low] & rest) == rest;
    if (!is_clique[mask]) continue;
    const int size = __builtin_popcount(mask);
    if (size < best_size) continue;
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1u) members.push_back(i);
    }
    if (size > best_size || members < best) {
      best_size = size;
      best = std::move(members);
    }
  }
  return best;
}

}  // namespace oracle
