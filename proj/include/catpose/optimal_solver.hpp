#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "catpose/core_model.hpp"

namespace catpose {

class SdpBackend;

/// Closed-form shape solution data for one (library, weights, lambda) triple.
/// H_bar = 2 (B_bar^T B_bar + lambda I), G and g from the bordered KKT inverse.
struct ShapeCache {
  Eigen::MatrixXd H_bar;
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  double lambda = 0.0;
};

using Matrix10d = Eigen::Matrix<double, 10, 10>;
using Vector10d = Eigen::Matrix<double, 10, 1>;

/// Rotation-only problem min r~^T Q r~ s.t. r~^T A_i r~ = 0 (i >= 1), r~^T A_0 r~ = 1,
/// with r~ = [1, vec(R)].
struct RotationQCQP {
  Matrix10d Q;
  Eigen::MatrixXd M;
  Eigen::VectorXd h;
  Eigen::MatrixXd L;  // [h, M W], so that Q = L^T L and the cost is ||L r~||^2
  const std::array<Matrix10d, 16>* A = nullptr;
};

struct Certificate {
  double f_sdp = 0.0;
  double f_est = 0.0;
  double eta = 0.0;  // relative duality gap
  bool is_optimal = false;
  bool degenerate_cost = false;  // f_est ~ 0, eta reported as 0
  double max_eig_ratio = 0.0;    // lambda_1 / lambda_2 of the SDP solution
  bool rank_one = false;
  std::string sdp_status;
};

struct Timing {
  double prune_ms = 0.0;
  double robust_s = 0.0;
  double total_s = 0.0;
};

struct Estimate {
  Pose pose;
  ShapeCoefficients shape;
  std::optional<Certificate> certificate;
  std::vector<bool> inlier_mask;
  int iterations = 0;
  double solve_time = 0.0;  // seconds
  bool degenerate = false;
  std::optional<std::vector<int>> clique;
  bool clique_exact = true;
  Timing timing;
};

/// t* = y_w - R sum_k c_k b_{k,w}.
Eigen::Vector3d solve_translation(const Eigen::Matrix3d& rotation, const ShapeCoefficients& c,
                                  const Eigen::Vector3d& y_w, const Eigen::Matrix3Xd& b_w);

/// Throws SolverError when H_bar is not positive definite (lambda = 0 with a
/// rank-deficient B_bar) and InputError for negative lambda.
ShapeCache build_shape_cache(const CenteredData& centered, double lambda);

/// c*(R) = 2 G B_bar^T (I_N kron R^T) y_bar + g; sums to one.
ShapeCoefficients solve_shape(const Eigen::Matrix3d& rotation, const CenteredData& centered,
                              const ShapeCache& cache);

/// 9x9 permutation with vec(R^T) = P vec(R) (column-major vec).
const Eigen::Matrix<double, 9, 9>& vec_transpose_permutation();

/// A_0..A_15: A_0 fixes the homogenizing entry, A_1..A_15 describe SO(3).
const std::array<Matrix10d, 16>& so3_constraint_matrices();

/// [1, vec(R)].
Vector10d lift_rotation(const Eigen::Matrix3d& rotation);

RotationQCQP assemble_rotation_qcqp(const CenteredData& centered, const ShapeCache& cache);

/// ||M (I_N kron R^T) y_bar + h||^2, evaluated directly.
double rotation_cost(const RotationQCQP& qcqp, const CenteredData& centered,
                     const Eigen::Matrix3d& rotation);

/// Local Gauss-Newton refinement of a rotation on the residual L r~ (steps
/// are accepted only when the cost decreases).
Eigen::Matrix3d polish_rotation(const RotationQCQP& qcqp, const Eigen::Matrix3d& rotation,
                                int max_iterations = 20);

/// Certifiably optimal outlier-free pose and shape. Rotation from the SDP
/// relaxation, then shape and translation in closed form. backend == nullptr
/// selects the built-in interior-point solver.
Estimate pace_star(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
                   const SdpBackend* backend = nullptr);

/// Optional post-processing: clamp negative entries to zero and renormalize.
ShapeCoefficients clamp_to_simplex(const ShapeCoefficients& c);

/// eta threshold for Certificate::is_optimal.
inline constexpr double kOptimalityGap = 1e-6;

}  // namespace catpose
