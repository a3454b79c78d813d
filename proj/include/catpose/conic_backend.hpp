#pragma once

#include <string>

#include <Eigen/Core>

#include "catpose/optimal_solver.hpp"

namespace catpose {

enum class SdpStatus { optimal, near_optimal, failed };

std::string to_string(SdpStatus status);

struct SdpSolution {
  Matrix10d X = Matrix10d::Zero();
  double f_sdp = 0.0;
  double dual_objective = 0.0;
  SdpStatus status = SdpStatus::failed;
  double max_eig_ratio = 0.0;
  double primal_residual = 0.0;  // max_i |trace(A_i X) - b_i|
  int iterations = 0;
};

/// Solver for the 10x10 Shor relaxation min trace(Q X) s.t. trace(A_0 X) = 1,
/// trace(A_i X) = 0, X PSD.
class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  virtual SdpSolution solve(const RotationQCQP& qcqp) const = 0;
};

struct InteriorPointParams {
  int max_iterations = 100;
  double tolerance = 1e-12;       // relative gap and scaled infeasibilities
  double near_tolerance = 1e-7;   // accepted as near_optimal on stagnation
  double step_fraction = 0.98;
};

/// Infeasible primal-dual path-following method (HKM direction, Mehrotra
/// predictor-corrector). Dense: the problem has 55 unknowns and 16 constraints.
class InteriorPointSdp final : public SdpBackend {
 public:
  InteriorPointSdp() = default;
  explicit InteriorPointSdp(InteriorPointParams params) : params_(params) {}
  SdpSolution solve(const RotationQCQP& qcqp) const override;

 private:
  InteriorPointParams params_;
};

const SdpBackend& default_sdp_backend();

/// Throws SolverError when the backend reports failure.
SdpSolution solve_rotation_sdp(const RotationQCQP& qcqp, const SdpBackend& backend = default_sdp_backend());

/// Leading eigenvector, normalized so v[0] = 1, reshaped and projected to SO(3).
/// Throws SolverError when v[0] is numerically zero.
Eigen::Matrix3d round_rotation(const Matrix10d& X);
inline Eigen::Matrix3d round_rotation(const SdpSolution& sol) { return round_rotation(sol.X); }

/// (f_est - f_sdp) / f_est; 0 when f_est <= kDegenerateCost.
double duality_gap(double f_sdp, double f_est);

inline constexpr double kDegenerateCost = 1e-12;
inline constexpr double kRankOneRatio = 1e5;

}  // namespace catpose
