#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "catpose/core_model.hpp"
#include "catpose/optimal_solver.hpp"
#include "catpose/outlier_pruning.hpp"

namespace catpose {

struct RobustParams {
  double epsilon_bar = 0.05;     // TLS truncation threshold (meters)
  double mu_update_factor = 1.4;
  int max_iterations = 100;
  double cost_tolerance = 1e-6;  // relative to max(1, cost)
  double mu_max = 1e6;
};

/// Trace of a GNC run, one entry per outer iteration.
struct GncState {
  Eigen::VectorXd omega;
  double mu = 0.0;
  int iteration = 0;
  std::vector<double> cost_history;
  std::vector<double> mu_history;
  std::vector<Eigen::VectorXd> omega_history;
};

/// GNC-TLS weights for squared residuals at surrogate parameter mu.
Eigen::VectorXd gnc_tls_weights(const Eigen::VectorXd& residuals_sq, double epsilon_bar, double mu);

/// Graduated non-convexity with the truncated least squares loss; every
/// variable update is a pace_star solve with weights w_i * omega_i. Keypoints
/// that already carry zero weight stay excluded.
Estimate gnc_tls(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
                 const RobustParams& params = {}, GncState* state = nullptr);

enum class IrlsLoss { GM, TLS };

/// Fixed-point reweighting without continuation. GM: (eps^2 / (eps^2 + r^2))^2,
/// TLS: 1[r^2 <= eps^2].
Estimate irls(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
              IrlsLoss loss, const RobustParams& params = {});

struct AlternParams {
  Eigen::Matrix3d init_rotation = Eigen::Matrix3d::Identity();
  std::optional<ShapeCoefficients> init_shape;  // zero vector when unset
  int max_iterations = 1000;
  double tolerance = 1e-10;
};

/// Alternates closed-form shape and Wahba rotation steps. Local method, no
/// certificate. cost_history (optional) receives f after every full
/// shape-then-rotation sweep; the initial guess is not recorded because a zero
/// shape vector is infeasible.
Estimate alternating_minimization(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                                  double lambda, const AlternParams& params = {},
                                  std::vector<double>* cost_history = nullptr);

/// argmin_R sum_i w_i ||a_i - R b_i||^2 over SO(3). Throws SolverError when the
/// correlation matrix has rank < 2.
Eigen::Matrix3d wahba_svd(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b,
                          const Eigen::VectorXd& weights);

struct PaceHashParams {
  RobustParams robust;
  PruneParams prune;
  CliqueOptions clique;
};

inline PaceHashParams make_pace_hash_params(double epsilon) {
  PaceHashParams p;
  p.robust.epsilon_bar = epsilon;
  p.prune.epsilon = epsilon;
  return p;
}

/// Maximum-clique pruning followed by a single pace_star solve on the clique.
/// `bounds` may be precomputed; otherwise they are derived from the library.
Estimate clique_pace_star(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                          double lambda, const PruneParams& prune,
                          const CliqueOptions& clique = {},
                          const PairwiseBounds* bounds = nullptr);

/// Maximum-clique pruning, then gnc_tls on the clique (non-clique keypoints
/// are removed permanently).
Estimate pace_hash(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
                   const PaceHashParams& params, const PairwiseBounds* bounds = nullptr);

/// Minimum number of keypoints for an observable rotation.
inline constexpr int kMinInliers = 3;

}  // namespace catpose
