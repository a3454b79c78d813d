#include "catpose/robust_pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "catpose/error.hpp"
#include "catpose/so3.hpp"

namespace catpose {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::VectorXd squared_residuals(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                                  const Estimate& est) {
  return residuals(meas, lib, est.pose, est.shape).array().square();
}

int count_positive(const Eigen::VectorXd& v) { return static_cast<int>((v.array() > 0.0).count()); }

std::vector<bool> mask_from(const Eigen::VectorXd& omega, const Eigen::VectorXd& base) {
  std::vector<bool> mask(omega.size());
  for (Eigen::Index i = 0; i < omega.size(); ++i) mask[i] = base[i] > 0.0 && omega[i] >= 0.5;
  return mask;
}

int count_true(const std::vector<bool>& mask) {
  int n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

void require_observable(const KeypointMeasurements& meas) {
  if (meas.num_active() < kMinInliers) {
    throw SolverError("need at least 3 keypoints with positive weight");
  }
}

}  // namespace

Eigen::VectorXd gnc_tls_weights(const Eigen::VectorXd& residuals_sq, double epsilon_bar, double mu) {
  const double eps_sq = epsilon_bar * epsilon_bar;
  const double upper = (mu + 1.0) / mu * eps_sq;
  const double lower = mu / (mu + 1.0) * eps_sq;
  Eigen::VectorXd w(residuals_sq.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double r2 = residuals_sq[i];
    if (r2 >= upper) {
      w[i] = 0.0;
    } else if (r2 <= lower) {
      w[i] = 1.0;
    } else {
      w[i] = std::clamp(epsilon_bar * std::sqrt(mu * (mu + 1.0) / r2) - mu, 0.0, 1.0);
    }
  }
  return w;
}

Estimate gnc_tls(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
                 const RobustParams& params, GncState* state) {
  if (!(params.epsilon_bar > 0.0) || !(params.mu_update_factor > 1.0)) {
    throw InputError("GNC needs epsilon_bar > 0 and mu_update_factor > 1");
  }
  require_observable(meas);
  const auto start = Clock::now();
  const Eigen::VectorXd base = meas.weights();
  const Eigen::ArrayXd active = (base.array() > 0.0).cast<double>();
  const double eps_sq = params.epsilon_bar * params.epsilon_bar;

  Eigen::VectorXd omega = active.matrix();
  Estimate est = pace_star(meas, lib, lambda);
  double mu = 0.0;
  double prev_cost = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  int iter = 0;
  GncState local;
  GncState& trace = state != nullptr ? *state : local;
  trace = GncState{};

  for (; iter < params.max_iterations; ++iter) {
    const Eigen::VectorXd r2 = squared_residuals(meas, lib, est);
    if (iter == 0) {
      const double r_max_sq = (r2.array() * active).maxCoeff();
      const double denom = 2.0 * r_max_sq - eps_sq;
      if (denom <= 0.0) {
        // every residual is already inside the convex region of the surrogate
        break;
      }
      mu = std::max(eps_sq / denom, 1e-6);
    }
    const Eigen::VectorXd next =
        (gnc_tls_weights(r2, params.epsilon_bar, mu).array() * active).matrix();
    const double cost = (base.array() * omega.array() * r2.array()).sum();
    trace.cost_history.push_back(cost);
    trace.mu_history.push_back(mu);
    trace.omega_history.push_back(next);

    if (count_positive(next) < kMinInliers) {
      degenerate = true;
      ++iter;
      break;
    }
    const double change = (next - omega).cwiseAbs().maxCoeff();
    omega = next;
    est = pace_star(meas.with_weights((base.array() * omega.array()).matrix()), lib, lambda);
    mu *= params.mu_update_factor;

    if (std::abs(cost - prev_cost) < params.cost_tolerance * std::max(1.0, cost) ||
        change < 1e-12 || mu >= params.mu_max) {
      ++iter;
      break;
    }
    prev_cost = cost;
  }

  trace.omega = omega;
  trace.mu = mu;
  trace.iteration = iter;
  est.inlier_mask = mask_from(omega, base);
  est.degenerate = degenerate || count_true(est.inlier_mask) < kMinInliers;
  est.iterations = iter;
  est.solve_time = seconds_since(start);
  est.timing.robust_s = est.solve_time;
  est.timing.total_s = est.solve_time;
  return est;
}

Estimate irls(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
              IrlsLoss loss, const RobustParams& params) {
  if (!(params.epsilon_bar > 0.0)) throw InputError("IRLS needs epsilon_bar > 0");
  require_observable(meas);
  const auto start = Clock::now();
  const Eigen::VectorXd base = meas.weights();
  const Eigen::ArrayXd active = (base.array() > 0.0).cast<double>();
  const double eps_sq = params.epsilon_bar * params.epsilon_bar;

  Eigen::VectorXd omega = active.matrix();
  Estimate est = pace_star(meas, lib, lambda);
  double prev_cost = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  int iter = 0;
  for (; iter < params.max_iterations; ++iter) {
    const Eigen::ArrayXd r2 = squared_residuals(meas, lib, est).array();
    Eigen::ArrayXd next;
    double cost = 0.0;
    if (loss == IrlsLoss::GM) {
      next = (eps_sq / (eps_sq + r2)).square();
      cost = (active * eps_sq * r2 / (eps_sq + r2)).sum();
    } else {
      next = (r2 <= eps_sq).cast<double>();
      cost = (active * r2.min(eps_sq)).sum();
    }
    next *= active;
    if (count_positive(next.matrix()) < kMinInliers) {
      degenerate = true;
      ++iter;
      break;
    }
    const double change = (next.matrix() - omega).cwiseAbs().maxCoeff();
    if (change < 1e-12 || std::abs(cost - prev_cost) < params.cost_tolerance * std::max(1.0, cost)) {
      ++iter;
      break;
    }
    omega = next.matrix();
    est = pace_star(meas.with_weights((base.array() * omega.array()).matrix()), lib, lambda);
    prev_cost = cost;
  }

  est.inlier_mask = mask_from(omega, base);
  est.degenerate = degenerate || count_true(est.inlier_mask) < kMinInliers;
  est.iterations = iter;
  est.solve_time = seconds_since(start);
  est.timing.robust_s = est.solve_time;
  est.timing.total_s = est.solve_time;
  return est;
}

Eigen::Matrix3d wahba_svd(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b,
                          const Eigen::VectorXd& weights) {
  if (a.cols() != b.cols() || a.cols() != weights.size()) {
    throw InputError("wahba_svd: mismatched pair counts");
  }
  const Eigen::Matrix3d corr = a * weights.asDiagonal() * b.transpose();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(corr).singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw SolverError("wahba_svd: degenerate correlation matrix (rank < 2)");
  }
  return project_to_so3(corr);
}

Estimate alternating_minimization(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                                  double lambda, const AlternParams& params,
                                  std::vector<double>* cost_history) {
  const auto start = Clock::now();
  const CenteredData centered = center_and_weight(meas, lib);
  const ShapeCache cache = build_shape_cache(centered, lambda);
  const int n = centered.num_keypoints();

  Eigen::Matrix3d rotation = params.init_rotation;
  ShapeCoefficients c = params.init_shape.value_or(ShapeCoefficients::Zero(lib.num_models()));
  // stopping reference only; the initial guess may be infeasible
  double prev = centered_objective(centered, rotation, c, lambda);
  int iter = 0;
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
  while (iter < params.max_iterations) {
    ++iter;
    c = solve_shape(rotation, centered, cache);
    const Eigen::VectorXd s_bar = centered.B_bar * c;
    const Eigen::Map<const Eigen::Matrix3Xd> shape(s_bar.data(), 3, n);
    try {
      rotation = wahba_svd(centered.y_matrix(), shape, unit);
    } catch (const SolverError&) {
      break;  // collapsed shape; keep the last rotation
    }
    const double f = centered_objective(centered, rotation, c, lambda);
    if (cost_history != nullptr) cost_history->push_back(f);
    if (std::abs(f - prev) < params.tolerance) break;
    prev = f;
  }

  Estimate est;
  est.pose.rotation = rotation;
  est.shape = c;
  est.pose.translation = solve_translation(rotation, c, centered.y_w, centered.b_w);
  est.inlier_mask.resize(meas.size());
  for (int i = 0; i < meas.size(); ++i) est.inlier_mask[i] = meas.weights()[i] > 0.0;
  est.iterations = iter;
  est.solve_time = seconds_since(start);
  est.timing.total_s = est.solve_time;
  return est;
}

namespace {

struct PruneOutcome {
  KeypointMeasurements pruned;
  CliqueResult clique;
  double prune_ms = 0.0;
};

PruneOutcome prune(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                   const PruneParams& params, const CliqueOptions& options,
                   const PairwiseBounds* bounds) {
  check_compatible(meas, lib);
  const auto start = Clock::now();
  PairwiseBounds computed;
  if (bounds == nullptr) {
    computed = pairwise_bounds(lib);
    bounds = &computed;
  }
  const CompatibilityGraph graph = compatibility_graph(meas, *bounds, params);
  CliqueResult clique = maximum_clique(graph, options);
  const double ms = 1e3 * seconds_since(start);
  if (static_cast<int>(clique.members.size()) < kMinInliers) {
    throw SolverError("degenerate instance: maximum clique has fewer than 3 keypoints");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(meas.size());
  for (int i : clique.members) w[i] = meas.weights()[i];
  return {meas.with_weights(std::move(w)), std::move(clique), ms};
}

}  // namespace

Estimate clique_pace_star(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                          double lambda, const PruneParams& prune_params,
                          const CliqueOptions& clique, const PairwiseBounds* bounds) {
  const auto start = Clock::now();
  PruneOutcome pruned = prune(meas, lib, prune_params, clique, bounds);
  Estimate est = pace_star(pruned.pruned, lib, lambda);
  est.clique = pruned.clique.members;
  est.clique_exact = pruned.clique.exact;
  est.timing.prune_ms = pruned.prune_ms;
  est.solve_time = seconds_since(start);
  est.timing.total_s = est.solve_time;
  return est;
}

Estimate pace_hash(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
                   const PaceHashParams& params, const PairwiseBounds* bounds) {
  const auto start = Clock::now();
  PruneOutcome pruned = prune(meas, lib, params.prune, params.clique, bounds);
  Estimate est = gnc_tls(pruned.pruned, lib, lambda, params.robust);
  est.clique = pruned.clique.members;
  est.clique_exact = pruned.clique.exact;
  est.timing.prune_ms = pruned.prune_ms;
  est.solve_time = seconds_since(start);
  est.timing.total_s = est.solve_time;
  return est;
}

}  // namespace catpose
