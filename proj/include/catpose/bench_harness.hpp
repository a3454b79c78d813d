#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "catpose/core_model.hpp"
#include "catpose/optimal_solver.hpp"
#include "catpose/outlier_pruning.hpp"

namespace catpose {

enum class GenMode { iid_models, mean_plus_variation };

std::string to_string(GenMode mode);
GenMode parse_gen_mode(const std::string& name);

struct GenParams {
  int N = 100;
  int K = 10;
  double sigma = 0.01;
  double r = 0.0;  // variation radius, mean_plus_variation only
  double outlier_rate = 0.0;
  GenMode mode = GenMode::iid_models;
  std::uint64_t seed = 0;
};

struct SyntheticInstance {
  ShapeLibrary library;
  KeypointMeasurements measurements;
  Pose gt_pose;
  ShapeCoefficients gt_shape;
  std::vector<bool> outlier_mask;
  Eigen::Matrix3Xd noise;  // inlier noise draws (outlier columns are unused)
  GenParams params;

  int num_outliers() const;
};

/// Requires mode == iid_models and outlier_rate == 0.
SyntheticInstance generate_outlier_free(const GenParams& params);
/// Requires mode == mean_plus_variation.
SyntheticInstance generate_robust_instance(const GenParams& params);
/// Dispatches on params.mode; outliers are allowed in both modes.
SyntheticInstance generate_instance(const GenParams& params);

/// floor(rate * N), robust to rates like 0.7 * 100.
int outlier_count(double rate, int n);

/// arccos((trace(R_gt^T R_hat) - 1) / 2) in degrees, argument clamped.
double rotation_error_deg(const Eigen::Matrix3d& r_hat, const Eigen::Matrix3d& r_gt);

enum class Method { pace_star, altern, gnc, irls_gm, irls_tls, clique_pace_star, pace_hash };

std::string to_string(Method method);
/// Throws InputError for unknown names.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();
bool uses_pruning(Method method);

struct MethodOptions {
  double lambda = 0.0;
  double epsilon = 0.05;
  std::chrono::milliseconds clique_timeout{10000};
};

/// Runs one estimator. `bounds` is used by the pruning methods when provided.
Estimate run_method(Method method, const KeypointMeasurements& meas, const ShapeLibrary& lib,
                    const MethodOptions& options, const PairwiseBounds* bounds = nullptr);

struct ResultRow {
  std::string method;
  int N = 0;
  int K = 0;
  double sigma = 0.0;
  double r = 0.0;
  double outlier_rate = 0.0;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  double rot_err_deg = 0.0;
  double trans_err = 0.0;
  double shape_err = 0.0;
  std::optional<double> duality_gap;
  std::optional<double> clique_inlier_rate;  // true inliers / clique size
  std::optional<int> inliers_removed;        // true inliers outside the clique
  int iterations = 0;
  double time_sec = 0.0;
  double prune_ms = 0.0;
  double robust_s = 0.0;
  bool degenerate = false;
  std::string error;

  /// rotation error < 5 deg and translation error < 0.1.
  bool success() const;
};

inline constexpr double kSuccessRotationDeg = 5.0;
inline constexpr double kSuccessTranslation = 0.1;

/// Metrics of `est` against the instance ground truth.
ResultRow evaluate(const std::string& method, const SyntheticInstance& inst, const Estimate& est,
                   double lambda, double epsilon);

struct SweepConfig {
  std::vector<Method> methods;
  int N = 100;
  std::vector<int> K;
  double sigma = 0.01;
  std::vector<double> r;
  std::vector<double> outlier_rates{0.0};
  std::optional<double> lambda;  // default sqrt(K / N)
  double epsilon = 0.05;
  std::vector<std::uint64_t> seeds;
  GenMode mode = GenMode::iid_models;
  std::chrono::milliseconds clique_timeout{10000};
};

/// JSON sweep description. Throws InputError naming the offending field.
SweepConfig parse_sweep_config(const std::string& text);
SweepConfig load_sweep_config(const std::filesystem::path& path);

struct SweepOptions {
  int workers = 1;
  /// Rows already present (same method, cell and seed) are skipped.
  std::vector<ResultRow> completed;
  /// Called once per finished row, in deterministic order, under a lock.
  std::function<void(const ResultRow&)> on_row;
};

/// Every (K, r, rate) cell x seed x method. Run failures become rows with
/// failed = true; the sweep never aborts on them.
std::vector<ResultRow> run_monte_carlo(const SweepConfig& config, const SweepOptions& options = {});

/// Worker count from CATPOSE_WORKERS, else hardware concurrency (at least 1).
int default_worker_count();

const std::vector<std::string>& csv_header();
std::string csv_line(const ResultRow& row);
void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);
std::vector<ResultRow> read_csv(const std::filesystem::path& path);

struct Quartiles {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

/// Linear-interpolation quantiles; throws InputError on empty input.
Quartiles quartiles(std::vector<double> values);

/// Per-cell (method, K, r, rate) statistics as a JSON document.
std::string summarize(const std::vector<ResultRow>& rows);

}  // namespace catpose
