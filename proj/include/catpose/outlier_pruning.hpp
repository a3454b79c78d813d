#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "catpose/core_model.hpp"

namespace catpose {

/// Distance bounds between the convex hulls {b_k(i)} and {b_k(j)}.
struct PairwiseBounds {
  Eigen::MatrixXd b_min;
  Eigen::MatrixXd b_max;
  int num_keypoints() const { return static_cast<int>(b_min.rows()); }
};

struct PruneParams {
  double epsilon = 0.05;  // inlier noise bound (meters)
};

class CompatibilityGraph {
 public:
  explicit CompatibilityGraph(int num_nodes = 0)
      : n_(num_nodes), adj_(static_cast<std::size_t>(num_nodes) * num_nodes, 0) {}

  int num_nodes() const { return n_; }
  bool adjacent(int i, int j) const { return adj_[static_cast<std::size_t>(i) * n_ + j] != 0; }
  /// Self-loops are ignored.
  void add_edge(int i, int j);
  int degree(int i) const;
  std::size_t num_edges() const;

 private:
  int n_;
  std::vector<std::uint8_t> adj_;
};

struct SimplexQpResult {
  Eigen::VectorXd c;  // minimizer on the standard simplex
  double distance = 0.0;  // ||B c||
  int iterations = 0;
  bool converged = false;
};

/// min ||B c|| over the standard simplex (minimum-norm point of the convex hull
/// of B's columns), solved exactly with Wolfe's active-set method.
SimplexQpResult min_norm_on_simplex(const Eigen::Matrix3Xd& points);

/// b_max[i][j] = max_k ||b_k(j) - b_k(i)||, b_min[i][j] = min over the simplex.
PairwiseBounds pairwise_bounds(const ShapeLibrary& lib);

/// Edge (i, j) iff b_min - 2 eps <= ||y(j) - y(i)|| <= b_max + 2 eps and both
/// keypoints have positive weight.
CompatibilityGraph compatibility_graph(const KeypointMeasurements& meas,
                                       const PairwiseBounds& bounds, const PruneParams& params);

struct CliqueOptions {
  std::chrono::milliseconds timeout{10000};
};

struct CliqueResult {
  std::vector<int> members;  // ascending
  bool exact = true;         // false when the search timed out
};

/// Maximum-cardinality clique; among maximum cliques the lexicographically
/// smallest index set is returned.
CliqueResult maximum_clique(const CompatibilityGraph& graph, const CliqueOptions& options = {});

/// Stable 64-bit FNV-1a content hash, as 16 hex digits.
std::string content_hash(const std::string& bytes);
std::string library_hash(const ShapeLibrary& lib);

struct BoundsCache {
  std::string library_hash;
  PairwiseBounds bounds;
};

void save_bounds_cache(const std::filesystem::path& path, const BoundsCache& cache);
BoundsCache load_bounds_cache(const std::filesystem::path& path);

}  // namespace catpose
