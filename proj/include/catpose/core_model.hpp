#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace catpose {

using ShapeCoefficients = Eigen::VectorXd;

/// K CAD models sharing the same N semantic keypoints. models()[k].col(i) is b_k(i).
class ShapeLibrary {
 public:
  ShapeLibrary() = default;
  /// Throws InputError on empty input, inconsistent keypoint counts or
  /// non-finite coordinates.
  explicit ShapeLibrary(std::vector<Eigen::Matrix3Xd> models,
                        std::vector<std::string> keypoint_names = {},
                        std::vector<std::string> model_names = {});

  int num_models() const { return static_cast<int>(models_.size()); }
  int num_keypoints() const { return models_.empty() ? 0 : static_cast<int>(models_[0].cols()); }

  const std::vector<Eigen::Matrix3Xd>& models() const { return models_; }
  const Eigen::Matrix3Xd& model(int k) const { return models_[k]; }
  Eigen::Vector3d point(int k, int i) const { return models_[k].col(i); }
  const std::vector<std::string>& keypoint_names() const { return keypoint_names_; }
  const std::vector<std::string>& model_names() const { return model_names_; }

  /// Shape sum_k c_k b_k as a 3xN matrix.
  Eigen::Matrix3Xd combine(const ShapeCoefficients& c) const;

 private:
  std::vector<Eigen::Matrix3Xd> models_;
  std::vector<std::string> keypoint_names_;
  std::vector<std::string> model_names_;
};

/// N keypoint detections y(i) with nonnegative confidence weights w_i.
class KeypointMeasurements {
 public:
  KeypointMeasurements() = default;
  /// Throws InputError on size mismatch, negative or non-finite weights,
  /// or when every weight is zero.
  KeypointMeasurements(Eigen::Matrix3Xd points, Eigen::VectorXd weights);
  explicit KeypointMeasurements(Eigen::Matrix3Xd points);

  int size() const { return static_cast<int>(points_.cols()); }
  const Eigen::Matrix3Xd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// Same points, new weights (validated).
  KeypointMeasurements with_weights(Eigen::VectorXd weights) const;
  int num_active() const { return static_cast<int>((weights_.array() > 0.0).count()); }

 private:
  Eigen::Matrix3Xd points_;
  Eigen::VectorXd weights_;
};

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

/// Weighted-centered data. y_bar stacks sqrt(w_i) (y(i) - y_w); column k of
/// B_bar stacks sqrt(w_i) (b_k(i) - b_{k,w}).
struct CenteredData {
  Eigen::VectorXd y_bar;
  Eigen::MatrixXd B_bar;
  Eigen::Vector3d y_w;
  Eigen::Matrix3Xd b_w;  // column k is b_{k,w}

  int num_keypoints() const { return static_cast<int>(y_bar.size() / 3); }
  int num_models() const { return static_cast<int>(B_bar.cols()); }
  /// 3xN view of y_bar.
  Eigen::Map<const Eigen::Matrix3Xd> y_matrix() const {
    return {y_bar.data(), 3, y_bar.size() / 3};
  }
};

struct Centroids {
  Eigen::Vector3d y_w;
  Eigen::Matrix3Xd b_w;
};

ShapeLibrary load_shape_library(const std::filesystem::path& path);
ShapeLibrary parse_shape_library(const std::string& text);

/// Missing weights default to 1; keypoints with mask false get weight 0.
KeypointMeasurements load_measurements(const std::filesystem::path& path);
KeypointMeasurements parse_measurements(const std::string& text);

/// Throws InputError when the measurement count differs from the library's N.
void check_compatible(const KeypointMeasurements& meas, const ShapeLibrary& lib);

Centroids weighted_centroids(const KeypointMeasurements& meas, const ShapeLibrary& lib);
CenteredData center_and_weight(const KeypointMeasurements& meas, const ShapeLibrary& lib);

/// sum_i w_i ||y(i) - R s(i) - t||^2 + lambda ||c||^2 with s = sum_k c_k b_k.
double objective(const KeypointMeasurements& meas, const ShapeLibrary& lib, const Pose& pose,
                 const ShapeCoefficients& c, double lambda);

/// Translation-free cost ||B_bar c - (I_N kron R^T) y_bar||^2 + lambda ||c||^2.
double centered_objective(const CenteredData& centered, const Eigen::Matrix3d& rotation,
                          const ShapeCoefficients& c, double lambda);

/// Per-keypoint Euclidean residuals ||y(i) - R s(i) - t|| (weights ignored).
Eigen::VectorXd residuals(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                          const Pose& pose, const ShapeCoefficients& c);

}  // namespace catpose
