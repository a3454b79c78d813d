#include "catpose/core_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "catpose/error.hpp"

namespace catpose {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("parse failure: ") + e.what());
  }
}

Eigen::Vector3d parse_point(const json& p, const std::string& where) {
  if (!p.is_array() || p.size() != 3) {
    throw InputError(where + ": expected [x, y, z]");
  }
  Eigen::Vector3d v;
  for (int d = 0; d < 3; ++d) {
    if (!p[d].is_number()) {
      throw InputError(where + ": coordinate is not a number");
    }
    v[d] = p[d].get<double>();
  }
  if (!v.allFinite()) {
    throw InputError(where + ": non-finite coordinate");
  }
  return v;
}

}  // namespace

ShapeLibrary::ShapeLibrary(std::vector<Eigen::Matrix3Xd> models,
                           std::vector<std::string> keypoint_names,
                           std::vector<std::string> model_names)
    : models_(std::move(models)),
      keypoint_names_(std::move(keypoint_names)),
      model_names_(std::move(model_names)) {
  if (models_.empty()) {
    throw InputError("shape library has no models");
  }
  const auto n = models_[0].cols();
  if (n == 0) {
    throw InputError("shape library models have no keypoints");
  }
  for (std::size_t k = 0; k < models_.size(); ++k) {
    if (models_[k].cols() != n) {
      throw InputError("inconsistent keypoint count: model " + std::to_string(k) + " has " +
                       std::to_string(models_[k].cols()) + " keypoints, expected " +
                       std::to_string(n));
    }
    if (!models_[k].allFinite()) {
      throw InputError("non-finite coordinates in model " + std::to_string(k));
    }
  }
  if (!keypoint_names_.empty() && static_cast<Eigen::Index>(keypoint_names_.size()) != n) {
    throw InputError("keypoint_names length does not match keypoint count");
  }
  if (!model_names_.empty() && model_names_.size() != models_.size()) {
    throw InputError("model_names length does not match model count");
  }
}

Eigen::Matrix3Xd ShapeLibrary::combine(const ShapeCoefficients& c) const {
  Eigen::Matrix3Xd s = Eigen::Matrix3Xd::Zero(3, num_keypoints());
  for (int k = 0; k < num_models(); ++k) {
    s += c[k] * models_[k];
  }
  return s;
}

KeypointMeasurements::KeypointMeasurements(Eigen::Matrix3Xd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.cols() == 0) {
    throw InputError("no measurements");
  }
  if (weights_.size() != points_.cols()) {
    throw InputError("weights length does not match number of points");
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw InputError("weights must be finite and nonnegative");
  }
  if (!(weights_.array() > 0.0).any()) {
    throw InputError("all weights are zero");
  }
  for (Eigen::Index i = 0; i < points_.cols(); ++i) {
    if (weights_[i] > 0.0 && !points_.col(i).allFinite()) {
      throw InputError("non-finite measurement " + std::to_string(i));
    }
  }
}

KeypointMeasurements::KeypointMeasurements(Eigen::Matrix3Xd points)
    : KeypointMeasurements(points, Eigen::VectorXd::Ones(points.cols())) {}

KeypointMeasurements KeypointMeasurements::with_weights(Eigen::VectorXd weights) const {
  return KeypointMeasurements(points_, std::move(weights));
}

ShapeLibrary parse_shape_library(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object() || !doc.contains("models") || !doc["models"].is_array()) {
    throw InputError("parse failure: library needs a 'models' array");
  }
  std::vector<std::string> keypoint_names;
  if (doc.contains("keypoint_names")) {
    keypoint_names = doc["keypoint_names"].get<std::vector<std::string>>();
  }
  std::vector<Eigen::Matrix3Xd> models;
  std::vector<std::string> model_names;
  const auto& jm = doc["models"];
  for (std::size_t k = 0; k < jm.size(); ++k) {
    const auto& m = jm[k];
    if (!m.contains("points") || !m["points"].is_array()) {
      throw InputError("parse failure: model " + std::to_string(k) + " has no 'points'");
    }
    const auto& pts = m["points"];
    Eigen::Matrix3Xd b(3, pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      b.col(i) = parse_point(pts[i], "model " + std::to_string(k) + " point " + std::to_string(i));
    }
    models.push_back(std::move(b));
    model_names.push_back(m.value("name", "model_" + std::to_string(k)));
  }
  return ShapeLibrary(std::move(models), std::move(keypoint_names), std::move(model_names));
}

ShapeLibrary load_shape_library(const std::filesystem::path& path) {
  return parse_shape_library(read_file(path));
}

KeypointMeasurements parse_measurements(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
    throw InputError("parse failure: measurements need a 'points' array");
  }
  const auto& pts = doc["points"];
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (doc.contains("weights")) {
    const auto ws = doc["weights"].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(ws.size()) != n) {
      throw InputError("weights length does not match number of points");
    }
    w = Eigen::Map<const Eigen::VectorXd>(ws.data(), n);
  }
  std::vector<bool> mask(n, true);
  if (doc.contains("mask")) {
    mask = doc["mask"].get<std::vector<bool>>();
    if (static_cast<Eigen::Index>(mask.size()) != n) {
      throw InputError("mask length does not match number of points");
    }
  }
  Eigen::Matrix3Xd y = Eigen::Matrix3Xd::Zero(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) {
      w[i] = 0.0;
      if (pts[i].is_null()) continue;
    }
    y.col(i) = parse_point(pts[i], "measurement " + std::to_string(i));
  }
  return KeypointMeasurements(std::move(y), std::move(w));
}

KeypointMeasurements load_measurements(const std::filesystem::path& path) {
  return parse_measurements(read_file(path));
}

void check_compatible(const KeypointMeasurements& meas, const ShapeLibrary& lib) {
  if (meas.size() != lib.num_keypoints()) {
    throw InputError("measurement count " + std::to_string(meas.size()) +
                     " does not match library keypoint count " +
                     std::to_string(lib.num_keypoints()));
  }
}

Centroids weighted_centroids(const KeypointMeasurements& meas, const ShapeLibrary& lib) {
  check_compatible(meas, lib);
  const Eigen::VectorXd& w = meas.weights();
  const double wsum = w.sum();
  if (!(wsum > 0.0)) {
    throw InputError("all weights are zero");
  }
  Centroids out;
  out.y_w = meas.points() * w / wsum;
  out.b_w.resize(3, lib.num_models());
  for (int k = 0; k < lib.num_models(); ++k) {
    out.b_w.col(k) = lib.model(k) * w / wsum;
  }
  return out;
}

CenteredData center_and_weight(const KeypointMeasurements& meas, const ShapeLibrary& lib) {
  Centroids cw = weighted_centroids(meas, lib);
  const int n = lib.num_keypoints();
  const int kk = lib.num_models();
  const Eigen::ArrayXd sw = meas.weights().array().sqrt();

  CenteredData out;
  out.y_bar.resize(3 * n);
  out.B_bar.resize(3 * n, kk);
  for (int i = 0; i < n; ++i) {
    out.y_bar.segment<3>(3 * i) = sw[i] * (meas.points().col(i) - cw.y_w);
    for (int k = 0; k < kk; ++k) {
      out.B_bar.block<3, 1>(3 * i, k) = sw[i] * (lib.model(k).col(i) - cw.b_w.col(k));
    }
  }
  out.y_w = cw.y_w;
  out.b_w = std::move(cw.b_w);
  return out;
}

double objective(const KeypointMeasurements& meas, const ShapeLibrary& lib, const Pose& pose,
                 const ShapeCoefficients& c, double lambda) {
  check_compatible(meas, lib);
  const Eigen::Matrix3Xd s = lib.combine(c);
  double f = lambda * c.squaredNorm();
  for (int i = 0; i < meas.size(); ++i) {
    const double w = meas.weights()[i];
    if (w == 0.0) continue;
    f += w * (meas.points().col(i) - pose.rotation * s.col(i) - pose.translation).squaredNorm();
  }
  return f;
}

double centered_objective(const CenteredData& centered, const Eigen::Matrix3d& rotation,
                          const ShapeCoefficients& c, double lambda) {
  const Eigen::Matrix3Xd rotated = rotation.transpose() * centered.y_matrix();
  const Eigen::VectorXd bc = centered.B_bar * c;
  const Eigen::Map<const Eigen::VectorXd> ry(rotated.data(), rotated.size());
  return (bc - ry).squaredNorm() + lambda * c.squaredNorm();
}

Eigen::VectorXd residuals(const KeypointMeasurements& meas, const ShapeLibrary& lib,
                          const Pose& pose, const ShapeCoefficients& c) {
  check_compatible(meas, lib);
  const Eigen::Matrix3Xd model = (pose.rotation * lib.combine(c)).colwise() + pose.translation;
  return (meas.points() - model).colwise().norm().transpose();
}

}  // namespace catpose
