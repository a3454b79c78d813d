#include "catpose/serialization.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "catpose/error.hpp"
#include "catpose/so3.hpp"

namespace catpose {

using nlohmann::json;

namespace {

json points_json(const Eigen::Matrix3Xd& pts) {
  json out = json::array();
  for (Eigen::Index i = 0; i < pts.cols(); ++i) out.push_back({pts(0, i), pts(1, i), pts(2, i)});
  return out;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json pose_json(const Pose& pose) {
  const auto q = to_quaternion(pose.rotation);
  json matrix = json::array();
  for (int r = 0; r < 3; ++r) {
    matrix.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
  }
  return {{"rotation_quaternion_wxyz", q},
          {"rotation_matrix", matrix},
          {"translation", {pose.translation[0], pose.translation[1], pose.translation[2]}}};
}

Pose pose_from(const json& j) {
  Pose pose;
  const auto m = j.at("rotation_matrix").get<std::vector<std::vector<double>>>();
  if (m.size() != 3) throw InputError("rotation_matrix must be 3x3");
  for (int r = 0; r < 3; ++r) {
    if (m[r].size() != 3) throw InputError("rotation_matrix must be 3x3");
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = m[r][c];
  }
  const auto t = j.at("translation").get<std::vector<double>>();
  if (t.size() != 3) throw InputError("translation must have 3 entries");
  pose.translation = Eigen::Vector3d(t[0], t[1], t[2]);
  return pose;
}

}  // namespace

std::string estimate_to_json(const Estimate& est, int indent) {
  json doc;
  doc["pose"] = pose_json(est.pose);
  doc["shape"] = vector_json(est.shape);
  doc["inlier_mask"] = est.inlier_mask;
  doc["iterations"] = est.iterations;
  doc["degenerate"] = est.degenerate;
  if (est.certificate) {
    const Certificate& c = *est.certificate;
    doc["certificate"] = {{"eta", c.eta},
                          {"f_sdp", c.f_sdp},
                          {"f_est", c.f_est},
                          {"is_optimal", c.is_optimal},
                          {"degenerate_cost", c.degenerate_cost},
                          {"max_eig_ratio", c.max_eig_ratio},
                          {"rank_one", c.rank_one},
                          {"sdp_status", c.sdp_status}};
  } else {
    doc["certificate"] = nullptr;
  }
  if (est.clique) {
    doc["clique"] = {{"members", *est.clique}, {"exact", est.clique_exact}};
  } else {
    doc["clique"] = nullptr;
  }
  doc["timing"] = {{"prune_ms", est.timing.prune_ms},
                   {"gnc_s", est.timing.robust_s},
                   {"total_s", est.timing.total_s}};
  return doc.dump(indent);
}

Estimate estimate_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    Estimate est;
    est.pose = pose_from(doc.at("pose"));
    const auto shape = doc.at("shape").get<std::vector<double>>();
    est.shape = Eigen::Map<const Eigen::VectorXd>(shape.data(), static_cast<Eigen::Index>(shape.size()));
    est.inlier_mask = doc.at("inlier_mask").get<std::vector<bool>>();
    est.iterations = doc.at("iterations").get<int>();
    est.degenerate = doc.at("degenerate").get<bool>();
    if (const json& c = doc.at("certificate"); !c.is_null()) {
      Certificate cert;
      cert.eta = c.at("eta").get<double>();
      cert.f_sdp = c.at("f_sdp").get<double>();
      cert.f_est = c.at("f_est").get<double>();
      cert.is_optimal = c.at("is_optimal").get<bool>();
      cert.degenerate_cost = c.at("degenerate_cost").get<bool>();
      cert.max_eig_ratio = c.at("max_eig_ratio").get<double>();
      cert.rank_one = c.at("rank_one").get<bool>();
      cert.sdp_status = c.at("sdp_status").get<std::string>();
      est.certificate = cert;
    }
    if (const json& q = doc.at("clique"); !q.is_null()) {
      est.clique = q.at("members").get<std::vector<int>>();
      est.clique_exact = q.at("exact").get<bool>();
    }
    const json& t = doc.at("timing");
    est.timing.prune_ms = t.at("prune_ms").get<double>();
    est.timing.robust_s = t.at("gnc_s").get<double>();
    est.timing.total_s = t.at("total_s").get<double>();
    est.solve_time = est.timing.total_s;
    return est;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed estimate JSON: ") + e.what());
  }
}

std::string library_to_json(const ShapeLibrary& lib, int indent) {
  json doc;
  if (!lib.keypoint_names().empty()) doc["keypoint_names"] = lib.keypoint_names();
  json models = json::array();
  for (int k = 0; k < lib.num_models(); ++k) {
    json m{{"points", points_json(lib.model(k))}};
    if (k < static_cast<int>(lib.model_names().size())) m["name"] = lib.model_names()[k];
    models.push_back(std::move(m));
  }
  doc["models"] = std::move(models);
  return doc.dump(indent);
}

std::string measurements_to_json(const KeypointMeasurements& meas, int indent) {
  json doc{{"points", points_json(meas.points())}, {"weights", vector_json(meas.weights())}};
  return doc.dump(indent);
}

std::string ground_truth_to_json(const SyntheticInstance& inst, int indent) {
  const GenParams& p = inst.params;
  json doc{{"pose", pose_json(inst.gt_pose)},
           {"shape", vector_json(inst.gt_shape)},
           {"outlier_mask", inst.outlier_mask},
           {"params",
            {{"N", p.N},
             {"K", p.K},
             {"sigma", p.sigma},
             {"r", p.r},
             {"outlier_rate", p.outlier_rate},
             {"mode", to_string(p.mode)},
             {"seed", p.seed}}}};
  return doc.dump(indent);
}

std::string error_to_json(const std::string& type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}}.dump();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw InputError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace catpose
