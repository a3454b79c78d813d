#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "catpose/bench_harness.hpp"
#include "catpose/conic_backend.hpp"
#include "catpose/error.hpp"
#include "catpose/outlier_pruning.hpp"
#include "catpose/robust_pipeline.hpp"
#include "catpose/serialization.hpp"
#include "catpose/so3.hpp"

namespace py = pybind11;
using namespace catpose;

namespace {

CompatibilityGraph graph_from_adjacency(const Eigen::MatrixXi& adj) {
  if (adj.rows() != adj.cols()) throw InputError("adjacency matrix must be square");
  CompatibilityGraph g(static_cast<int>(adj.rows()));
  for (int i = 0; i < adj.rows(); ++i) {
    for (int j = i + 1; j < adj.cols(); ++j) {
      if (adj(i, j) != 0 || adj(j, i) != 0) g.add_edge(i, j);
    }
  }
  return g;
}

}  // namespace

PYBIND11_MODULE(_catpose, m) {
  m.doc() = "Certifiable category-level pose and shape estimation";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<ShapeLibrary>(m, "ShapeLibrary")
      .def(py::init<std::vector<Eigen::Matrix3Xd>, std::vector<std::string>, std::vector<std::string>>(),
           py::arg("models"), py::arg("keypoint_names") = std::vector<std::string>{},
           py::arg("model_names") = std::vector<std::string>{})
      .def_property_readonly("num_models", &ShapeLibrary::num_models)
      .def_property_readonly("num_keypoints", &ShapeLibrary::num_keypoints)
      .def_property_readonly("models", &ShapeLibrary::models)
      .def_property_readonly("keypoint_names", &ShapeLibrary::keypoint_names)
      .def("combine", &ShapeLibrary::combine, py::arg("c"))
      .def("to_json", [](const ShapeLibrary& lib) { return library_to_json(lib); });

  py::class_<KeypointMeasurements>(m, "KeypointMeasurements")
      .def(py::init<Eigen::Matrix3Xd, Eigen::VectorXd>(), py::arg("points"), py::arg("weights"))
      .def(py::init<Eigen::Matrix3Xd>(), py::arg("points"))
      .def_property_readonly("points", &KeypointMeasurements::points)
      .def_property_readonly("weights", &KeypointMeasurements::weights)
      .def("__len__", &KeypointMeasurements::size)
      .def("to_json", [](const KeypointMeasurements& meas) { return measurements_to_json(meas); });

  m.def("parse_shape_library", &parse_shape_library, py::arg("text"));
  m.def("parse_measurements", &parse_measurements, py::arg("text"));

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("translation", &Pose::translation);

  py::class_<Certificate>(m, "Certificate")
      .def_readonly("f_sdp", &Certificate::f_sdp)
      .def_readonly("f_est", &Certificate::f_est)
      .def_readonly("eta", &Certificate::eta)
      .def_readonly("is_optimal", &Certificate::is_optimal)
      .def_readonly("degenerate_cost", &Certificate::degenerate_cost)
      .def_readonly("max_eig_ratio", &Certificate::max_eig_ratio)
      .def_readonly("rank_one", &Certificate::rank_one)
      .def_readonly("sdp_status", &Certificate::sdp_status);

  py::class_<Estimate>(m, "Estimate")
      .def_readonly("pose", &Estimate::pose)
      .def_readonly("shape", &Estimate::shape)
      .def_readonly("certificate", &Estimate::certificate)
      .def_readonly("inlier_mask", &Estimate::inlier_mask)
      .def_readonly("iterations", &Estimate::iterations)
      .def_readonly("solve_time", &Estimate::solve_time)
      .def_readonly("degenerate", &Estimate::degenerate)
      .def_readonly("clique", &Estimate::clique)
      .def_readonly("clique_exact", &Estimate::clique_exact)
      .def_property_readonly("rotation", [](const Estimate& e) { return e.pose.rotation; })
      .def_property_readonly("translation", [](const Estimate& e) { return e.pose.translation; })
      .def("to_json", [](const Estimate& e) { return estimate_to_json(e); });

  m.def("objective", &objective, py::arg("measurements"), py::arg("library"), py::arg("pose"),
        py::arg("c"), py::arg("lambda_"));
  m.def("pace_star",
        [](const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda) {
          return pace_star(meas, lib, lambda);
        },
        py::arg("measurements"), py::arg("library"), py::arg("lambda_"));
  m.def("gnc_tls",
        [](const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda, double eps) {
          RobustParams p;
          p.epsilon_bar = eps;
          return gnc_tls(meas, lib, lambda, p);
        },
        py::arg("measurements"), py::arg("library"), py::arg("lambda_"), py::arg("epsilon") = 0.05);
  m.def("irls",
        [](const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
           const std::string& loss, double eps) {
          RobustParams p;
          p.epsilon_bar = eps;
          if (loss != "gm" && loss != "tls") throw InputError("loss must be 'gm' or 'tls'");
          return irls(meas, lib, lambda, loss == "gm" ? IrlsLoss::GM : IrlsLoss::TLS, p);
        },
        py::arg("measurements"), py::arg("library"), py::arg("lambda_"), py::arg("loss") = "gm",
        py::arg("epsilon") = 0.05);
  m.def("alternating_minimization",
        [](const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda) {
          return alternating_minimization(meas, lib, lambda);
        },
        py::arg("measurements"), py::arg("library"), py::arg("lambda_"));
  m.def("clique_pace_star",
        [](const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda, double eps) {
          return clique_pace_star(meas, lib, lambda, PruneParams{eps});
        },
        py::arg("measurements"), py::arg("library"), py::arg("lambda_"), py::arg("epsilon") = 0.05);
  m.def("pace_hash",
        [](const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda, double eps) {
          return pace_hash(meas, lib, lambda, make_pace_hash_params(eps));
        },
        py::arg("measurements"), py::arg("library"), py::arg("lambda_"), py::arg("epsilon") = 0.05);
  m.def("wahba_svd", &wahba_svd, py::arg("a"), py::arg("b"), py::arg("weights"));

  m.def("pairwise_bounds",
        [](const ShapeLibrary& lib) {
          const PairwiseBounds b = pairwise_bounds(lib);
          return py::make_tuple(b.b_min, b.b_max);
        },
        py::arg("library"), "Returns (b_min, b_max) as N x N arrays.");
  m.def("maximum_clique",
        [](const Eigen::MatrixXi& adjacency, long long timeout_ms) {
          CliqueOptions opt;
          opt.timeout = std::chrono::milliseconds(timeout_ms);
          const CliqueResult r = maximum_clique(graph_from_adjacency(adjacency), opt);
          return py::make_tuple(r.members, r.exact);
        },
        py::arg("adjacency"), py::arg("timeout_ms") = 10000,
        "Returns (members, exact) for a symmetric 0/1 adjacency matrix.");

  m.def("project_to_so3", &project_to_so3, py::arg("m"));
  m.def("rotation_error_deg", &rotation_error_deg, py::arg("r_hat"), py::arg("r_gt"));

  py::class_<SyntheticInstance>(m, "SyntheticInstance")
      .def_readonly("library", &SyntheticInstance::library)
      .def_readonly("measurements", &SyntheticInstance::measurements)
      .def_readonly("gt_pose", &SyntheticInstance::gt_pose)
      .def_readonly("gt_shape", &SyntheticInstance::gt_shape)
      .def_readonly("outlier_mask", &SyntheticInstance::outlier_mask);
  m.def("generate_instance",
        [](int N, int K, double sigma, double r, double outlier_rate, const std::string& mode,
           std::uint64_t seed) {
          return generate_instance(GenParams{N, K, sigma, r, outlier_rate, parse_gen_mode(mode), seed});
        },
        py::arg("N") = 100, py::arg("K") = 10, py::arg("sigma") = 0.01, py::arg("r") = 0.0,
        py::arg("outlier_rate") = 0.0, py::arg("mode") = "iid_models", py::arg("seed") = 0);
}
