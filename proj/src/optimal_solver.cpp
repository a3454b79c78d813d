#include "catpose/optimal_solver.hpp"

#include <chrono>
#include <cmath>
#include <initializer_list>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "catpose/conic_backend.hpp"
#include "catpose/error.hpp"
#include "catpose/so3.hpp"

namespace catpose {

namespace {

using Triplet = std::tuple<int, int, double>;

// Triplets are 1-based (row, col, value) on the diagonal and upper triangle.
Matrix10d symmetric_from_triplets(std::initializer_list<Triplet> entries) {
  Matrix10d a = Matrix10d::Zero();
  for (const auto& [i, j, v] : entries) {
    a(i - 1, j - 1) = v;
    a(j - 1, i - 1) = v;
  }
  return a;
}

std::array<Matrix10d, 16> make_so3_constraints() {
  return {
      symmetric_from_triplets({{1, 1, 1}}),
      // columns have unit norm
      symmetric_from_triplets({{1, 1, 1}, {2, 2, -1}, {3, 3, -1}, {4, 4, -1}}),
      symmetric_from_triplets({{1, 1, 1}, {5, 5, -1}, {6, 6, -1}, {7, 7, -1}}),
      symmetric_from_triplets({{1, 1, 1}, {8, 8, -1}, {9, 9, -1}, {10, 10, -1}}),
      // columns are mutually orthogonal
      symmetric_from_triplets({{2, 5, 1}, {3, 6, 1}, {4, 7, 1}}),
      symmetric_from_triplets({{2, 8, 1}, {3, 9, 1}, {4, 10, 1}}),
      symmetric_from_triplets({{5, 8, 1}, {6, 9, 1}, {7, 10, 1}}),
      // right-handed frame: c1 x c2 = c3, c2 x c3 = c1, c3 x c1 = c2
      symmetric_from_triplets({{3, 7, 1}, {4, 6, -1}, {1, 8, -1}}),
      symmetric_from_triplets({{4, 5, 1}, {2, 7, -1}, {1, 9, -1}}),
      symmetric_from_triplets({{2, 6, 1}, {1, 10, -1}, {3, 5, -1}}),
      symmetric_from_triplets({{6, 10, 1}, {1, 2, -1}, {7, 9, -1}}),
      symmetric_from_triplets({{7, 8, 1}, {5, 10, -1}, {1, 3, -1}}),
      symmetric_from_triplets({{5, 9, 1}, {1, 4, -1}, {6, 8, -1}}),
      symmetric_from_triplets({{4, 9, 1}, {3, 10, -1}, {1, 5, -1}}),
      symmetric_from_triplets({{2, 10, 1}, {1, 6, -1}, {4, 8, -1}}),
      symmetric_from_triplets({{3, 8, 1}, {2, 9, -1}, {1, 7, -1}}),
  };
}

Eigen::Matrix<double, 9, 9> make_vec_transpose_permutation() {
  Eigen::Matrix<double, 9, 9> p = Eigen::Matrix<double, 9, 9>::Zero();
  const int triplets[9][2] = {{1, 1}, {2, 4}, {3, 7}, {4, 2}, {5, 5},
                              {6, 8}, {7, 3}, {8, 6}, {9, 9}};
  for (const auto& t : triplets) p(t[0] - 1, t[1] - 1) = 1.0;
  return p;
}

// (I_N kron R^T) y_bar
Eigen::VectorXd rotate_back(const CenteredData& centered, const Eigen::Matrix3d& rotation) {
  Eigen::Matrix3Xd ry = rotation.transpose() * centered.y_matrix();
  return Eigen::Map<Eigen::VectorXd>(ry.data(), ry.size());
}

}  // namespace

Eigen::Vector3d solve_translation(const Eigen::Matrix3d& rotation, const ShapeCoefficients& c,
                                  const Eigen::Vector3d& y_w, const Eigen::Matrix3Xd& b_w) {
  return y_w - rotation * (b_w * c);
}

ShapeCache build_shape_cache(const CenteredData& centered, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InputError("lambda must be finite and nonnegative");
  }
  const int kk = centered.num_models();
  ShapeCache cache;
  cache.lambda = lambda;
  cache.H_bar = 2.0 * (centered.B_bar.transpose() * centered.B_bar);
  cache.H_bar.diagonal().array() += 2.0 * lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(cache.H_bar);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
    throw SolverError(
        "singular shape system: B_bar^T B_bar is not invertible; use lambda > 0");
  }
  const Eigen::MatrixXd h_inv = llt.solve(Eigen::MatrixXd::Identity(kk, kk));
  const Eigen::VectorXd u = h_inv.rowwise().sum();
  const double s = u.sum();
  cache.g = u / s;
  cache.G = h_inv - u * u.transpose() / s;
  cache.G = 0.5 * (cache.G + cache.G.transpose()).eval();
  return cache;
}

ShapeCoefficients solve_shape(const Eigen::Matrix3d& rotation, const CenteredData& centered,
                              const ShapeCache& cache) {
  const Eigen::VectorXd z = rotate_back(centered, rotation);
  ShapeCoefficients c = 2.0 * cache.G * (centered.B_bar.transpose() * z) + cache.g;
  // G 1 = 0 holds only to round-off; restore the affine constraint exactly
  c.array() += (1.0 - c.sum()) / static_cast<double>(c.size());
  return c;
}

const Eigen::Matrix<double, 9, 9>& vec_transpose_permutation() {
  static const Eigen::Matrix<double, 9, 9> p = make_vec_transpose_permutation();
  return p;
}

const std::array<Matrix10d, 16>& so3_constraint_matrices() {
  static const std::array<Matrix10d, 16> a = make_so3_constraints();
  return a;
}

Vector10d lift_rotation(const Eigen::Matrix3d& rotation) {
  Vector10d r;
  r[0] = 1.0;
  r.tail<9>() = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(rotation.data());
  return r;
}

RotationQCQP assemble_rotation_qcqp(const CenteredData& centered, const ShapeCache& cache) {
  const int n3 = static_cast<int>(centered.y_bar.size());
  const int kk = centered.num_models();
  const double sqrt_lambda = std::sqrt(cache.lambda);
  const Eigen::MatrixXd& b = centered.B_bar;

  RotationQCQP qcqp;
  const Eigen::MatrixXd gbt = cache.G * b.transpose();  // K x 3N
  qcqp.M.resize(n3 + kk, n3);
  qcqp.M.topRows(n3).noalias() = 2.0 * b * gbt;
  qcqp.M.topRows(n3).diagonal().array() -= 1.0;
  qcqp.M.bottomRows(kk) = 2.0 * sqrt_lambda * gbt;

  qcqp.h.resize(n3 + kk);
  qcqp.h.head(n3) = b * cache.g;
  qcqp.h.tail(kk) = sqrt_lambda * cache.g;

  // W = (Y^T kron I_3) P maps vec(R) to (I_N kron R^T) y_bar
  const auto y = centered.y_matrix();
  const int n = centered.num_keypoints();
  Eigen::MatrixXd ykron = Eigen::MatrixXd::Zero(n3, 9);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) {
      ykron.block<3, 3>(3 * i, 3 * j) = y(j, i) * Eigen::Matrix3d::Identity();
    }
  }
  const Eigen::MatrixXd w = ykron * vec_transpose_permutation();

  qcqp.L.resize(n3 + kk, 10);
  qcqp.L.col(0) = qcqp.h;
  qcqp.L.rightCols(9).noalias() = qcqp.M * w;
  qcqp.Q.noalias() = qcqp.L.transpose() * qcqp.L;
  qcqp.Q = 0.5 * (qcqp.Q + qcqp.Q.transpose()).eval();
  qcqp.A = &so3_constraint_matrices();
  return qcqp;
}

double rotation_cost(const RotationQCQP& qcqp, const CenteredData& centered,
                     const Eigen::Matrix3d& rotation) {
  return (qcqp.M * rotate_back(centered, rotation) + qcqp.h).squaredNorm();
}

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace

Eigen::Matrix3d polish_rotation(const RotationQCQP& qcqp, const Eigen::Matrix3d& rotation,
                                int max_iterations) {
  const Eigen::MatrixXd& L = qcqp.L;
  auto residual = [&](const Eigen::Matrix3d& r) -> Eigen::VectorXd {
    return L.col(0) + L.rightCols(9) * Eigen::Map<const Eigen::Matrix<double, 9, 1>>(r.data());
  };
  Eigen::Matrix3d r = rotation;
  Eigen::VectorXd e = residual(r);
  double cost = e.squaredNorm();
  for (int it = 0; it < max_iterations; ++it) {
    // d r~ / d omega_k = vec(R [e_k]x)
    Eigen::MatrixXd J(L.rows(), 3);
    for (int k = 0; k < 3; ++k) {
      const Eigen::Matrix3d d = r * skew(Eigen::Vector3d::Unit(k));
      J.col(k) = L.rightCols(9) * Eigen::Map<const Eigen::Matrix<double, 9, 1>>(d.data());
    }
    const Eigen::Vector3d step = -(J.transpose() * J).ldlt().solve(J.transpose() * e);
    if (!step.allFinite() || step.norm() < 1e-16) break;
    bool accepted = false;
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
      const Eigen::Matrix3d cand = r * Eigen::AngleAxisd(t * step.norm(), step.normalized()).toRotationMatrix();
      const Eigen::VectorXd ec = residual(cand);
      const double cc = ec.squaredNorm();
      if (cc < cost) {
        r = project_to_so3(cand);
        e = residual(r);
        cost = e.squaredNorm();
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return r;
}

Estimate pace_star(const KeypointMeasurements& meas, const ShapeLibrary& lib, double lambda,
                   const SdpBackend* backend) {
  const auto start = std::chrono::steady_clock::now();
  const CenteredData centered = center_and_weight(meas, lib);
  const ShapeCache cache = build_shape_cache(centered, lambda);
  const RotationQCQP qcqp = assemble_rotation_qcqp(centered, cache);
  const SdpSolution sdp =
      solve_rotation_sdp(qcqp, backend != nullptr ? *backend : default_sdp_backend());

  Estimate est;
  est.pose.rotation = polish_rotation(qcqp, round_rotation(sdp));
  est.shape = solve_shape(est.pose.rotation, centered, cache);
  est.pose.translation = solve_translation(est.pose.rotation, est.shape, centered.y_w, centered.b_w);

  Certificate cert;
  cert.f_sdp = sdp.f_sdp;
  cert.f_est = objective(meas, lib, est.pose, est.shape, lambda);
  cert.eta = duality_gap(cert.f_sdp, cert.f_est);
  cert.degenerate_cost = cert.f_est <= kDegenerateCost;
  cert.is_optimal = cert.eta <= kOptimalityGap;
  cert.max_eig_ratio = sdp.max_eig_ratio;
  cert.rank_one = sdp.max_eig_ratio >= kRankOneRatio;
  cert.sdp_status = to_string(sdp.status);
  est.certificate = cert;

  est.inlier_mask.resize(meas.size());
  for (int i = 0; i < meas.size(); ++i) est.inlier_mask[i] = meas.weights()[i] > 0.0;
  est.iterations = sdp.iterations;
  est.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  est.timing.total_s = est.solve_time;
  return est;
}

ShapeCoefficients clamp_to_simplex(const ShapeCoefficients& c) {
  ShapeCoefficients out = c.cwiseMax(0.0);
  const double s = out.sum();
  if (s <= 0.0) {
    return ShapeCoefficients::Constant(c.size(), 1.0 / static_cast<double>(c.size()));
  }
  return out / s;
}

}  // namespace catpose
