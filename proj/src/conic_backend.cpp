#include "catpose/conic_backend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "catpose/error.hpp"
#include "catpose/so3.hpp"

namespace catpose {

namespace {

constexpr int kSize = 10;
constexpr int kNumConstraints = 16;
using Vector16d = Eigen::Matrix<double, kNumConstraints, 1>;
using Matrix16d = Eigen::Matrix<double, kNumConstraints, kNumConstraints>;

double inner(const Matrix10d& a, const Matrix10d& b) { return a.cwiseProduct(b).sum(); }

Matrix10d sym(const Matrix10d& a) { return 0.5 * (a + a.transpose()); }

Vector16d apply_constraints(const std::array<Matrix10d, 16>& a, const Matrix10d& x) {
  Vector16d out;
  for (int i = 0; i < kNumConstraints; ++i) out[i] = inner(a[i], x);
  return out;
}

Matrix10d adjoint(const std::array<Matrix10d, 16>& a, const Vector16d& y) {
  Matrix10d out = Matrix10d::Zero();
  for (int i = 0; i < kNumConstraints; ++i) out += y[i] * a[i];
  return out;
}

// Largest alpha such that x + alpha dx stays PSD (infinity when dx keeps it PSD).
double max_step(const Matrix10d& x, const Matrix10d& dx) {
  Eigen::LLT<Matrix10d> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix10d linv = llt.matrixL().solve(Matrix10d::Identity());
  const Matrix10d s = sym(linv * dx * linv.transpose());
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix10d>(s, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  if (min_eig >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / min_eig;
}

struct Direction {
  Matrix10d dx;
  Vector16d dy;
  Matrix10d dz;
};

}  // namespace

std::string to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::optimal:
      return "optimal";
    case SdpStatus::near_optimal:
      return "near_optimal";
    case SdpStatus::failed:
      return "failed";
  }
  return "failed";
}

SdpSolution InteriorPointSdp::solve(const RotationQCQP& qcqp) const {
  const auto& a = *qcqp.A;
  const double scale = std::max(1.0, qcqp.Q.cwiseAbs().maxCoeff());
  const Matrix10d c = qcqp.Q / scale;
  Vector16d b = Vector16d::Zero();
  b[0] = 1.0;
  const double c_norm = c.norm();

  // Gram matrix of the constraints, used to keep primal steps on A(X) = b
  Matrix16d gram;
  for (int i = 0; i < kNumConstraints; ++i) {
    for (int j = 0; j < kNumConstraints; ++j) gram(i, j) = inner(a[i], a[j]);
  }
  const Eigen::LDLT<Matrix16d> gram_ldlt(gram);

  // diag(1, I/3) is the moment matrix of the uniform distribution on SO(3):
  // primal feasible and strictly inside the cone
  Matrix10d x = Matrix10d::Identity() / 3.0;
  x(0, 0) = 1.0;
  Vector16d y = Vector16d::Zero();
  Matrix10d z = Matrix10d::Identity();

  Matrix10d best_x = x;
  Vector16d best_y = y;
  double best_measure = std::numeric_limits<double>::infinity();
  SdpSolution sol;

  int iter = 0;
  for (; iter < params_.max_iterations; ++iter) {
    const Vector16d rp = b - apply_constraints(a, x);
    const Matrix10d rd = c - adjoint(a, y) - z;
    const double pobj = inner(c, x);
    const double dobj = b.dot(y);
    const double mu = inner(x, z) / kSize;

    const double pinf = rp.norm() / (1.0 + b.norm());
    const double dinf = rd.norm() / (1.0 + c_norm);
    const double relgap = std::max(std::abs(pobj - dobj), kSize * mu) /
                          (1.0 + std::abs(pobj) + std::abs(dobj));
    const double measure = std::max({pinf, dinf, relgap});
    if (measure < best_measure) {
      best_measure = measure;
      best_x = x;
      best_y = y;
    }
    if (measure < params_.tolerance) break;

    Eigen::LLT<Matrix10d> z_llt(z);
    if (z_llt.info() != Eigen::Success) break;
    const Matrix10d z_inv = z_llt.solve(Matrix10d::Identity());

    // Schur complement M_ij = trace(A_i X A_j Z^-1)
    std::array<Matrix10d, kNumConstraints> xaz;
    for (int j = 0; j < kNumConstraints; ++j) xaz[j] = x * a[j] * z_inv;
    Matrix16d schur;
    for (int i = 0; i < kNumConstraints; ++i) {
      for (int j = 0; j < kNumConstraints; ++j) schur(i, j) = inner(a[i], xaz[j]);
    }
    schur = 0.5 * (schur + schur.transpose()).eval();
    Eigen::LDLT<Matrix16d> schur_ldlt(schur);
    if (schur_ldlt.info() != Eigen::Success) break;

    const Vector16d a_xrdz = apply_constraints(a, x * rd * z_inv);
    auto direction = [&](const Matrix10d& psi) {
      Direction d;
      d.dy = schur_ldlt.solve(rp - apply_constraints(a, psi) + a_xrdz);
      d.dz = sym(rd - adjoint(a, d.dy));
      d.dx = psi - sym(x * d.dz * z_inv);
      d.dx += adjoint(a, gram_ldlt.solve(rp - apply_constraints(a, d.dx)));
      return d;
    };

    const Direction pred = direction(-x);
    const double ap = std::min(1.0, max_step(x, pred.dx));
    const double ad = std::min(1.0, max_step(z, pred.dz));
    const double mu_aff = inner(x + ap * pred.dx, z + ad * pred.dz) / kSize;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    const Matrix10d psi = sigma * mu * z_inv - x - sym(pred.dx * pred.dz * z_inv);
    const Direction corr = direction(psi);
    const double gamma = params_.step_fraction;
    const double step_p = std::min(1.0, gamma * max_step(x, corr.dx));
    const double step_d = std::min(1.0, gamma * max_step(z, corr.dz));
    if (!(step_p > 0.0) || !(step_d > 0.0)) break;

    x = sym(x + step_p * corr.dx);
    y += step_d * corr.dy;
    z = sym(z + step_d * corr.dz);
    if (!x.allFinite() || !z.allFinite() || !y.allFinite()) break;
  }

  sol.iterations = iter;
  sol.X = best_x;
  sol.dual_objective = scale * b.dot(best_y);
  // the dual value is a lower bound once the dual residual is negligible
  sol.f_sdp = std::min(scale * inner(c, best_x), sol.dual_objective);
  sol.primal_residual = (b - apply_constraints(a, best_x)).cwiseAbs().maxCoeff();
  if (best_measure < params_.tolerance) {
    sol.status = SdpStatus::optimal;
  } else if (best_measure < params_.near_tolerance) {
    sol.status = SdpStatus::near_optimal;
  } else {
    sol.status = SdpStatus::failed;
  }

  const Eigen::Matrix<double, 10, 1> eig =
      Eigen::SelfAdjointEigenSolver<Matrix10d>(sol.X, Eigen::EigenvaluesOnly).eigenvalues();
  const double l1 = eig[9];
  const double l2 = std::max(eig[8], l1 * 1e-300);
  sol.max_eig_ratio = l2 > 0.0 ? l1 / l2 : std::numeric_limits<double>::max();
  return sol;
}

const SdpBackend& default_sdp_backend() {
  static const InteriorPointSdp backend;
  return backend;
}

SdpSolution solve_rotation_sdp(const RotationQCQP& qcqp, const SdpBackend& backend) {
  if (qcqp.A == nullptr) {
    throw InputError("rotation QCQP has no constraint matrices");
  }
  SdpSolution sol = backend.solve(qcqp);
  if (sol.status == SdpStatus::failed) {
    throw SolverError("SDP solver did not converge");
  }
  return sol;
}

Eigen::Matrix3d round_rotation(const Matrix10d& X) {
  Eigen::SelfAdjointEigenSolver<Matrix10d> es(0.5 * (X + X.transpose()));
  Vector10d v = es.eigenvectors().col(9);
  if (std::abs(v[0]) < 1e-8 * v.cwiseAbs().maxCoeff()) {
    throw SolverError("degenerate SDP solution: leading eigenvector has no homogenizing component");
  }
  v /= v[0];
  const Eigen::Map<const Eigen::Matrix3d> raw(v.data() + 1);
  return project_to_so3(raw);
}

double duality_gap(double f_sdp, double f_est) {
  if (f_est <= kDegenerateCost) return 0.0;
  return (f_est - f_sdp) / f_est;
}

}  // namespace catpose
