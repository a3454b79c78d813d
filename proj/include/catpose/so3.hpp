#pragma once

#include <array>
#include <random>

#include <Eigen/Core>

namespace catpose {

/// Closest rotation in Frobenius norm: U diag(1, 1, det(U V^T)) V^T.
Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m);

/// Angle of R_a^T R_b in radians, in [0, pi].
double geodesic_distance(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb);

/// Uniform (Haar) rotation from a normalized Gaussian quaternion.
Eigen::Matrix3d random_rotation(std::mt19937_64& rng);

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle);

/// Unit quaternion (w, x, y, z) with w >= 0.
std::array<double, 4> to_quaternion(const Eigen::Matrix3d& r);

/// ||R^T R - I||_max <= tol and |det R - 1| <= tol.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

}  // namespace catpose
