#pragma once

#include <stdexcept>
#include <string>

namespace catpose {

/// Malformed or inconsistent user input (files, parameters).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solve that cannot produce a usable estimate: singular systems,
/// backend failures, too few inliers to observe rotation.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace catpose
