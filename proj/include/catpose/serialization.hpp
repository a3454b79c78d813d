#pragma once

#include <filesystem>
#include <string>

#include "catpose/bench_harness.hpp"
#include "catpose/core_model.hpp"
#include "catpose/optimal_solver.hpp"

namespace catpose {

/// Pose (quaternion w,x,y,z and row-major 3x3 matrix), shape, inlier mask,
/// certificate, clique and timing breakdown.
std::string estimate_to_json(const Estimate& est, int indent = 2);
/// Inverse of estimate_to_json; throws InputError on malformed documents.
Estimate estimate_from_json(const std::string& text);

/// Same layout that parse_shape_library / parse_measurements read.
std::string library_to_json(const ShapeLibrary& lib, int indent = 2);
std::string measurements_to_json(const KeypointMeasurements& meas, int indent = 2);

/// Ground truth of a synthetic instance: pose, shape, outlier mask, generator parameters.
std::string ground_truth_to_json(const SyntheticInstance& inst, int indent = 2);

/// JSON error object {"error": {"type": ..., "message": ...}}.
std::string error_to_json(const std::string& type, const std::string& message);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace catpose
