"""Certifiable category-level pose and shape estimation from 3D keypoints."""

from ._catpose import (
    Certificate,
    Estimate,
    InputError,
    KeypointMeasurements,
    Pose,
    ShapeLibrary,
    SolverError,
    SyntheticInstance,
    alternating_minimization,
    clique_pace_star,
    generate_instance,
    gnc_tls,
    irls,
    maximum_clique,
    objective,
    pace_hash,
    pace_star,
    pairwise_bounds,
    parse_measurements,
    parse_shape_library,
    project_to_so3,
    rotation_error_deg,
    wahba_svd,
)

__all__ = [
    "Certificate",
    "Estimate",
    "InputError",
    "KeypointMeasurements",
    "Pose",
    "ShapeLibrary",
    "SolverError",
    "SyntheticInstance",
    "alternating_minimization",
    "clique_pace_star",
    "generate_instance",
    "gnc_tls",
    "irls",
    "maximum_clique",
    "objective",
    "pace_hash",
    "pace_star",
    "pairwise_bounds",
    "parse_measurements",
    "parse_shape_library",
    "project_to_so3",
    "rotation_error_deg",
    "wahba_svd",
]
