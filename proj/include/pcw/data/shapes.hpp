#pragma once

#include <string>

#include "pcw/common.hpp"
#include "pcw/rng.hpp"

namespace pcw {

enum class ShapeKind { kBoxComposite, kEllipsoidComposite, kExtrudedProfile };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Size parameters for one shape instance. Canonical frame: x lateral,
/// y forward (heading), z up; every generated shape is bilaterally symmetric
/// about the x = 0 plane. Fields unused by a kind are ignored.
struct ShapeParams {
  float length = 4.5f;  // y extent of the body
  float width = 1.9f;   // x extent
  float height = 1.6f;  // z extent of the body

  // Cabin bump (box and ellipsoid composites). cabin_height == 0 disables it.
  float cabin_length_ratio = 0.3f;  // cabin y semi-axis as fraction of length/2
  float cabin_width_ratio = 0.7f;   // cabin x semi-axis as fraction of width/2
  float cabin_height = 0.6f;        // cabin z semi-axis, meters
  float cabin_offset_y = 0.5f;      // cabin center shift along heading

  // Ellipsoid composite only: +y body semi-axis as a fraction of the -y one,
  // making the body egg-shaped. 1 keeps it fore-aft symmetric.
  float body_front_ratio = 1.0f;

  // Box composite only: lowered hood section at the +y end. step_length_ratio
  // is its share of the total length (0 disables it), step_height_ratio its
  // height relative to the body.
  float step_length_ratio = 0.0f;
  float step_height_ratio = 1.0f;

  // Convex silhouette (extruded profile), heights relative to the body box.
  float nose_z = -0.1f;      // top of the front face
  float tail_z = 0.3f;       // top of the rear face
  float top_front_y = 0.4f;  // front end of the roof line
  float top_rear_y = -0.8f;  // rear end of the roof line
};

/// Uniform-area surface samples of the composite primitive.
Points3f gen_shape(ShapeKind kind, const ShapeParams& params, Eigen::Index n_points,
                   RngStream& rng);

/// Vehicle-like random parameters. With fore_aft_symmetric the shape is also
/// invariant under a 180 degree yaw, which makes its pose deliberately
/// ambiguous (used to probe multi-branch behavior).
ShapeParams draw_shape_params(ShapeKind kind, RngStream& rng, bool fore_aft_symmetric = false);

}  // namespace pcw
