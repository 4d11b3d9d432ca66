#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chmp/types.hpp"

namespace chmp {

/// Parametric body: rest template plus shape/pose blend shapes, a kinematic
/// tree, skinning weights and per-vertex part labels. Immutable after
/// construction/load; all evaluation functions are pure.
struct BodyModel {
  Points3 template_vertices;            // V x 3, rest pose, meters
  std::vector<MatX> shape_dirs;         // S matrices of V x 3 (per-unit-beta offset)
  std::vector<MatX> pose_dirs;          // P matrices of V x 3, empty when absent
  MatX skin_weights;                    // V x K, rows sum to 1
  MatX joint_regressor;                 // K x V, rows sum to 1
  std::vector<std::int32_t> parents;    // K, parents[0] == -1, parents[i] < i
  std::vector<std::uint32_t> part_labels;  // V, values < num_parts
  std::uint32_t num_parts = 0;
  Faces faces;                          // F x 3

  Eigen::Index num_vertices() const { return template_vertices.rows(); }
  Eigen::Index num_joints() const { return skin_weights.cols(); }
  Eigen::Index num_shapes() const { return static_cast<Eigen::Index>(shape_dirs.size()); }
  bool has_pose_dirs() const { return !pose_dirs.empty(); }

  /// Throws InvalidArgumentError on the first violated structural invariant.
  void validate() const;
};

struct ShapeParams {
  VecX beta;
};

/// Axis-angle per joint, row k = rotation of joint k; row 0 is the global
/// orientation.
struct PoseParams {
  Points3 theta;

  static PoseParams zeros(Eigen::Index k) {
    PoseParams p;
    p.theta = Points3::Zero(k, 3);
    return p;
  }
};

struct PosedMesh {
  Points3 vertices;                 // V x 3, world frame
  Points3 joints;                   // K x 3
  Points3 per_vertex_normals;       // V x 3, unit length
  std::vector<std::uint32_t> part_labels;
  Faces faces;                      // copied from the model for rendering
};

/// Axis-angle to rotation matrix. Angles below 1e-8 use the second-order
/// small-angle expansion.
Mat3 rodrigues(const Vec3& axis_angle);

/// Compose world transforms down the kinematic tree.
/// transform[i] = transform[parents[i]] * translate(rest[i]-rest[parent]) * rotate(R[i]).
std::vector<Rigid> forward_kinematics(const BodyModel& model, const Points3& rest_joints,
                                      const std::vector<Mat3>& local_rots);

/// joint_regressor * vertices.
Points3 regress_joints(const BodyModel& model, const Points3& vertices);

/// Full evaluation: shape blend, joint regression, optional pose correctives,
/// forward kinematics, linear blend skinning, area-weighted vertex normals.
PosedMesh evaluate_body(const BodyModel& model, const ShapeParams& shape,
                        const PoseParams& pose);

/// Area-weighted vertex normals over the given faces, accumulated in face
/// order and normalized; zero-area faces contribute nothing.
Points3 vertex_normals(const Points3& vertices, const Faces& faces);

struct ToyBodyOptions {
  Eigen::Index num_vertices = 100;  // >= 8
  Eigen::Index num_joints = 5;      // >= 2
  Eigen::Index num_shapes = 10;
  bool with_pose_dirs = false;
  Eigen::Index num_parts = 0;       // 0 = one part per joint
};

/// Procedural low-poly humanoid (a segmented tube along +y) satisfying every
/// BodyModel invariant. Deterministic for fixed options.
BodyModel make_toy_body(const ToyBodyOptions& opts = {});

/// Binary body file ("CHMPBODY"): save/load, little-endian f64 arrays.
/// Loader validates all invariants and re-sorts joints topologically when the
/// stored order violates parents[i] < i.
void save_body(const BodyModel& model, const std::string& path);
BodyModel load_body(const std::string& path);

}  // namespace chmp
