#include "chmp/body_model.hpp"

#include <cmath>

#include "chmp/errors.hpp"

namespace chmp {

void BodyModel::validate() const {
  const Eigen::Index v = num_vertices();
  const Eigen::Index k = num_joints();
  if (v <= 0 || k <= 0) throw InvalidArgumentError("body model: empty vertex or joint set");
  if (skin_weights.rows() != v)
    throw DimensionError("body model: skin_weights rows != vertex count");
  if (joint_regressor.rows() != k || joint_regressor.cols() != v)
    throw DimensionError("body model: joint_regressor must be K x V");
  if (static_cast<Eigen::Index>(parents.size()) != k)
    throw DimensionError("body model: parents size != joint count");
  if (static_cast<Eigen::Index>(part_labels.size()) != v)
    throw DimensionError("body model: part_labels size != vertex count");
  for (const auto& sd : shape_dirs)
    if (sd.rows() != v || sd.cols() != 3)
      throw DimensionError("body model: shape_dirs entry must be V x 3");
  if (!pose_dirs.empty() &&
      static_cast<Eigen::Index>(pose_dirs.size()) != 9 * (k - 1))
    throw DimensionError("body model: pose_dirs count must be 9*(K-1)");
  for (const auto& pd : pose_dirs)
    if (pd.rows() != v || pd.cols() != 3)
      throw DimensionError("body model: pose_dirs entry must be V x 3");

  for (Eigen::Index i = 0; i < v; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double w = skin_weights(i, j);
      if (w < 0.0)
        throw InvalidArgumentError("body model: negative skin weight at vertex " +
                                   std::to_string(i));
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw InvalidArgumentError("body model: skin weights of vertex " + std::to_string(i) +
                                 " sum to " + std::to_string(sum) + ", expected 1");
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const double sum = joint_regressor.row(j).sum();
    if (std::abs(sum - 1.0) > 1e-9)
      throw InvalidArgumentError("body model: joint_regressor row " + std::to_string(j) +
                                 " sums to " + std::to_string(sum) + ", expected 1");
  }
  if (parents[0] != -1) throw InvalidArgumentError("body model: parents[0] must be -1");
  for (Eigen::Index j = 1; j < k; ++j) {
    if (parents[j] < 0 || parents[j] >= j)
      throw InvalidArgumentError("body model: parents[" + std::to_string(j) +
                                 "] = " + std::to_string(parents[j]) +
                                 " breaks the topological order (need 0 <= parent < joint)");
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f)
    for (int c = 0; c < 3; ++c)
      if (faces(f, c) >= static_cast<std::uint32_t>(v))
        throw InvalidArgumentError("body model: face " + std::to_string(f) +
                                   " references vertex " + std::to_string(faces(f, c)) +
                                   " >= V");
  for (Eigen::Index i = 0; i < v; ++i)
    if (part_labels[i] >= num_parts)
      throw InvalidArgumentError("body model: part label " + std::to_string(part_labels[i]) +
                                 " at vertex " + std::to_string(i) + " >= " +
                                 std::to_string(num_parts));
}

Mat3 rodrigues(const Vec3& axis_angle) {
  if (!axis_angle.allFinite()) throw InvalidArgumentError("rodrigues: non-finite axis-angle");
  const double angle = axis_angle.norm();
  Mat3 K;
  K << 0, -axis_angle.z(), axis_angle.y(),
       axis_angle.z(), 0, -axis_angle.x(),
       -axis_angle.y(), axis_angle.x(), 0;
  if (angle < 1e-8) {
    // exp(K) ~= I + K + K^2/2 for tiny angles
    return Mat3::Identity() + K + 0.5 * (K * K);
  }
  const Mat3 Kn = K / angle;
  return Mat3::Identity() + std::sin(angle) * Kn + (1.0 - std::cos(angle)) * (Kn * Kn);
}

std::vector<Rigid> forward_kinematics(const BodyModel& model, const Points3& rest_joints,
                                      const std::vector<Mat3>& local_rots) {
  const Eigen::Index k = model.num_joints();
  if (rest_joints.rows() != k || static_cast<Eigen::Index>(local_rots.size()) != k)
    throw DimensionError("forward_kinematics: joint count mismatch");

  std::vector<Rigid> world(static_cast<std::size_t>(k));
  world[0] = Rigid{local_rots[0], rest_joints.row(0).transpose()};
  for (Eigen::Index j = 1; j < k; ++j) {
    const Eigen::Index p = model.parents[j];
    const Vec3 offset = (rest_joints.row(j) - rest_joints.row(p)).transpose();
    world[j] = world[p].compose(Rigid{local_rots[j], offset});
  }
  return world;
}

Points3 regress_joints(const BodyModel& model, const Points3& vertices) {
  if (vertices.rows() != model.num_vertices())
    throw DimensionError("regress_joints: vertex count mismatch");
  return model.joint_regressor * vertices;
}

Points3 vertex_normals(const Points3& vertices, const Faces& faces) {
  Points3 normals = Points3::Zero(vertices.rows(), 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Vec3 a = vertices.row(faces(f, 0)).transpose();
    const Vec3 b = vertices.row(faces(f, 1)).transpose();
    const Vec3 c = vertices.row(faces(f, 2)).transpose();
    const Vec3 n = (b - a).cross(c - a);  // magnitude = 2 * area
    if (n.squaredNorm() == 0.0) continue;
    for (int i = 0; i < 3; ++i) normals.row(faces(f, i)) += n.transpose();
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const double len = normals.row(i).norm();
    if (len > 0.0) normals.row(i) /= len;
  }
  return normals;
}

PosedMesh evaluate_body(const BodyModel& model, const ShapeParams& shape,
                        const PoseParams& pose) {
  const Eigen::Index v = model.num_vertices();
  const Eigen::Index k = model.num_joints();
  if (shape.beta.size() != model.num_shapes())
    throw DimensionError("evaluate_body: beta size != shape_dirs count");
  if (pose.theta.rows() != k) throw DimensionError("evaluate_body: theta rows != joint count");

  // 1. shape blend
  Points3 shaped = model.template_vertices;
  for (Eigen::Index s = 0; s < model.num_shapes(); ++s)
    if (shape.beta[s] != 0.0) shaped += shape.beta[s] * model.shape_dirs[s];

  // 2. rest joints from the shaped template
  const Points3 rest_joints = model.joint_regressor * shaped;

  std::vector<Mat3> rots(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j)
    rots[j] = rodrigues(pose.theta.row(j).transpose());

  // 3. pose correctives, root rotation excluded from the feature vector
  if (model.has_pose_dirs()) {
    for (Eigen::Index j = 1; j < k; ++j) {
      const Mat3 d = rots[j] - Mat3::Identity();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          const double coeff = d(r, c);
          if (coeff != 0.0)
            shaped += coeff * model.pose_dirs[static_cast<std::size_t>(9 * (j - 1) + 3 * r + c)];
        }
    }
  }

  // 4. forward kinematics
  const std::vector<Rigid> world = forward_kinematics(model, rest_joints, rots);

  // 5. linear blend skinning with rest-pose-relative transforms
  std::vector<Rigid> skin(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const Rigid rest{Mat3::Identity(), rest_joints.row(j).transpose()};
    skin[j] = world[j].compose(rest.inverse());
  }

  PosedMesh out;
  out.vertices = Points3::Zero(v, 3);
  for (Eigen::Index i = 0; i < v; ++i) {
    const Vec3 p = shaped.row(i).transpose();
    Vec3 acc = Vec3::Zero();
    for (Eigen::Index j = 0; j < k; ++j) {
      const double w = model.skin_weights(i, j);
      if (w != 0.0) acc += w * skin[j].apply(p);
    }
    out.vertices.row(i) = acc.transpose();
  }

  out.joints.resize(k, 3);
  for (Eigen::Index j = 0; j < k; ++j) out.joints.row(j) = world[j].t.transpose();
  out.per_vertex_normals = vertex_normals(out.vertices, model.faces);
  out.part_labels = model.part_labels;
  out.faces = model.faces;
  return out;
}

}  // namespace chmp
