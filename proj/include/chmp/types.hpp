#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace chmp {

using Scalar = double;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Row-major point/normal lists, one entity per row.
using Points3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Rigid transform as a 3x4 [R | t] block pair.
struct Rigid {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Rigid compose(const Rigid& other) const { return {R * other.R, R * other.t + t}; }
  Rigid inverse() const {
    Mat3 Rt = R.transpose();
    return {Rt, -(Rt * t)};
  }
};

}  // namespace chmp
