#pragma once

#include "chmp/errors.hpp"
#include "chmp/types.hpp"

namespace chmp {

/// Pinhole camera. Effective focal length is f * scale; the scale knob exists
/// so alignment can rescale a sequence uniformly without touching f.
struct Camera {
  double f = 100.0;
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;
  Mat3 R = Mat3::Identity();  // world-to-camera
  Vec3 t = Vec3::Zero();

  void validate() const {
    if (!(f * scale > 0.0)) throw InvalidArgumentError("camera: f*scale must be positive");
    if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
      throw InvalidArgumentError("camera: R is not orthonormal");
  }
};

struct Projected {
  double u = 0.0;
  double v = 0.0;
  double z_cam = 0.0;
  bool behind = false;  // z_cam <= 1e-9: culled, not an error
};

inline Projected project(const Camera& cam, const Vec3& point) {
  const Vec3 p = cam.R * point + cam.t;
  Projected out;
  out.z_cam = p.z();
  if (p.z() <= 1e-9) {
    out.behind = true;
    return out;
  }
  const double fe = cam.f * cam.scale;
  out.u = fe * p.x() / p.z() + cam.cx;
  out.v = fe * p.y() / p.z() + cam.cy;
  return out;
}

}  // namespace chmp
