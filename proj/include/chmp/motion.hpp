#pragma once

#include <string>
#include <vector>

#include "chmp/body_model.hpp"
#include "chmp/camera.hpp"

namespace chmp {

struct MotionFrame {
  PoseParams pose;
  Camera camera;
};

/// Per-frame pose + camera record of a driving video, plus the driving
/// subject's own shape (kept for provenance).
struct MotionSequence {
  std::vector<MotionFrame> frames;
  ShapeParams source_shape;
  double fps = 30.0;
};

/// Motion re-shaped to the reference subject: one shared beta, poses copied
/// from the source frame by frame.
struct AlignedSequence {
  ShapeParams shape;
  std::vector<MotionFrame> frames;
  double fps = 30.0;
};

struct PixelRect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
};

/// Rebuild the sequence with the reference shape; poses and cameras are
/// copied unchanged.
AlignedSequence align_sequence(const ShapeParams& beta_ref, const MotionSequence& motion);

/// Uniform camera correction from one anchor frame: multiplies every frame's
/// camera scale by reference_bbox.height / projected_bbox.height and shifts
/// the principal point so bbox centers coincide. Throws AlignmentError when
/// the projected bbox is degenerate.
AlignedSequence fit_camera_scale(const PixelRect& reference_bbox, const AlignedSequence& aligned,
                                 const BodyModel& model, int frame_index = 0);

/// Bbox of the projected posed-mesh vertices of one frame (points behind the
/// camera excluded). Throws AlignmentError if nothing projects.
PixelRect projected_bbox(const BodyModel& model, const ShapeParams& shape,
                         const MotionFrame& frame);

/// JSON motion file: {fps, shape: [S], frames: [{theta: [[3]xK],
/// camera: {f, cx, cy, scale, R: [9], t: [3]}}]}. Unknown fields warn on
/// stderr; missing fields throw.
MotionSequence load_motion(const std::string& path);
void save_motion(const MotionSequence& motion, const std::string& path);

/// Reference shape file: {"beta": [S reals]}.
ShapeParams load_shape(const std::string& path);

}  // namespace chmp
