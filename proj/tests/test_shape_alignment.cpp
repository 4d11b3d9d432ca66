#include <doctest.h>

#include <cmath>

#include "chmp/errors.hpp"
#include "chmp/motion.hpp"
#include "chmp/rng.hpp"

using namespace chmp;

namespace {

Camera front_camera() {
  Camera cam;
  cam.f = 200.0;
  cam.cx = 128.0;
  cam.cy = 128.0;
  cam.t = Vec3(0.0, -0.6, 3.0);  // body tube spans y in [0, 1.2] at z = 3
  return cam;
}

MotionSequence make_motion(int num_frames, Eigen::Index num_joints, Eigen::Index num_shapes) {
  MotionSequence motion;
  motion.fps = 24.0;
  motion.source_shape.beta = VecX::Zero(num_shapes);
  motion.source_shape.beta[0] = 0.7;
  CounterRng rng(42);
  for (int f = 0; f < num_frames; ++f) {
    MotionFrame frame;
    frame.pose = PoseParams::zeros(num_joints);
    for (Eigen::Index j = 0; j < num_joints; ++j)
      frame.pose.theta.row(j) << 0.2 * rng.next_normal(), 0.2 * rng.next_normal(),
          0.2 * rng.next_normal();
    frame.camera = front_camera();
    frame.camera.cx += f;  // slight per-frame variation
    motion.frames.push_back(frame);
  }
  return motion;
}

}  // namespace

TEST_CASE("align_sequence replaces the shape and copies everything else verbatim") {
  const MotionSequence motion = make_motion(4, 5, 10);
  ShapeParams ref{VecX::Zero(10)};
  ref.beta[2] = -1.3;

  const AlignedSequence aligned = align_sequence(ref, motion);
  CHECK(aligned.fps == motion.fps);
  CHECK((aligned.shape.beta - ref.beta).norm() == 0.0);
  REQUIRE(aligned.frames.size() == motion.frames.size());
  for (std::size_t f = 0; f < motion.frames.size(); ++f) {
    CHECK((aligned.frames[f].pose.theta - motion.frames[f].pose.theta).norm() == 0.0);
    CHECK(aligned.frames[f].camera.f == motion.frames[f].camera.f);
    CHECK(aligned.frames[f].camera.cx == motion.frames[f].camera.cx);
    CHECK(aligned.frames[f].camera.cy == motion.frames[f].camera.cy);
    CHECK(aligned.frames[f].camera.scale == motion.frames[f].camera.scale);
    CHECK((aligned.frames[f].camera.R - motion.frames[f].camera.R).norm() == 0.0);
    CHECK((aligned.frames[f].camera.t - motion.frames[f].camera.t).norm() == 0.0);
  }

  CHECK_THROWS_AS(align_sequence(ref, MotionSequence{}), InvalidArgumentError);
}

TEST_CASE("projected_bbox brackets every visible vertex projection") {
  const BodyModel model = make_toy_body();
  const MotionSequence motion = make_motion(1, model.num_joints(), model.num_shapes());
  ShapeParams ref{VecX::Zero(model.num_shapes())};

  const PixelRect box = projected_bbox(model, ref, motion.frames[0]);
  CHECK(box.width > 0.0);
  CHECK(box.height > 0.0);

  const PosedMesh mesh = evaluate_body(model, ref, motion.frames[0].pose);
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    const Projected p = project(motion.frames[0].camera, mesh.vertices.row(i).transpose());
    REQUIRE(!p.behind);
    CHECK(p.u >= box.x - 1e-9);
    CHECK(p.u <= box.x + box.width + 1e-9);
    CHECK(p.v >= box.y - 1e-9);
    CHECK(p.v <= box.y + box.height + 1e-9);
  }
}

TEST_CASE("projected_bbox throws when the body is behind the camera") {
  const BodyModel model = make_toy_body();
  MotionFrame frame;
  frame.pose = PoseParams::zeros(model.num_joints());
  frame.camera = front_camera();
  frame.camera.t.z() = -3.0;
  CHECK_THROWS_AS(projected_bbox(model, ShapeParams{VecX::Zero(model.num_shapes())}, frame),
                  AlignmentError);
}

TEST_CASE("fit_camera_scale matches the reference bbox height and center on the anchor") {
  const BodyModel model = make_toy_body();
  const MotionSequence motion = make_motion(3, model.num_joints(), model.num_shapes());
  const AlignedSequence aligned =
      align_sequence(ShapeParams{VecX::Zero(model.num_shapes())}, motion);

  const PixelRect ref{40.0, 30.0, 90.0, 180.0};
  const AlignedSequence fitted = fit_camera_scale(ref, aligned, model, 0);

  const PixelRect box = projected_bbox(model, fitted.shape, fitted.frames[0]);
  CHECK(std::abs(box.height - ref.height) < 1e-6);
  CHECK(std::abs((box.x + 0.5 * box.width) - (ref.x + 0.5 * ref.width)) < 1e-6);
  CHECK(std::abs((box.y + 0.5 * box.height) - (ref.y + 0.5 * ref.height)) < 1e-6);

  // the correction is uniform: every frame gets the same scale factor and shift
  const double s = fitted.frames[0].camera.scale / aligned.frames[0].camera.scale;
  const double du = fitted.frames[0].camera.cx - aligned.frames[0].camera.cx;
  const double dv = fitted.frames[0].camera.cy - aligned.frames[0].camera.cy;
  for (std::size_t f = 1; f < fitted.frames.size(); ++f) {
    CHECK(fitted.frames[f].camera.scale / aligned.frames[f].camera.scale ==
          doctest::Approx(s).epsilon(1e-12));
    CHECK(fitted.frames[f].camera.cx - aligned.frames[f].camera.cx ==
          doctest::Approx(du).epsilon(1e-12));
    CHECK(fitted.frames[f].camera.cy - aligned.frames[f].camera.cy ==
          doctest::Approx(dv).epsilon(1e-12));
  }

  // poses untouched
  for (std::size_t f = 0; f < fitted.frames.size(); ++f)
    CHECK((fitted.frames[f].pose.theta - aligned.frames[f].pose.theta).norm() == 0.0);
}

TEST_CASE("fit_camera_scale is idempotent") {
  const BodyModel model = make_toy_body();
  const MotionSequence motion = make_motion(2, model.num_joints(), model.num_shapes());
  const AlignedSequence aligned =
      align_sequence(ShapeParams{VecX::Zero(model.num_shapes())}, motion);

  const PixelRect ref{10.0, 20.0, 60.0, 150.0};
  const AlignedSequence once = fit_camera_scale(ref, aligned, model, 0);
  const AlignedSequence twice = fit_camera_scale(ref, once, model, 0);
  for (std::size_t f = 0; f < once.frames.size(); ++f) {
    CHECK(std::abs(twice.frames[f].camera.scale - once.frames[f].camera.scale) < 1e-9);
    CHECK(std::abs(twice.frames[f].camera.cx - once.frames[f].camera.cx) < 1e-6);
    CHECK(std::abs(twice.frames[f].camera.cy - once.frames[f].camera.cy) < 1e-6);
  }
}

TEST_CASE("fit_camera_scale result is independent of the input scale") {
  const BodyModel model = make_toy_body();
  const MotionSequence motion = make_motion(2, model.num_joints(), model.num_shapes());
  AlignedSequence a = align_sequence(ShapeParams{VecX::Zero(model.num_shapes())}, motion);

  AlignedSequence b = a;
  for (MotionFrame& f : b.frames) f.camera.scale *= 3.7;

  const PixelRect ref{15.0, 25.0, 70.0, 160.0};
  const AlignedSequence fa = fit_camera_scale(ref, a, model, 0);
  const AlignedSequence fb = fit_camera_scale(ref, b, model, 0);
  for (std::size_t f = 0; f < fa.frames.size(); ++f) {
    CHECK(std::abs(fa.frames[f].camera.scale - fb.frames[f].camera.scale) < 1e-9);
    CHECK(std::abs(fa.frames[f].camera.cx - fb.frames[f].camera.cx) < 1e-6);
    CHECK(std::abs(fa.frames[f].camera.cy - fb.frames[f].camera.cy) < 1e-6);
  }
}

TEST_CASE("fit_camera_scale honors the anchor frame index") {
  const BodyModel model = make_toy_body();
  const MotionSequence motion = make_motion(3, model.num_joints(), model.num_shapes());
  const AlignedSequence aligned =
      align_sequence(ShapeParams{VecX::Zero(model.num_shapes())}, motion);

  const PixelRect ref{0.0, 0.0, 100.0, 120.0};
  const AlignedSequence fitted = fit_camera_scale(ref, aligned, model, 2);
  const PixelRect box = projected_bbox(model, fitted.shape, fitted.frames[2]);
  CHECK(std::abs(box.height - ref.height) < 1e-6);
  CHECK(std::abs((box.x + 0.5 * box.width) - (ref.x + 0.5 * ref.width)) < 1e-6);
}

TEST_CASE("fit_camera_scale rejects bad inputs") {
  const BodyModel model = make_toy_body();
  const MotionSequence motion = make_motion(2, model.num_joints(), model.num_shapes());
  const AlignedSequence aligned =
      align_sequence(ShapeParams{VecX::Zero(model.num_shapes())}, motion);

  CHECK_THROWS_AS(fit_camera_scale(PixelRect{0, 0, 10, 0}, aligned, model, 0),
                  InvalidArgumentError);
  CHECK_THROWS_AS(fit_camera_scale(PixelRect{0, 0, 0, 10}, aligned, model, 0),
                  InvalidArgumentError);
  CHECK_THROWS_AS(fit_camera_scale(PixelRect{0, 0, 10, 10}, aligned, model, 5),
                  InvalidArgumentError);

  AlignedSequence behind = aligned;
  for (MotionFrame& f : behind.frames) f.camera.t.z() = -3.0;
  CHECK_THROWS_AS(fit_camera_scale(PixelRect{0, 0, 10, 10}, behind, model, 0), AlignmentError);
}
