#include "chmp/motion.hpp"

#include <fstream>
#include <iostream>
#include <limits>

#include <json.hpp>

#include "chmp/errors.hpp"

namespace chmp {

AlignedSequence align_sequence(const ShapeParams& beta_ref, const MotionSequence& motion) {
  if (motion.frames.empty()) throw InvalidArgumentError("align_sequence: empty motion sequence");
  AlignedSequence out;
  out.shape = beta_ref;
  out.frames = motion.frames;
  out.fps = motion.fps;
  return out;
}

PixelRect projected_bbox(const BodyModel& model, const ShapeParams& shape,
                         const MotionFrame& frame) {
  const PosedMesh mesh = evaluate_body(model, shape, frame.pose);
  double min_u = std::numeric_limits<double>::infinity();
  double max_u = -std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    const Projected p = project(frame.camera, mesh.vertices.row(i).transpose());
    if (p.behind) continue;
    any = true;
    min_u = std::min(min_u, p.u);
    max_u = std::max(max_u, p.u);
    min_v = std::min(min_v, p.v);
    max_v = std::max(max_v, p.v);
  }
  if (!any) throw AlignmentError("projected_bbox: body is entirely behind the camera");
  return PixelRect{min_u, min_v, max_u - min_u, max_v - min_v};
}

AlignedSequence fit_camera_scale(const PixelRect& reference_bbox, const AlignedSequence& aligned,
                                 const BodyModel& model, int frame_index) {
  if (!(reference_bbox.width > 0.0 && reference_bbox.height > 0.0))
    throw InvalidArgumentError("fit_camera_scale: reference bbox must have positive size");
  if (frame_index < 0 || frame_index >= static_cast<int>(aligned.frames.size()))
    throw InvalidArgumentError("fit_camera_scale: frame_index out of range");

  const MotionFrame& anchor = aligned.frames[static_cast<std::size_t>(frame_index)];
  const PixelRect box = projected_bbox(model, aligned.shape, anchor);
  if (!(box.height > 1e-12))
    throw AlignmentError("fit_camera_scale: projected bbox has zero height");

  const double s = reference_bbox.height / box.height;

  // Re-project the anchor with the corrected scale to place the bbox center.
  MotionFrame scaled_anchor = anchor;
  scaled_anchor.camera.scale *= s;
  const PixelRect scaled_box = projected_bbox(model, aligned.shape, scaled_anchor);
  const double du = (reference_bbox.x + 0.5 * reference_bbox.width) -
                    (scaled_box.x + 0.5 * scaled_box.width);
  const double dv = (reference_bbox.y + 0.5 * reference_bbox.height) -
                    (scaled_box.y + 0.5 * scaled_box.height);

  AlignedSequence out = aligned;
  for (MotionFrame& f : out.frames) {
    f.camera.scale *= s;
    f.camera.cx += du;
    f.camera.cy += dv;
  }
  return out;
}

namespace {

using nlohmann::json;

void warn_unknown(const json& obj, std::initializer_list<const char*> known,
                  const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool found = false;
    for (const char* k : known)
      if (it.key() == k) found = true;
    if (!found)
      std::cerr << "warning: motion file: ignoring unknown field '" << it.key() << "' in "
                << where << "\n";
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw InvalidArgumentError("motion file: missing field '" + std::string(key) + "' in " +
                               where);
  return *it;
}

Camera camera_from_json(const json& jc, const std::string& where) {
  warn_unknown(jc, {"f", "cx", "cy", "scale", "R", "t"}, where);
  Camera cam;
  cam.f = require(jc, "f", where).get<double>();
  cam.cx = require(jc, "cx", where).get<double>();
  cam.cy = require(jc, "cy", where).get<double>();
  cam.scale = require(jc, "scale", where).get<double>();
  const auto r = require(jc, "R", where).get<std::vector<double>>();
  const auto t = require(jc, "t", where).get<std::vector<double>>();
  if (r.size() != 9) throw InvalidArgumentError("motion file: camera R needs 9 values in " + where);
  if (t.size() != 3) throw InvalidArgumentError("motion file: camera t needs 3 values in " + where);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cam.R(i, j) = r[static_cast<std::size_t>(3 * i + j)];
  cam.t = Vec3(t[0], t[1], t[2]);
  cam.validate();
  return cam;
}

json camera_to_json(const Camera& cam) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(3 * i + j)] = cam.R(i, j);
  return json{{"f", cam.f},         {"cx", cam.cx}, {"cy", cam.cy},
              {"scale", cam.scale}, {"R", r},       {"t", {cam.t.x(), cam.t.y(), cam.t.z()}}};
}

json parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw InvalidArgumentError(path + ": " + e.what());
  }
  return j;
}

}  // namespace

MotionSequence load_motion(const std::string& path) {
  const json j = parse_file(path);
  warn_unknown(j, {"fps", "shape", "frames"}, path);
  MotionSequence motion;
  motion.fps = require(j, "fps", path).get<double>();
  if (!(motion.fps > 0.0)) throw InvalidArgumentError("motion file: fps must be positive");
  const auto shape = require(j, "shape", path).get<std::vector<double>>();
  motion.source_shape.beta = Eigen::Map<const VecX>(shape.data(), static_cast<Eigen::Index>(shape.size()));

  const json& frames = require(j, "frames", path);
  if (!frames.is_array() || frames.empty())
    throw InvalidArgumentError("motion file: frames must be a nonempty array");
  Eigen::Index joints = -1;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string where = path + " frames[" + std::to_string(i) + "]";
    const json& jf = frames[i];
    warn_unknown(jf, {"theta", "camera"}, where);
    MotionFrame frame;
    const json& theta = require(jf, "theta", where);
    if (!theta.is_array() || theta.empty())
      throw InvalidArgumentError("motion file: theta must be a nonempty array in " + where);
    if (joints == -1) joints = static_cast<Eigen::Index>(theta.size());
    if (static_cast<Eigen::Index>(theta.size()) != joints)
      throw InvalidArgumentError("motion file: inconsistent joint count in " + where);
    frame.pose.theta.resize(joints, 3);
    for (Eigen::Index k = 0; k < joints; ++k) {
      const auto row = theta[static_cast<std::size_t>(k)].get<std::vector<double>>();
      if (row.size() != 3)
        throw InvalidArgumentError("motion file: theta rows need 3 values in " + where);
      frame.pose.theta.row(k) << row[0], row[1], row[2];
    }
    frame.camera = camera_from_json(require(jf, "camera", where), where);
    motion.frames.push_back(std::move(frame));
  }
  return motion;
}

void save_motion(const MotionSequence& motion, const std::string& path) {
  json j;
  j["fps"] = motion.fps;
  j["shape"] = std::vector<double>(motion.source_shape.beta.data(),
                                   motion.source_shape.beta.data() + motion.source_shape.beta.size());
  json frames = json::array();
  for (const MotionFrame& f : motion.frames) {
    json theta = json::array();
    for (Eigen::Index k = 0; k < f.pose.theta.rows(); ++k)
      theta.push_back({f.pose.theta(k, 0), f.pose.theta(k, 1), f.pose.theta(k, 2)});
    frames.push_back(json{{"theta", theta}, {"camera", camera_to_json(f.camera)}});
  }
  j["frames"] = std::move(frames);
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

ShapeParams load_shape(const std::string& path) {
  const json j = parse_file(path);
  warn_unknown(j, {"beta"}, path);
  const auto beta = require(j, "beta", path).get<std::vector<double>>();
  ShapeParams shape;
  shape.beta = Eigen::Map<const VecX>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  if (!shape.beta.allFinite()) throw InvalidArgumentError("shape file: non-finite beta");
  return shape;
}

}  // namespace chmp
