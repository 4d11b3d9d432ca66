#include "chmp/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "chmp/image_io.hpp"

namespace chmp {

std::string frame_file(const std::string& dir, int frame, const std::string& layer,
                       const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d_", frame);
  return dir + "/" + buf + layer + "." + ext;
}

FrameMeta write_frame_outputs(const std::string& dir, int frame, const GuidanceMaps& maps,
                              std::uint32_t num_parts) {
  const int w = maps.width;
  const int h = maps.height;

  FrameMeta meta;
  meta.num_parts = num_parts;
  meta.width = w;
  meta.height = h;
  meta.depth_min = std::numeric_limits<double>::infinity();
  meta.depth_max = -std::numeric_limits<double>::infinity();
  for (double d : maps.depth) {
    if (d >= kDepthBackground) continue;
    meta.has_foreground = true;
    meta.depth_min = std::min(meta.depth_min, d);
    meta.depth_max = std::max(meta.depth_max, d);
  }
  if (!meta.has_foreground) {
    meta.depth_min = 0.0;
    meta.depth_max = 0.0;
  }

  // depth PNG: near = bright, background = 0
  MatX depth_img = MatX::Zero(h, w);
  const double range = meta.depth_max - meta.depth_min;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = maps.depth_at(x, y);
      if (d >= kDepthBackground) continue;
      depth_img(y, x) = range > 0.0 ? (meta.depth_max - d) / range : 1.0;
    }
  write_gray_png(frame_file(dir, frame, "depth", "png"), depth_img);

  std::vector<double> normal_img(maps.normal.size());
  for (std::size_t i = 0; i < maps.normal.size(); ++i)
    normal_img[i] = 0.5 * (maps.normal[i] + 1.0);
  // keep background pixels black in the export
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (maps.semantic_at(x, y) == 0)
        for (int c = 0; c < 3; ++c)
          normal_img[3 * static_cast<std::size_t>(y * w + x) + static_cast<std::size_t>(c)] = 0.0;
  write_rgb_png(frame_file(dir, frame, "normal", "png"), normal_img, w, h);

  write_indexed_png(frame_file(dir, frame, "semantic", "png"), maps.semantic, w, h,
                    semantic_palette(num_parts));
  write_rgb_png(frame_file(dir, frame, "skeleton", "png"), maps.skeleton, w, h);

  write_maps_f32(frame_file(dir, frame, "depth", "f32"), maps.depth, 1, h, w);
  write_maps_f32(frame_file(dir, frame, "normal", "f32"), maps.normal, 3, h, w);
  std::vector<double> semantic_f(maps.semantic.begin(), maps.semantic.end());
  write_maps_f32(frame_file(dir, frame, "semantic", "f32"), semantic_f, 1, h, w);
  write_maps_f32(frame_file(dir, frame, "skeleton", "f32"), maps.skeleton, 3, h, w);

  nlohmann::json j{{"depth_min", meta.depth_min},
                   {"depth_max", meta.depth_max},
                   {"has_foreground", meta.has_foreground},
                   {"num_parts", meta.num_parts},
                   {"width", meta.width},
                   {"height", meta.height}};
  const std::string meta_path = frame_file(dir, frame, "meta", "json");
  std::ofstream os(meta_path);
  if (!os) throw IoError("cannot open for writing: " + meta_path);
  os << j.dump(2) << "\n";
  return meta;
}

FrameMeta read_frame_meta(const std::string& dir, int frame) {
  const std::string path = frame_file(dir, frame, "meta", "json");
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  nlohmann::json j;
  is >> j;
  FrameMeta meta;
  meta.depth_min = j.at("depth_min").get<double>();
  meta.depth_max = j.at("depth_max").get<double>();
  meta.has_foreground = j.at("has_foreground").get<bool>();
  meta.num_parts = j.at("num_parts").get<std::uint32_t>();
  meta.width = j.at("width").get<int>();
  meta.height = j.at("height").get<int>();
  return meta;
}

Tensor4 box_downsample(const Tensor4& input, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0 || input.h % target_h != 0 || input.w % target_w != 0)
    throw DimensionError("box_downsample: target dims must divide the source dims");
  const int fy = input.h / target_h;
  const int fx = input.w / target_w;
  const double inv = 1.0 / static_cast<double>(fy * fx);
  Tensor4 out(input.n, input.c, target_h, target_w);
  for (int b = 0; b < input.n; ++b)
    for (int c = 0; c < input.c; ++c)
      for (int ty = 0; ty < target_h; ++ty)
        for (int tx = 0; tx < target_w; ++tx) {
          double acc = 0.0;
          for (int dy = 0; dy < fy; ++dy)
            for (int dx = 0; dx < fx; ++dx) acc += input.at(b, c, ty * fy + dy, tx * fx + dx);
          out.at(b, c, ty, tx) = acc * inv;
        }
  return out;
}

namespace {

Tensor4 planes_to_tensor(const MapsF32& maps) {
  Tensor4 t(1, maps.channels, maps.height, maps.width);
  t.data = maps.data;
  return t;
}

}  // namespace

GuidanceBundle load_condition_bundle(const std::string& dir, int frame, int target_h,
                                     int target_w) {
  const FrameMeta meta = read_frame_meta(dir, frame);
  GuidanceBundle bundle;

  {
    const MapsF32 depth = read_maps_f32(frame_file(dir, frame, "depth", "f32"));
    Tensor4 img(1, 3, depth.height, depth.width);
    const double range = meta.depth_max - meta.depth_min;
    for (int y = 0; y < depth.height; ++y)
      for (int x = 0; x < depth.width; ++x) {
        const double d = depth.data[static_cast<std::size_t>(y * depth.width + x)];
        double v = 0.0;
        if (d < kDepthBackground * 0.5)
          v = range > 0.0 ? (meta.depth_max - d) / range : 1.0;
        for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = v;
      }
    bundle["depth"] = box_downsample(img, target_h, target_w);
  }

  {
    const MapsF32 normal = read_maps_f32(frame_file(dir, frame, "normal", "f32"));
    Tensor4 img = planes_to_tensor(normal);
    for (double& v : img.data) v = 0.5 * (v + 1.0);
    bundle["normal"] = box_downsample(img, target_h, target_w);
  }

  {
    const MapsF32 semantic = read_maps_f32(frame_file(dir, frame, "semantic", "f32"));
    const auto palette = semantic_palette(meta.num_parts);
    Tensor4 img(1, 3, semantic.height, semantic.width);
    for (int y = 0; y < semantic.height; ++y)
      for (int x = 0; x < semantic.width; ++x) {
        const auto idx = static_cast<std::size_t>(
            semantic.data[static_cast<std::size_t>(y * semantic.width + x)]);
        if (idx >= palette.size())
          throw InvalidArgumentError("semantic dump: label outside palette at frame " +
                                     std::to_string(frame));
        for (int c = 0; c < 3; ++c)
          img.at(0, c, y, x) = static_cast<double>(palette[idx][static_cast<std::size_t>(c)]) / 255.0;
      }
    bundle["semantic"] = box_downsample(img, target_h, target_w);
  }

  {
    const MapsF32 skeleton = read_maps_f32(frame_file(dir, frame, "skeleton", "f32"));
    bundle["skeleton"] = box_downsample(planes_to_tensor(skeleton), target_h, target_w);
  }
  return bundle;
}

GuidanceNets make_guidance_nets(const GuidanceNetConfig& config, std::uint64_t seed) {
  GuidanceNets nets;
  std::uint64_t salt = 1;
  for (const std::string& name : condition_order()) {
    nets.emplace(name, GuidanceNet(config, seed ^ (salt * 0x9e3779b97f4a7c15ULL)));
    ++salt;
  }
  return nets;
}

}  // namespace chmp
