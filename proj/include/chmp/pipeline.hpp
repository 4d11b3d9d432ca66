#pragma once

#include <optional>
#include <string>

#include "chmp/diffusion.hpp"
#include "chmp/motion.hpp"
#include "chmp/rasterizer.hpp"

namespace chmp {

/// File name of a per-frame artifact, e.g. frame_0003_depth.f32.
std::string frame_file(const std::string& dir, int frame, const std::string& layer,
                       const std::string& ext);

/// Per-frame depth normalization record (written to the metadata sidecar so
/// exports stay invertible).
struct FrameMeta {
  double depth_min = 0.0;
  double depth_max = 0.0;
  bool has_foreground = false;
  std::uint32_t num_parts = 0;
  int width = 0;
  int height = 0;
};

/// Writes the four PNG exports, four CHMPMAPS f32 dumps and the JSON sidecar
/// for one rendered frame. Depth PNG uses d_norm = (d_max - d)/(d_max - d_min)
/// over foreground, background 0; f32 dumps are lossless (sentinel included).
FrameMeta write_frame_outputs(const std::string& dir, int frame, const GuidanceMaps& maps,
                              std::uint32_t num_parts);

FrameMeta read_frame_meta(const std::string& dir, int frame);

/// Box-average downsample; target dims must divide the source dims.
Tensor4 box_downsample(const Tensor4& input, int target_h, int target_w);

/// Rebuild the encoder inputs for one frame from its f32 dumps: every
/// condition becomes a 3-channel [0,1] image (depth normalized + replicated,
/// normals remapped to [0,1], semantic palette-decoded, skeleton as-is),
/// box-downsampled to target_h x target_w.
GuidanceBundle load_condition_bundle(const std::string& dir, int frame, int target_h,
                                     int target_w);

/// One guidance net per canonical condition, deterministically seeded per
/// name; output layers start at exactly zero.
GuidanceNets make_guidance_nets(const GuidanceNetConfig& config, std::uint64_t seed);

}  // namespace chmp
