#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "chmp/body_model.hpp"
#include "chmp/camera.hpp"

namespace chmp {

/// Background depth sentinel; exported images map background to 0.
inline constexpr double kDepthBackground = 1e30;

/// Four aligned image-space condition layers rendered from one posed body.
/// depth: camera-space z (meters), background = kDepthBackground.
/// normal: camera-space unit normals, background = (0,0,0).
/// semantic: part label + 1, background = 0.
/// skeleton: RGB in [0,1], background black.
struct GuidanceMaps {
  int width = 0;
  int height = 0;
  std::vector<double> depth;     // H*W
  std::vector<double> normal;    // H*W*3
  std::vector<std::uint32_t> semantic;  // H*W
  std::vector<double> skeleton;  // H*W*3

  static GuidanceMaps background(int width, int height);

  double& depth_at(int x, int y) { return depth[static_cast<std::size_t>(y * width + x)]; }
  double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y * width + x)]; }
  std::uint32_t semantic_at(int x, int y) const {
    return semantic[static_cast<std::size_t>(y * width + x)];
  }
  double normal_at(int x, int y, int c) const {
    return normal[static_cast<std::size_t>(3 * (y * width + x) + c)];
  }
};

struct RasterOptions {
  bool backface_cull = true;  // disable for open toy meshes
};

/// Z-buffered triangle rasterization with perspective-correct interpolation.
/// Pixel (x, y) samples at center (x+0.5, y+0.5). Triangles with any vertex
/// behind the camera are culled whole; there is no near-plane clipping.
/// The skeleton layer is left blank.
GuidanceMaps rasterize_mesh(const PosedMesh& mesh, const Camera& camera, int width, int height,
                            const RasterOptions& opts = {});

struct SkeletonStyle {
  double line_width = 3.0;  // pixels
  double joint_radius = 4.0;
};

/// Fixed bone/joint palette, RGB in [0,1]; index wraps around.
Vec3 skeleton_palette(std::size_t index);

/// Anti-aliased bone segments and joint discs drawn into an H*W*3 buffer.
/// Joints behind the camera (and bones touching them) are skipped.
std::vector<double> render_skeleton(const Points3& joints,
                                    const std::vector<std::pair<int, int>>& bones,
                                    const Camera& camera, int width, int height,
                                    const SkeletonStyle& style = {});

/// Bones of a kinematic tree: (parent, child) for every non-root joint.
std::vector<std::pair<int, int>> bones_from_parents(const std::vector<std::int32_t>& parents);

}  // namespace chmp
