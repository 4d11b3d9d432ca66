#include "chmp/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "chmp/errors.hpp"

namespace chmp {

GuidanceMaps GuidanceMaps::background(int width, int height) {
  if (width <= 0 || height <= 0)
    throw InvalidArgumentError("guidance maps: dimensions must be positive");
  GuidanceMaps m;
  m.width = width;
  m.height = height;
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  m.depth.assign(n, kDepthBackground);
  m.normal.assign(3 * n, 0.0);
  m.semantic.assign(n, 0);
  m.skeleton.assign(3 * n, 0.0);
  return m;
}

namespace {

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

GuidanceMaps rasterize_mesh(const PosedMesh& mesh, const Camera& camera, int width, int height,
                            const RasterOptions& opts) {
  GuidanceMaps maps = GuidanceMaps::background(width, height);
  if (mesh.vertices.rows() == 0 || mesh.faces.rows() == 0) return maps;

  const Eigen::Index nv = mesh.vertices.rows();
  Points3 cam_verts(nv, 3);
  Points3 cam_normals(nv, 3);
  for (Eigen::Index i = 0; i < nv; ++i) {
    cam_verts.row(i) = (camera.R * mesh.vertices.row(i).transpose() + camera.t).transpose();
    cam_normals.row(i) = (camera.R * mesh.per_vertex_normals.row(i).transpose()).transpose();
  }
  const double fe = camera.f * camera.scale;

  for (Eigen::Index face = 0; face < mesh.faces.rows(); ++face) {
    const std::uint32_t i0 = mesh.faces(face, 0);
    const std::uint32_t i1 = mesh.faces(face, 1);
    const std::uint32_t i2 = mesh.faces(face, 2);
    const Vec3 p0 = cam_verts.row(i0).transpose();
    const Vec3 p1 = cam_verts.row(i1).transpose();
    const Vec3 p2 = cam_verts.row(i2).transpose();
    // whole-triangle cull behind the camera, no clipping
    if (p0.z() <= 1e-9 || p1.z() <= 1e-9 || p2.z() <= 1e-9) continue;
    if (opts.backface_cull) {
      // front-facing iff the camera-space geometric normal points toward the camera
      const Vec3 n = (p1 - p0).cross(p2 - p0);
      if (n.dot(p0) >= 0.0) continue;
    }

    const double u0 = fe * p0.x() / p0.z() + camera.cx;
    const double v0 = fe * p0.y() / p0.z() + camera.cy;
    const double u1 = fe * p1.x() / p1.z() + camera.cx;
    const double v1 = fe * p1.y() / p1.z() + camera.cy;
    const double u2 = fe * p2.x() / p2.z() + camera.cx;
    const double v2 = fe * p2.y() / p2.z() + camera.cy;

    const double area = edge(u0, v0, u1, v1, u2, v2);
    if (area == 0.0) continue;

    const int x_min = std::max(0, static_cast<int>(std::floor(std::min({u0, u1, u2}) - 0.5)));
    const int x_max = std::min(width - 1, static_cast<int>(std::ceil(std::max({u0, u1, u2}))));
    const int y_min = std::max(0, static_cast<int>(std::floor(std::min({v0, v1, v2}) - 0.5)));
    const int y_max = std::min(height - 1, static_cast<int>(std::ceil(std::max({v0, v1, v2}))));

    for (int y = y_min; y <= y_max; ++y) {
      for (int x = x_min; x <= x_max; ++x) {
        const double px = x + 0.5;
        const double py = y + 0.5;
        double w0 = edge(u1, v1, u2, v2, px, py) / area;
        double w1 = edge(u2, v2, u0, v0, px, py) / area;
        double w2 = edge(u0, v0, u1, v1, px, py) / area;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;

        // perspective-correct weights via interpolated 1/z
        const double inv_z = w0 / p0.z() + w1 / p1.z() + w2 / p2.z();
        const double z = 1.0 / inv_z;
        if (z >= maps.depth_at(x, y)) continue;

        const double b0 = (w0 / p0.z()) * z;
        const double b1 = (w1 / p1.z()) * z;
        const double b2 = (w2 / p2.z()) * z;

        maps.depth_at(x, y) = z;

        Vec3 n = b0 * cam_normals.row(i0).transpose() + b1 * cam_normals.row(i1).transpose() +
                 b2 * cam_normals.row(i2).transpose();
        const double len = n.norm();
        if (len > 0.0) n /= len;
        const std::size_t base = 3 * static_cast<std::size_t>(y * width + x);
        maps.normal[base + 0] = n.x();
        maps.normal[base + 1] = n.y();
        maps.normal[base + 2] = n.z();

        std::uint32_t label;
        if (b0 >= b1 && b0 >= b2)
          label = mesh.part_labels[i0];
        else if (b1 >= b2)
          label = mesh.part_labels[i1];
        else
          label = mesh.part_labels[i2];
        maps.semantic[static_cast<std::size_t>(y * width + x)] = label + 1;
      }
    }
  }
  return maps;
}

Vec3 skeleton_palette(std::size_t index) {
  static const Vec3 palette[] = {
      {1.00, 0.30, 0.30}, {1.00, 0.65, 0.15}, {0.95, 0.95, 0.20}, {0.45, 0.90, 0.25},
      {0.20, 0.80, 0.70}, {0.25, 0.55, 1.00}, {0.55, 0.35, 1.00}, {0.95, 0.35, 0.85},
      {0.80, 0.55, 0.30}, {0.40, 0.95, 0.55}, {0.30, 0.75, 0.95}, {0.90, 0.50, 0.50},
      {0.60, 0.80, 0.20}, {0.20, 0.60, 0.60}, {0.70, 0.45, 0.90}, {0.95, 0.75, 0.45},
  };
  return palette[index % (sizeof(palette) / sizeof(palette[0]))];
}

std::vector<std::pair<int, int>> bones_from_parents(const std::vector<std::int32_t>& parents) {
  std::vector<std::pair<int, int>> bones;
  for (std::size_t j = 1; j < parents.size(); ++j)
    if (parents[j] >= 0) bones.emplace_back(parents[j], static_cast<int>(j));
  return bones;
}

namespace {

// coverage 1 inside, linear falloff across the last half pixel
double aa_coverage(double dist, double radius) {
  return std::clamp(radius + 0.5 - dist, 0.0, 1.0);
}

void splat(std::vector<double>& img, int width, int height, int x, int y, const Vec3& color,
           double coverage) {
  if (x < 0 || y < 0 || x >= width || y >= height || coverage <= 0.0) return;
  const std::size_t base = 3 * static_cast<std::size_t>(y * width + x);
  for (int c = 0; c < 3; ++c) img[base + c] = std::max(img[base + c], coverage * color[c]);
}

}  // namespace

std::vector<double> render_skeleton(const Points3& joints,
                                    const std::vector<std::pair<int, int>>& bones,
                                    const Camera& camera, int width, int height,
                                    const SkeletonStyle& style) {
  std::vector<double> img(3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                          0.0);
  const Eigen::Index k = joints.rows();
  std::vector<Projected> proj(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j)
    proj[static_cast<std::size_t>(j)] = project(camera, joints.row(j).transpose());

  const double half = style.line_width * 0.5;
  for (std::size_t b = 0; b < bones.size(); ++b) {
    const auto [pa, ch] = bones[b];
    if (pa < 0 || pa >= k || ch < 0 || ch >= k)
      throw InvalidArgumentError("render_skeleton: bone index out of range");
    const Projected& a = proj[static_cast<std::size_t>(pa)];
    const Projected& c = proj[static_cast<std::size_t>(ch)];
    if (a.behind || c.behind) continue;
    const Vec3 color = skeleton_palette(b);

    const int x_min = static_cast<int>(std::floor(std::min(a.u, c.u) - half - 1.0));
    const int x_max = static_cast<int>(std::ceil(std::max(a.u, c.u) + half + 1.0));
    const int y_min = static_cast<int>(std::floor(std::min(a.v, c.v) - half - 1.0));
    const int y_max = static_cast<int>(std::ceil(std::max(a.v, c.v) + half + 1.0));
    const double dx = c.u - a.u;
    const double dy = c.v - a.v;
    const double len2 = dx * dx + dy * dy;
    for (int y = std::max(0, y_min); y <= std::min(height - 1, y_max); ++y) {
      for (int x = std::max(0, x_min); x <= std::min(width - 1, x_max); ++x) {
        const double px = x + 0.5;
        const double py = y + 0.5;
        double t = len2 > 0.0 ? ((px - a.u) * dx + (py - a.v) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double qx = a.u + t * dx - px;
        const double qy = a.v + t * dy - py;
        splat(img, width, height, x, y, color, aa_coverage(std::sqrt(qx * qx + qy * qy), half));
      }
    }
  }

  for (Eigen::Index j = 0; j < k; ++j) {
    const Projected& p = proj[static_cast<std::size_t>(j)];
    if (p.behind) continue;
    const Vec3 color = skeleton_palette(bones.size() + static_cast<std::size_t>(j));
    const double r = style.joint_radius;
    for (int y = std::max(0, static_cast<int>(std::floor(p.v - r - 1.0)));
         y <= std::min(height - 1, static_cast<int>(std::ceil(p.v + r + 1.0))); ++y) {
      for (int x = std::max(0, static_cast<int>(std::floor(p.u - r - 1.0)));
           x <= std::min(width - 1, static_cast<int>(std::ceil(p.u + r + 1.0))); ++x) {
        const double dx = x + 0.5 - p.u;
        const double dy = y + 0.5 - p.v;
        splat(img, width, height, x, y, color, aa_coverage(std::sqrt(dx * dx + dy * dy), r));
      }
    }
  }
  return img;
}

}  // namespace chmp
