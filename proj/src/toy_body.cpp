#include <array>
#include <cmath>
#include <vector>

#include "chmp/body_model.hpp"
#include "chmp/errors.hpp"

namespace chmp {

// Segmented tube along +y: joints on the axis, vertex rings of 4 around it,
// leftover vertices stacked as an apex fan above the last ring.
BodyModel make_toy_body(const ToyBodyOptions& opts) {
  const Eigen::Index v = opts.num_vertices;
  const Eigen::Index k = opts.num_joints;
  const Eigen::Index s = opts.num_shapes;
  if (v < 8) throw InvalidArgumentError("make_toy_body: need at least 8 vertices");
  if (k < 2) throw InvalidArgumentError("make_toy_body: need at least 2 joints");

  BodyModel m;
  const Eigen::Index num_parts = opts.num_parts > 0 ? opts.num_parts : k;
  m.num_parts = static_cast<std::uint32_t>(num_parts);

  const Eigen::Index n_ring = v / 4;         // rings of 4
  const Eigen::Index n_extra = v - 4 * n_ring;
  const double seg = 0.3;                    // joint spacing, meters
  const double height = seg * static_cast<double>(k - 1);

  m.template_vertices.resize(v, 3);
  for (Eigen::Index r = 0; r < n_ring; ++r) {
    const double y = height * static_cast<double>(r) / static_cast<double>(n_ring - 1);
    const double radius = 0.12 + 0.03 * std::sin(2.5 * y);
    for (int c = 0; c < 4; ++c) {
      const double a = (static_cast<double>(c) + 0.5 * (r % 2)) * 1.5707963267948966;
      m.template_vertices.row(4 * r + c) << radius * std::cos(a), y, radius * std::sin(a);
    }
  }
  for (Eigen::Index e = 0; e < n_extra; ++e) {
    const double y = height + 0.05 * static_cast<double>(e + 1);
    m.template_vertices.row(4 * n_ring + e) << 0.01 * static_cast<double>(e), y, 0.0;
  }

  // shape blend: smooth radial/axial bumps, distinct per basis vector
  m.shape_dirs.resize(static_cast<std::size_t>(s));
  for (Eigen::Index b = 0; b < s; ++b) {
    MatX dir(v, 3);
    for (Eigen::Index i = 0; i < v; ++i) {
      const double y = m.template_vertices(i, 1);
      const double phase = 1.3 * static_cast<double>(b) + 2.0 * y;
      const Vec3 radial(m.template_vertices(i, 0), 0.0, m.template_vertices(i, 2));
      Vec3 d = 0.05 * std::sin(phase) * radial;
      d.y() += 0.02 * std::cos(phase + static_cast<double>(b));
      dir.row(i) = d.transpose();
    }
    m.shape_dirs[static_cast<std::size_t>(b)] = dir;
  }

  if (opts.with_pose_dirs) {
    m.pose_dirs.resize(static_cast<std::size_t>(9 * (k - 1)));
    for (std::size_t p = 0; p < m.pose_dirs.size(); ++p) {
      MatX dir(v, 3);
      for (Eigen::Index i = 0; i < v; ++i) {
        const double y = m.template_vertices(i, 1);
        const double g = 0.01 * std::sin(0.7 * static_cast<double>(p) + 3.0 * y);
        dir.row(i) << g, 0.5 * g, -g;
      }
      m.pose_dirs[p] = dir;
    }
  }

  // skinning: linear falloff between the two joints bracketing the vertex height
  m.skin_weights = MatX::Zero(v, k);
  m.parents.resize(static_cast<std::size_t>(k));
  m.parents[0] = -1;
  for (Eigen::Index j = 1; j < k; ++j) m.parents[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(j - 1);

  m.part_labels.resize(static_cast<std::size_t>(v));
  for (Eigen::Index i = 0; i < v; ++i) {
    const double y = m.template_vertices(i, 1);
    double pos = y / seg;
    if (pos < 0.0) pos = 0.0;
    if (pos > static_cast<double>(k - 1)) pos = static_cast<double>(k - 1);
    const Eigen::Index lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), k - 2);
    const double frac = pos - static_cast<double>(lo);
    m.skin_weights(i, lo) = 1.0 - frac;
    m.skin_weights(i, lo + 1) = frac;
    const Eigen::Index nearest = frac < 0.5 ? lo : lo + 1;
    m.part_labels[static_cast<std::size_t>(i)] =
        static_cast<std::uint32_t>(nearest % num_parts);
  }

  // regressor: average of the vertices whose nearest joint is j
  m.joint_regressor = MatX::Zero(k, v);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < v; ++i) {
      const double y = m.template_vertices(i, 1);
      const double target = seg * static_cast<double>(j);
      if (std::abs(y - target) <= seg * 0.5 + 1e-12) members.push_back(i);
    }
    if (members.empty()) {
      // fall back to the single nearest vertex
      Eigen::Index best = 0;
      double best_d = 1e300;
      for (Eigen::Index i = 0; i < v; ++i) {
        const double d = std::abs(m.template_vertices(i, 1) - seg * static_cast<double>(j));
        if (d < best_d) { best_d = d; best = i; }
      }
      members.push_back(best);
    }
    const double w = 1.0 / static_cast<double>(members.size());
    for (Eigen::Index i : members) m.joint_regressor(j, i) = w;
  }

  // tube faces between consecutive rings, plus an apex fan for extras
  std::vector<std::array<std::uint32_t, 3>> faces;
  for (Eigen::Index r = 0; r + 1 < n_ring; ++r) {
    for (int c = 0; c < 4; ++c) {
      const auto a0 = static_cast<std::uint32_t>(4 * r + c);
      const auto a1 = static_cast<std::uint32_t>(4 * r + (c + 1) % 4);
      const auto b0 = static_cast<std::uint32_t>(4 * (r + 1) + c);
      const auto b1 = static_cast<std::uint32_t>(4 * (r + 1) + (c + 1) % 4);
      faces.push_back({a0, b0, a1});
      faces.push_back({a1, b0, b1});
    }
  }
  for (Eigen::Index e = 0; e < n_extra; ++e) {
    const auto apex = static_cast<std::uint32_t>(4 * n_ring + e);
    const auto base = static_cast<std::uint32_t>(4 * (n_ring - 1));
    for (int c = 0; c < 4; ++c)
      faces.push_back({static_cast<std::uint32_t>(base + c), apex,
                       static_cast<std::uint32_t>(base + (c + 1) % 4)});
  }
  m.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int c = 0; c < 3; ++c) m.faces(static_cast<Eigen::Index>(f), c) = faces[f][c];

  m.validate();
  return m;
}

}  // namespace chmp
