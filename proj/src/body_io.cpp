#include <array>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

#include "chmp/body_model.hpp"
#include "chmp/errors.hpp"

namespace chmp {
namespace {

constexpr char kMagic[8] = {'C', 'H', 'M', 'P', 'B', 'O', 'D', 'Y'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError(std::string("body file: truncated while reading ") + what);
  return value;
}

void write_matrix(std::ostream& os, const MatX& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod(os, m(r, c));
}

void read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols, MatX& out,
                 const char* what) {
  out.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = read_pod<double>(is, what);
}

// Remap joint order so parents[i] < i, propagating through every joint-indexed
// array. Throws if parents is not a tree rooted at a single -1 entry.
void topo_sort_joints(BodyModel& m) {
  const Eigen::Index k = m.num_joints();
  Eigen::Index root = -1;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (m.parents[j] == -1) {
      if (root != -1) throw InvalidArgumentError("body file: multiple root joints");
      root = j;
    } else if (m.parents[j] < 0 || m.parents[j] >= k) {
      throw InvalidArgumentError("body file: parent index out of range at joint " +
                                 std::to_string(j));
    }
  }
  if (root == -1) throw InvalidArgumentError("body file: no root joint (parent -1)");

  std::vector<Eigen::Index> order;  // old indices in topological order
  order.reserve(static_cast<std::size_t>(k));
  std::vector<std::vector<Eigen::Index>> children(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j)
    if (j != root) children[static_cast<std::size_t>(m.parents[j])].push_back(j);
  std::vector<Eigen::Index> stack{root};
  while (!stack.empty()) {
    const Eigen::Index j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[static_cast<std::size_t>(j)].rbegin();
         it != children[static_cast<std::size_t>(j)].rend(); ++it)
      stack.push_back(*it);
  }
  if (static_cast<Eigen::Index>(order.size()) != k)
    throw InvalidArgumentError("body file: parents contain a cycle");

  bool already_sorted = true;
  for (Eigen::Index j = 0; j < k; ++j)
    if (order[static_cast<std::size_t>(j)] != j) already_sorted = false;
  if (already_sorted) return;

  std::vector<Eigen::Index> new_of_old(static_cast<std::size_t>(k));
  for (Eigen::Index n = 0; n < k; ++n) new_of_old[static_cast<std::size_t>(order[n])] = n;

  // pose_dirs are indexed by the (pre-sort) non-root joint order; remapping
  // them through a re-rooting is ambiguous, so reject that combination.
  if (!m.pose_dirs.empty())
    throw InvalidArgumentError(
        "body file: joints are not topologically sorted and pose_dirs are present; "
        "re-export the model with sorted joints");

  std::vector<std::int32_t> parents(static_cast<std::size_t>(k));
  MatX weights(m.skin_weights.rows(), k);
  MatX regressor(k, m.joint_regressor.cols());
  for (Eigen::Index n = 0; n < k; ++n) {
    const Eigen::Index old = order[static_cast<std::size_t>(n)];
    parents[static_cast<std::size_t>(n)] =
        m.parents[static_cast<std::size_t>(old)] == -1
            ? -1
            : static_cast<std::int32_t>(
                  new_of_old[static_cast<std::size_t>(m.parents[static_cast<std::size_t>(old)])]);
    weights.col(n) = m.skin_weights.col(old);
    regressor.row(n) = m.joint_regressor.row(old);
  }
  m.parents = std::move(parents);
  m.skin_weights = std::move(weights);
  m.joint_regressor = std::move(regressor);
}

}  // namespace

void save_body(const BodyModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  const auto v = static_cast<std::uint32_t>(model.num_vertices());
  const auto k = static_cast<std::uint32_t>(model.num_joints());
  const auto s = static_cast<std::uint32_t>(model.num_shapes());
  const auto p = static_cast<std::uint32_t>(model.pose_dirs.size());
  const auto l = model.num_parts;
  const auto f = static_cast<std::uint32_t>(model.faces.rows());
  write_pod(os, v);
  write_pod(os, k);
  write_pod(os, s);
  write_pod(os, p);
  write_pod(os, l);
  write_pod(os, f);
  write_matrix(os, model.template_vertices);
  for (const auto& sd : model.shape_dirs) write_matrix(os, sd);
  for (const auto& pd : model.pose_dirs) write_matrix(os, pd);
  write_matrix(os, model.skin_weights);
  write_matrix(os, model.joint_regressor);
  for (auto parent : model.parents) write_pod(os, parent);
  for (auto label : model.part_labels) write_pod(os, label);
  for (Eigen::Index i = 0; i < model.faces.rows(); ++i)
    for (int c = 0; c < 3; ++c) write_pod(os, model.faces(i, c));
  if (!os) throw IoError("write failed: " + path);
}

BodyModel load_body(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open body file: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("body file: bad magic (expected CHMPBODY): " + path);
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw IoError("body file: unsupported version " + std::to_string(version));

  const auto v = read_pod<std::uint32_t>(is, "V");
  const auto k = read_pod<std::uint32_t>(is, "K");
  const auto s = read_pod<std::uint32_t>(is, "S");
  const auto p = read_pod<std::uint32_t>(is, "P");
  const auto l = read_pod<std::uint32_t>(is, "L");
  const auto f = read_pod<std::uint32_t>(is, "F");
  if (p != 0 && p != 9 * (k - 1))
    throw InvalidArgumentError("body file: P must be 0 or 9*(K-1), got " + std::to_string(p));

  BodyModel m;
  m.num_parts = l;
  MatX verts;
  read_matrix(is, v, 3, verts, "vertices");
  m.template_vertices = verts;
  m.shape_dirs.resize(s);
  for (std::uint32_t i = 0; i < s; ++i) read_matrix(is, v, 3, m.shape_dirs[i], "shape_dirs");
  m.pose_dirs.resize(p);
  for (std::uint32_t i = 0; i < p; ++i) read_matrix(is, v, 3, m.pose_dirs[i], "pose_dirs");
  read_matrix(is, v, k, m.skin_weights, "skin_weights");
  read_matrix(is, k, v, m.joint_regressor, "joint_regressor");
  m.parents.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) m.parents[i] = read_pod<std::int32_t>(is, "parents");
  m.part_labels.resize(v);
  for (std::uint32_t i = 0; i < v; ++i)
    m.part_labels[i] = read_pod<std::uint32_t>(is, "part_labels");
  m.faces.resize(f, 3);
  for (std::uint32_t i = 0; i < f; ++i)
    for (int c = 0; c < 3; ++c) m.faces(i, c) = read_pod<std::uint32_t>(is, "faces");

  topo_sort_joints(m);
  m.validate();
  return m;
}

}  // namespace chmp
