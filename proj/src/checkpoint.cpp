#include "chmp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "chmp/errors.hpp"

namespace chmp {
namespace {

constexpr char kMagic[8] = {'C', 'H', 'M', 'P', 'N', 'E', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;

struct Section {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

using Sections = std::map<std::string, Section>;

void collect_conv(Sections& out, const std::string& prefix, const ConvLayer& layer) {
  out[prefix + ".weight"] = Section{
      {static_cast<std::uint32_t>(layer.c_out), static_cast<std::uint32_t>(layer.c_in),
       static_cast<std::uint32_t>(layer.kernel), static_cast<std::uint32_t>(layer.kernel)},
      layer.weight};
  out[prefix + ".bias"] = Section{{static_cast<std::uint32_t>(layer.c_out)}, layer.bias};
}

void collect_mat(Sections& out, const std::string& name, const MatX& m) {
  Section s;
  s.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  s.values.assign(m.data(), m.data() + m.size());
  out[name] = std::move(s);
}

Sections collect(const ToyDenoiser& denoiser, const GuidanceNets& nets) {
  Sections out;
  collect_conv(out, "denoiser.conv1", denoiser.conv1);
  collect_conv(out, "denoiser.conv2", denoiser.conv2);
  collect_conv(out, "denoiser.conv3", denoiser.conv3);
  for (const auto& [name, net] : nets) {
    const std::string p = "guidance." + name;
    collect_conv(out, p + ".conv1", net.conv1);
    collect_conv(out, p + ".conv2", net.conv2);
    collect_mat(out, p + ".attn.w_q", net.attention.w_q);
    collect_mat(out, p + ".attn.w_k", net.attention.w_k);
    collect_mat(out, p + ".attn.w_v", net.attention.w_v);
    collect_conv(out, p + ".out", net.out_layer);
  }
  return out;
}

void restore_conv(const Sections& in, const std::string& prefix, ConvLayer& layer,
                  const std::string& path) {
  for (const char* suffix : {".weight", ".bias"}) {
    const std::string name = prefix + suffix;
    auto it = in.find(name);
    if (it == in.end())
      throw IoError("checkpoint " + path + ": missing section " + name);
    const Section& s = it->second;
    std::vector<double>& target = suffix == std::string(".weight") ? layer.weight : layer.bias;
    if (s.values.size() != target.size())
      throw IoError("checkpoint " + path + ": section " + name + " has " +
                    std::to_string(s.values.size()) + " values, expected " +
                    std::to_string(target.size()));
    target = s.values;
  }
}

void restore_mat(const Sections& in, const std::string& name, MatX& m, const std::string& path) {
  auto it = in.find(name);
  if (it == in.end()) throw IoError("checkpoint " + path + ": missing section " + name);
  const Section& s = it->second;
  if (s.dims.size() != 2 || static_cast<Eigen::Index>(s.dims[0]) != m.rows() ||
      static_cast<Eigen::Index>(s.dims[1]) != m.cols())
    throw IoError("checkpoint " + path + ": section " + name + " shape mismatch");
  std::memcpy(m.data(), s.values.data(), s.values.size() * sizeof(double));
}

}  // namespace

void save_checkpoint(const std::string& path, const ToyDenoiser& denoiser,
                     const GuidanceNets& nets) {
  const Sections sections = collect(denoiser, nets);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const auto count = static_cast<std::uint32_t>(sections.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, section] : sections) {
    const auto name_len = static_cast<std::uint32_t>(name.size());
    os.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto ndims = static_cast<std::uint32_t>(section.dims.size());
    os.write(reinterpret_cast<const char*>(&ndims), sizeof(ndims));
    os.write(reinterpret_cast<const char*>(section.dims.data()),
             static_cast<std::streamsize>(section.dims.size() * sizeof(std::uint32_t)));
    os.write(reinterpret_cast<const char*>(section.values.data()),
             static_cast<std::streamsize>(section.values.size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed: " + path);
}

void load_checkpoint(const std::string& path, ToyDenoiser& denoiser, GuidanceNets& nets) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("checkpoint: bad magic (expected CHMPNETS): " + path);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  std::uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));

  Sections sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t ndims = 0;
    is.read(reinterpret_cast<char*>(&ndims), sizeof(ndims));
    Section section;
    section.dims.resize(ndims);
    is.read(reinterpret_cast<char*>(section.dims.data()),
            static_cast<std::streamsize>(ndims * sizeof(std::uint32_t)));
    std::size_t total = 1;
    for (std::uint32_t d : section.dims) total *= d;
    section.values.resize(total);
    is.read(reinterpret_cast<char*>(section.values.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated section " + name + " in " + path);
    sections[name] = std::move(section);
  }

  restore_conv(sections, "denoiser.conv1", denoiser.conv1, path);
  restore_conv(sections, "denoiser.conv2", denoiser.conv2, path);
  restore_conv(sections, "denoiser.conv3", denoiser.conv3, path);
  for (auto& [name, net] : nets) {
    const std::string p = "guidance." + name;
    restore_conv(sections, p + ".conv1", net.conv1, path);
    restore_conv(sections, p + ".conv2", net.conv2, path);
    restore_mat(sections, p + ".attn.w_q", net.attention.w_q, path);
    restore_mat(sections, p + ".attn.w_k", net.attention.w_k, path);
    restore_mat(sections, p + ".attn.w_v", net.attention.w_v, path);
    restore_conv(sections, p + ".out", net.out_layer, path);
  }
}

}  // namespace chmp
