#include "chmp/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <png.h>

#include "chmp/errors.hpp"

namespace chmp {
namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct PngWriter {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngWriter(const std::string& path) {
    fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open for writing: " + path);
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      close();
      throw IoError("png writer init failed: " + path);
    }
  }

  ~PngWriter() { close(); }

  void close() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
    png = nullptr;
    info = nullptr;
    fp = nullptr;
  }
};

void write_png_rows(PngWriter& writer, const std::string& path,
                    const std::vector<std::vector<std::uint8_t>>& rows, int width, int height,
                    int color_type,
                    const std::vector<std::array<std::uint8_t, 3>>* palette) {
  if (setjmp(png_jmpbuf(writer.png))) throw IoError("png write failed: " + path);
  png_init_io(writer.png, writer.fp);
  png_set_IHDR(writer.png, writer.info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_color> colors;
  if (palette) {
    for (const auto& c : *palette) colors.push_back(png_color{c[0], c[1], c[2]});
    png_set_PLTE(writer.png, writer.info, colors.data(), static_cast<int>(colors.size()));
  }
  png_write_info(writer.png, writer.info);
  for (const auto& row : rows)
    png_write_row(writer.png, const_cast<png_bytep>(row.data()));
  png_write_end(writer.png, writer.info);
}

}  // namespace

void write_gray_png(const std::string& path, const MatX& image) {
  const int height = static_cast<int>(image.rows());
  const int width = static_cast<int>(image.cols());
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)].resize(static_cast<std::size_t>(width));
    for (int x = 0; x < width; ++x)
      rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = quantize(image(y, x));
  }
  PngWriter writer(path);
  write_png_rows(writer, path, rows, width, height, PNG_COLOR_TYPE_GRAY, nullptr);
}

MatX read_gray_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    throw IoError("png reader init failed: " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("expected 8-bit grayscale png: " + path);
  }
  MatX image(height, width);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x)
      image(y, x) = static_cast<double>(row[static_cast<std::size_t>(x)]) / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return image;
}

void write_rgb_png(const std::string& path, const std::vector<double>& rgb, int width,
                   int height) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw DimensionError("write_rgb_png: buffer size != W*H*3");
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    auto& row = rows[static_cast<std::size_t>(y)];
    row.resize(static_cast<std::size_t>(width) * 3);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(3 * x + c)] =
            quantize(rgb[static_cast<std::size_t>(3 * (y * width + x) + c)]);
  }
  PngWriter writer(path);
  write_png_rows(writer, path, rows, width, height, PNG_COLOR_TYPE_RGB, nullptr);
}

void write_indexed_png(const std::string& path, const std::vector<std::uint32_t>& indices,
                       int width, int height,
                       const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (indices.size() != static_cast<std::size_t>(width) * height)
    throw DimensionError("write_indexed_png: buffer size != W*H");
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    auto& row = rows[static_cast<std::size_t>(y)];
    row.resize(static_cast<std::size_t>(width));
    for (int x = 0; x < width; ++x) {
      const std::uint32_t idx = indices[static_cast<std::size_t>(y * width + x)];
      if (idx >= palette.size())
        throw InvalidArgumentError("write_indexed_png: index " + std::to_string(idx) +
                                   " outside palette");
      row[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(idx);
    }
  }
  PngWriter writer(path);
  write_png_rows(writer, path, rows, width, height, PNG_COLOR_TYPE_PALETTE, &palette);
}

std::vector<std::array<std::uint8_t, 3>> semantic_palette(std::uint32_t num_parts) {
  std::vector<std::array<std::uint8_t, 3>> palette;
  palette.push_back({0, 0, 0});  // background
  for (std::uint32_t i = 0; i < num_parts; ++i) {
    // evenly spaced hues, full saturation, alternating brightness
    const double hue = 360.0 * static_cast<double>(i) / static_cast<double>(num_parts);
    const double value = (i % 2 == 0) ? 1.0 : 0.72;
    const double c = value;
    const double hp = hue / 60.0;
    const double xval = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = xval; }
    else if (hp < 2) { r = xval; g = c; }
    else if (hp < 3) { g = c; b = xval; }
    else if (hp < 4) { g = xval; b = c; }
    else if (hp < 5) { r = xval; b = c; }
    else { r = c; b = xval; }
    palette.push_back({static_cast<std::uint8_t>(std::lround(255 * r)),
                       static_cast<std::uint8_t>(std::lround(255 * g)),
                       static_cast<std::uint8_t>(std::lround(255 * b))});
  }
  return palette;
}

void write_maps_f32(const std::string& path, const std::vector<double>& data, int channels,
                    int height, int width) {
  if (data.size() != static_cast<std::size_t>(channels) * height * width)
    throw DimensionError("write_maps_f32: buffer size != C*H*W");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write("CHMPMAPS", 8);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(channels),
                                 static_cast<std::uint32_t>(height),
                                 static_cast<std::uint32_t>(width)};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> buf(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) buf[i] = static_cast<float>(data[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw IoError("write failed: " + path);
}

MapsF32 read_maps_f32(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "CHMPMAPS", 8) != 0)
    throw IoError("maps file: bad magic (expected CHMPMAPS): " + path);
  std::uint32_t dims[3];
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!is) throw IoError("maps file: truncated header: " + path);
  MapsF32 maps;
  maps.channels = static_cast<int>(dims[0]);
  maps.height = static_cast<int>(dims[1]);
  maps.width = static_cast<int>(dims[2]);
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<float> buf(count);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!is) throw IoError("maps file: truncated data: " + path);
  maps.data.assign(buf.begin(), buf.end());
  return maps;
}

}  // namespace chmp
