#pragma once

#include <vector>

#include "chmp/errors.hpp"

namespace chmp {

/// Dense (batch, channels, height, width) tensor, row-major, f64.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw InvalidArgumentError("tensor: dimensions must be positive");
  }

  static Tensor4 zeros(int n, int c, int h, int w) { return Tensor4(n, c, h, w); }

  std::size_t size() const { return data.size(); }

  double& at(int in, int ic, int iy, int ix) {
    return data[static_cast<std::size_t>(((in * c + ic) * h + iy) * w + ix)];
  }
  double at(int in, int ic, int iy, int ix) const {
    return data[static_cast<std::size_t>(((in * c + ic) * h + iy) * w + ix)];
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  Tensor4& operator+=(const Tensor4& o) {
    if (!same_shape(o)) throw DimensionError("tensor: shape mismatch in +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }

  Tensor4& operator*=(double s) {
    for (double& v : data) v *= s;
    return *this;
  }
};

}  // namespace chmp
