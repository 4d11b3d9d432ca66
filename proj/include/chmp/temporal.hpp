#pragma once

#include <vector>

#include "chmp/tensor.hpp"

namespace chmp {

/// Overlapping fixed-length windows covering [0, num_frames).
struct WindowPlan {
  struct Window {
    int start = 0;
    int end = 0;  // exclusive
    int length() const { return end - start; }
  };
  std::vector<Window> windows;
  int window_len = 24;
  int stride = 0;
  int num_frames = 0;
};

/// Windows at starts 0, stride, 2*stride, ...; the last window is shifted
/// left so its end hits num_frames. Sequences shorter than window_len get a
/// single clamped window.
WindowPlan plan_windows(int num_frames, int window_len = 24, int stride = 12);

enum class BlendWeights { kTriangular, kUniform };

/// Blend per-window outputs into per-frame outputs. Triangular weights peak
/// at each window's center (weight = 1 + min(pos, len-1-pos)) and normalize
/// to a convex combination per frame.
std::vector<Tensor4> aggregate(const WindowPlan& plan,
                               const std::vector<std::vector<Tensor4>>& window_outputs,
                               BlendWeights weights = BlendWeights::kTriangular);

}  // namespace chmp
