#include "chmp/temporal.hpp"

#include <algorithm>

namespace chmp {

WindowPlan plan_windows(int num_frames, int window_len, int stride) {
  if (num_frames < 1) throw InvalidArgumentError("plan_windows: need at least one frame");
  if (stride < 1 || window_len < stride)
    throw InvalidArgumentError("plan_windows: need 1 <= stride <= window_len");
  if (window_len > 4096) throw InvalidArgumentError("plan_windows: window length cap exceeded");

  WindowPlan plan;
  plan.window_len = window_len;
  plan.stride = stride;
  plan.num_frames = num_frames;
  if (num_frames < window_len) {
    plan.windows.push_back({0, num_frames});
    return plan;
  }
  for (int start = 0;; start += stride) {
    if (start + window_len >= num_frames) {
      // shift the tail window back so it ends exactly at num_frames
      const int tail = num_frames - window_len;
      if (plan.windows.empty() || plan.windows.back().start != tail)
        plan.windows.push_back({tail, num_frames});
      break;
    }
    plan.windows.push_back({start, start + window_len});
  }
  return plan;
}

std::vector<Tensor4> aggregate(const WindowPlan& plan,
                               const std::vector<std::vector<Tensor4>>& window_outputs,
                               BlendWeights weights) {
  if (window_outputs.size() != plan.windows.size())
    throw DimensionError("aggregate: window output count != planned windows");
  for (std::size_t w = 0; w < plan.windows.size(); ++w)
    if (static_cast<int>(window_outputs[w].size()) != plan.windows[w].length())
      throw DimensionError("aggregate: window " + std::to_string(w) +
                           " output length != window span");

  // gather contributors per frame, in window order
  std::vector<std::vector<std::pair<double, const Tensor4*>>> contributors(
      static_cast<std::size_t>(plan.num_frames));
  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    const auto& win = plan.windows[w];
    for (int pos = 0; pos < win.length(); ++pos) {
      const double weight =
          weights == BlendWeights::kTriangular
              ? 1.0 + static_cast<double>(std::min(pos, win.length() - 1 - pos))
              : 1.0;
      contributors[static_cast<std::size_t>(win.start + pos)].emplace_back(
          weight, &window_outputs[w][static_cast<std::size_t>(pos)]);
    }
  }

  // blend anchored on the first contributor: out = v0 + sum_i (w_i/W)(v_i - v0),
  // which keeps single-window and identical-value frames bitwise exact
  std::vector<Tensor4> out(static_cast<std::size_t>(plan.num_frames));
  for (int f = 0; f < plan.num_frames; ++f) {
    const auto& parts = contributors[static_cast<std::size_t>(f)];
    if (parts.empty())
      throw InvalidArgumentError("aggregate: frame " + std::to_string(f) +
                                 " not covered by any window");
    double total = 0.0;
    for (const auto& [w, v] : parts) total += w;
    Tensor4 blended = *parts.front().second;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto& [w, v] = parts[i];
      if (!v->same_shape(blended)) throw DimensionError("aggregate: tensor shape mismatch");
      const double frac = w / total;
      for (std::size_t j = 0; j < blended.data.size(); ++j)
        blended.data[j] += frac * (v->data[j] - parts.front().second->data[j]);
    }
    out[static_cast<std::size_t>(f)] = std::move(blended);
  }
  return out;
}

}  // namespace chmp
