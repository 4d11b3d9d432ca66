#pragma once

#include <map>
#include <string>
#include <vector>

#include "chmp/tensor.hpp"
#include "chmp/types.hpp"

namespace chmp {

/// One 2D convolution (cross-correlation) with bias. Weights are stored
/// flat as (c_out, c_in, k, k); gradients accumulate until zero_grad().
struct ConvLayer {
  int c_in = 0, c_out = 0, kernel = 0, stride = 1, padding = 0;
  std::vector<double> weight;  // c_out*c_in*k*k
  std::vector<double> bias;    // c_out
  std::vector<double> grad_weight;
  std::vector<double> grad_bias;

  ConvLayer() = default;
  ConvLayer(int c_in, int c_out, int kernel, int stride, int padding);

  double& w_at(int oc, int ic, int ky, int kx) {
    return weight[static_cast<std::size_t>(((oc * c_in + ic) * kernel + ky) * kernel + kx)];
  }
  double w_at(int oc, int ic, int ky, int kx) const {
    return weight[static_cast<std::size_t>(((oc * c_in + ic) * kernel + ky) * kernel + kx)];
  }

  void zero_grad();
  std::size_t num_params() const { return weight.size() + bias.size(); }
};

/// output spatial dims: floor((H + 2p - k)/s) + 1
Tensor4 conv2d(const Tensor4& input, const ConvLayer& layer);

/// Gradient wrt input; accumulates layer.grad_weight / grad_bias.
Tensor4 conv2d_backward(const Tensor4& input, ConvLayer& layer, const Tensor4& grad_output);

Tensor4 silu(const Tensor4& x);
Tensor4 silu_backward(const Tensor4& x, const Tensor4& grad_output);

/// Single-head spatial self-attention over H*W tokens with a residual
/// connection: out = x + softmax(Q K^T / sqrt(C)) V. Full (H*W)^2 weights,
/// intended for small feature maps.
struct AttentionBlock {
  MatX w_q, w_k, w_v;  // C x C
  MatX grad_w_q, grad_w_k, grad_w_v;

  AttentionBlock() = default;
  explicit AttentionBlock(int channels);
  void zero_grad();
  std::size_t num_params() const { return 3 * static_cast<std::size_t>(w_q.size()); }
};

struct AttentionResult {
  Tensor4 output;
  std::vector<MatX> attention;  // per batch item, (H*W) x (H*W), rows sum to 1
};

AttentionResult self_attention(const Tensor4& features, const AttentionBlock& block);

/// Backward through the attention (requires the forward's attention maps).
Tensor4 self_attention_backward(const Tensor4& features, AttentionBlock& block,
                                const AttentionResult& fwd, const Tensor4& grad_output);

struct GuidanceNetConfig {
  int in_channels = 3;
  int hidden1 = 16;
  int hidden2 = 32;
  int out_channels = 4;  // must match the latent channel count
};

/// Per-condition encoder: conv -> SiLU -> strided conv -> SiLU -> attention
/// -> zero-initialized 1x1 output conv. Fresh nets therefore emit exactly
/// zero for any input.
struct GuidanceNet {
  ConvLayer conv1;  // in -> h1, k3 s1 p1
  ConvLayer conv2;  // h1 -> h2, k3 s2 p1
  AttentionBlock attention;
  ConvLayer out_layer;  // h2 -> out, 1x1, zero-init

  GuidanceNet() = default;
  /// Deterministic init from a seed; out_layer weights and bias stay zero.
  GuidanceNet(const GuidanceNetConfig& config, std::uint64_t seed);

  void zero_grad();
  std::size_t num_params() const;

  /// Visit every (parameter, gradient) pair in a fixed order.
  template <typename Fn>
  void for_each_param(Fn&& fn);
};

struct EncodeCache {
  Tensor4 input, a1, s1, a2, s2;  // pre/post activations
  AttentionResult attn;
  Tensor4 attn_out;
};

Tensor4 encode_condition(const GuidanceNet& net, const Tensor4& condition);
Tensor4 encode_condition(const GuidanceNet& net, const Tensor4& condition, EncodeCache& cache);

/// Backward through the whole encoder; accumulates gradients into `net`.
Tensor4 encode_condition_backward(GuidanceNet& net, const EncodeCache& cache,
                                  const Tensor4& grad_output);

/// Canonical condition order for fusion (fixed so sums are bitwise
/// reproducible regardless of map iteration or caller order).
const std::vector<std::string>& condition_order();

/// Elementwise sum in canonical order; keys outside the canonical set sort
/// after it alphabetically.
Tensor4 fuse(const std::map<std::string, Tensor4>& outputs);
Tensor4 fuse(const std::vector<Tensor4>& outputs);

/// Per-pixel attention saliency (column sums of the attention matrix of batch
/// item 0, reshaped to H x W, min-max normalized). Constant maps normalize to
/// 0.5 so they export as mid-gray.
MatX attention_saliency(const AttentionResult& attn, int h, int w);

/// Runs the encoder and writes the saliency as an 8-bit grayscale PNG.
void dump_attention(const GuidanceNet& net, const Tensor4& condition, const std::string& path);

// --- template impl ---

template <typename Fn>
void GuidanceNet::for_each_param(Fn&& fn) {
  for (std::size_t i = 0; i < conv1.weight.size(); ++i) fn(conv1.weight[i], conv1.grad_weight[i]);
  for (std::size_t i = 0; i < conv1.bias.size(); ++i) fn(conv1.bias[i], conv1.grad_bias[i]);
  for (std::size_t i = 0; i < conv2.weight.size(); ++i) fn(conv2.weight[i], conv2.grad_weight[i]);
  for (std::size_t i = 0; i < conv2.bias.size(); ++i) fn(conv2.bias[i], conv2.grad_bias[i]);
  for (Eigen::Index i = 0; i < attention.w_q.size(); ++i)
    fn(attention.w_q.data()[i], attention.grad_w_q.data()[i]);
  for (Eigen::Index i = 0; i < attention.w_k.size(); ++i)
    fn(attention.w_k.data()[i], attention.grad_w_k.data()[i]);
  for (Eigen::Index i = 0; i < attention.w_v.size(); ++i)
    fn(attention.w_v.data()[i], attention.grad_w_v.data()[i]);
  for (std::size_t i = 0; i < out_layer.weight.size(); ++i)
    fn(out_layer.weight[i], out_layer.grad_weight[i]);
  for (std::size_t i = 0; i < out_layer.bias.size(); ++i)
    fn(out_layer.bias[i], out_layer.grad_bias[i]);
}

}  // namespace chmp
