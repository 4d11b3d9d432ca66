#include "chmp/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "chmp/image_io.hpp"
#include "chmp/rng.hpp"

namespace chmp {

ConvLayer::ConvLayer(int c_in_, int c_out_, int kernel_, int stride_, int padding_)
    : c_in(c_in_), c_out(c_out_), kernel(kernel_), stride(stride_), padding(padding_) {
  if (c_in <= 0 || c_out <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
    throw InvalidArgumentError("conv layer: invalid dimensions");
  const auto nw = static_cast<std::size_t>(c_out) * c_in * kernel * kernel;
  weight.assign(nw, 0.0);
  bias.assign(static_cast<std::size_t>(c_out), 0.0);
  grad_weight.assign(nw, 0.0);
  grad_bias.assign(static_cast<std::size_t>(c_out), 0.0);
}

void ConvLayer::zero_grad() {
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

Tensor4 conv2d(const Tensor4& input, const ConvLayer& layer) {
  if (input.c != layer.c_in) throw DimensionError("conv2d: channel count mismatch");
  const int oh = (input.h + 2 * layer.padding - layer.kernel) / layer.stride + 1;
  const int ow = (input.w + 2 * layer.padding - layer.kernel) / layer.stride + 1;
  if (oh <= 0 || ow <= 0) throw DimensionError("conv2d: kernel larger than padded input");
  Tensor4 out(input.n, layer.c_out, oh, ow);
  for (int b = 0; b < input.n; ++b)
    for (int oc = 0; oc < layer.c_out; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = layer.bias[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < layer.c_in; ++ic)
            for (int ky = 0; ky < layer.kernel; ++ky) {
              const int iy = oy * layer.stride + ky - layer.padding;
              if (iy < 0 || iy >= input.h) continue;
              for (int kx = 0; kx < layer.kernel; ++kx) {
                const int ix = ox * layer.stride + kx - layer.padding;
                if (ix < 0 || ix >= input.w) continue;
                acc += layer.w_at(oc, ic, ky, kx) * input.at(b, ic, iy, ix);
              }
            }
          out.at(b, oc, oy, ox) = acc;
        }
  return out;
}

Tensor4 conv2d_backward(const Tensor4& input, ConvLayer& layer, const Tensor4& grad_output) {
  const int oh = grad_output.h;
  const int ow = grad_output.w;
  Tensor4 grad_input(input.n, input.c, input.h, input.w);
  for (int b = 0; b < input.n; ++b)
    for (int oc = 0; oc < layer.c_out; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const double g = grad_output.at(b, oc, oy, ox);
          if (g == 0.0) continue;
          layer.grad_bias[static_cast<std::size_t>(oc)] += g;
          for (int ic = 0; ic < layer.c_in; ++ic)
            for (int ky = 0; ky < layer.kernel; ++ky) {
              const int iy = oy * layer.stride + ky - layer.padding;
              if (iy < 0 || iy >= input.h) continue;
              for (int kx = 0; kx < layer.kernel; ++kx) {
                const int ix = ox * layer.stride + kx - layer.padding;
                if (ix < 0 || ix >= input.w) continue;
                layer.grad_weight[static_cast<std::size_t>(
                    ((oc * layer.c_in + ic) * layer.kernel + ky) * layer.kernel + kx)] +=
                    g * input.at(b, ic, iy, ix);
                grad_input.at(b, ic, iy, ix) += g * layer.w_at(oc, ic, ky, kx);
              }
            }
        }
  return grad_input;
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Tensor4 silu(const Tensor4& x) {
  Tensor4 out = x;
  for (double& v : out.data) v = v * sigmoid(v);
  return out;
}

Tensor4 silu_backward(const Tensor4& x, const Tensor4& grad_output) {
  if (!x.same_shape(grad_output)) throw DimensionError("silu_backward: shape mismatch");
  Tensor4 grad = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double s = sigmoid(x.data[i]);
    grad.data[i] = grad_output.data[i] * s * (1.0 + x.data[i] * (1.0 - s));
  }
  return grad;
}

AttentionBlock::AttentionBlock(int channels) {
  w_q = MatX::Zero(channels, channels);
  w_k = MatX::Zero(channels, channels);
  w_v = MatX::Zero(channels, channels);
  grad_w_q = MatX::Zero(channels, channels);
  grad_w_k = MatX::Zero(channels, channels);
  grad_w_v = MatX::Zero(channels, channels);
}

void AttentionBlock::zero_grad() {
  grad_w_q.setZero();
  grad_w_k.setZero();
  grad_w_v.setZero();
}

namespace {

// tokens as rows: T x C matrix from one batch item
MatX tokens_of(const Tensor4& x, int b) {
  const int t = x.h * x.w;
  MatX m(t, x.c);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < t; ++i) m(i, c) = x.at(b, c, i / x.w, i % x.w);
  return m;
}

void tokens_into(const MatX& m, Tensor4& x, int b) {
  const int t = x.h * x.w;
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < t; ++i) x.at(b, c, i / x.w, i % x.w) = m(i, c);
}

}  // namespace

AttentionResult self_attention(const Tensor4& features, const AttentionBlock& block) {
  const int channels = features.c;
  if (block.w_q.rows() != channels)
    throw DimensionError("self_attention: projection size != channel count");
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(channels));

  AttentionResult result;
  result.output = features;
  result.attention.reserve(static_cast<std::size_t>(features.n));
  for (int b = 0; b < features.n; ++b) {
    const MatX x = tokens_of(features, b);
    const MatX q = x * block.w_q.transpose();
    const MatX k = x * block.w_k.transpose();
    const MatX v = x * block.w_v.transpose();
    MatX logits = (q * k.transpose()) * inv_sqrt_c;
    // row-wise softmax, max-shifted
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double mx = logits.row(r).maxCoeff();
      logits.row(r) = (logits.row(r).array() - mx).exp();
      logits.row(r) /= logits.row(r).sum();
    }
    const MatX out = x + logits * v;
    tokens_into(out, result.output, b);
    result.attention.push_back(std::move(logits));
  }
  return result;
}

Tensor4 self_attention_backward(const Tensor4& features, AttentionBlock& block,
                                const AttentionResult& fwd, const Tensor4& grad_output) {
  const int channels = features.c;
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(channels));
  Tensor4 grad_input = features;  // reuse shape
  for (double& v : grad_input.data) v = 0.0;

  for (int b = 0; b < features.n; ++b) {
    const MatX x = tokens_of(features, b);
    const MatX q = x * block.w_q.transpose();
    const MatX k = x * block.w_k.transpose();
    const MatX v = x * block.w_v.transpose();
    const MatX& a = fwd.attention[static_cast<std::size_t>(b)];
    const MatX d_out = tokens_of(grad_output, b);

    MatX dx = d_out;  // residual path
    const MatX dv = a.transpose() * d_out;
    MatX da = d_out * v.transpose();
    // softmax backward per row: ds = a .* (da - rowsum(da .* a))
    MatX ds(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double dot = (da.row(r).array() * a.row(r).array()).sum();
      ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
    }
    const MatX dq = ds * k * inv_sqrt_c;
    const MatX dk = ds.transpose() * q * inv_sqrt_c;

    block.grad_w_q += dq.transpose() * x;
    block.grad_w_k += dk.transpose() * x;
    block.grad_w_v += dv.transpose() * x;
    dx += dq * block.w_q + dk * block.w_k + dv * block.w_v;

    MatX prev = tokens_of(grad_input, b);
    tokens_into(prev + dx, grad_input, b);
  }
  return grad_input;
}

GuidanceNet::GuidanceNet(const GuidanceNetConfig& config, std::uint64_t seed)
    : conv1(config.in_channels, config.hidden1, 3, 1, 1),
      conv2(config.hidden1, config.hidden2, 3, 2, 1),
      attention(config.hidden2),
      out_layer(config.hidden2, config.out_channels, 1, 1, 0) {
  CounterRng rng(seed, /*stream=*/0x61747465);
  const auto he = [&](ConvLayer& layer) {
    const double std_dev =
        std::sqrt(2.0 / static_cast<double>(layer.c_in * layer.kernel * layer.kernel));
    for (double& w : layer.weight) w = std_dev * rng.next_normal();
  };
  he(conv1);
  he(conv2);
  const double attn_std = 1.0 / std::sqrt(static_cast<double>(config.hidden2));
  for (Eigen::Index i = 0; i < attention.w_q.size(); ++i)
    attention.w_q.data()[i] = attn_std * rng.next_normal();
  for (Eigen::Index i = 0; i < attention.w_k.size(); ++i)
    attention.w_k.data()[i] = attn_std * rng.next_normal();
  for (Eigen::Index i = 0; i < attention.w_v.size(); ++i)
    attention.w_v.data()[i] = attn_std * rng.next_normal();
  // out_layer stays exactly zero
}

void GuidanceNet::zero_grad() {
  conv1.zero_grad();
  conv2.zero_grad();
  attention.zero_grad();
  out_layer.zero_grad();
}

std::size_t GuidanceNet::num_params() const {
  return conv1.num_params() + conv2.num_params() + attention.num_params() +
         out_layer.num_params();
}

Tensor4 encode_condition(const GuidanceNet& net, const Tensor4& condition) {
  EncodeCache cache;
  return encode_condition(net, condition, cache);
}

Tensor4 encode_condition(const GuidanceNet& net, const Tensor4& condition, EncodeCache& cache) {
  cache.input = condition;
  cache.a1 = conv2d(condition, net.conv1);
  cache.s1 = silu(cache.a1);
  cache.a2 = conv2d(cache.s1, net.conv2);
  cache.s2 = silu(cache.a2);
  cache.attn = self_attention(cache.s2, net.attention);
  cache.attn_out = cache.attn.output;
  return conv2d(cache.attn_out, net.out_layer);
}

Tensor4 encode_condition_backward(GuidanceNet& net, const EncodeCache& cache,
                                  const Tensor4& grad_output) {
  Tensor4 g = conv2d_backward(cache.attn_out, net.out_layer, grad_output);
  g = self_attention_backward(cache.s2, net.attention, cache.attn, g);
  g = silu_backward(cache.a2, g);
  g = conv2d_backward(cache.s1, net.conv2, g);
  g = silu_backward(cache.a1, g);
  return conv2d_backward(cache.input, net.conv1, g);
}

const std::vector<std::string>& condition_order() {
  static const std::vector<std::string> order = {"depth", "normal", "semantic", "skeleton"};
  return order;
}

Tensor4 fuse(const std::vector<Tensor4>& outputs) {
  if (outputs.empty()) throw InvalidArgumentError("fuse: empty input list");
  Tensor4 sum = outputs.front();
  for (std::size_t i = 1; i < outputs.size(); ++i) sum += outputs[i];
  return sum;
}

Tensor4 fuse(const std::map<std::string, Tensor4>& outputs) {
  std::vector<Tensor4> ordered;
  for (const std::string& name : condition_order()) {
    auto it = outputs.find(name);
    if (it != outputs.end()) ordered.push_back(it->second);
  }
  for (const auto& [name, tensor] : outputs)
    if (std::find(condition_order().begin(), condition_order().end(), name) ==
        condition_order().end())
      ordered.push_back(tensor);
  return fuse(ordered);
}

MatX attention_saliency(const AttentionResult& attn, int h, int w) {
  if (attn.attention.empty()) throw InvalidArgumentError("attention_saliency: no attention maps");
  const MatX& a = attn.attention.front();
  const VecX col_sums = a.colwise().sum();
  MatX saliency(h, w);
  for (int i = 0; i < h * w; ++i) saliency(i / w, i % w) = col_sums[i];
  const double lo = saliency.minCoeff();
  const double hi = saliency.maxCoeff();
  if (hi - lo < 1e-12)
    saliency.setConstant(0.5);
  else
    saliency = (saliency.array() - lo) / (hi - lo);
  return saliency;
}

void dump_attention(const GuidanceNet& net, const Tensor4& condition, const std::string& path) {
  EncodeCache cache;
  encode_condition(net, condition, cache);
  const MatX saliency = attention_saliency(cache.attn, cache.s2.h, cache.s2.w);
  write_gray_png(path, saliency);
}

}  // namespace chmp
