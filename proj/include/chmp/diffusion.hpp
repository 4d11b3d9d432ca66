#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "chmp/guidance.hpp"
#include "chmp/rng.hpp"
#include "chmp/tensor.hpp"

namespace chmp {

/// Variance-preserving noise schedule; alpha_bar[t-1] is the cumulative
/// product for step t in 1..T.
struct DiffusionSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  /// alpha_bar at step t, with the convention alpha_bar(0) = 1.
  double alpha_bar_at(int t) const {
    if (t < 0 || t > steps) throw InvalidArgumentError("schedule: step out of range");
    return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)];
  }
};

/// Linear beta schedule from beta_start to beta_end over T steps.
DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end);

/// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, t in [1, T].
Tensor4 forward_diffuse(const Tensor4& z0, int t, const Tensor4& eps,
                        const DiffusionSchedule& sched);

/// omega(t) * mean((eps_true - eps_pred)^2); default weight is 1.
double training_loss(const Tensor4& eps_true, const Tensor4& eps_pred, int t,
                     const std::function<double(int)>& weight_fn = nullptr);

/// Sinusoidal step embedding broadcast as constant extra channels.
inline constexpr int kTimeEmbedChannels = 4;
std::vector<double> time_embedding(int t);

struct ToyDenoiserConfig {
  int latent_channels = 4;
  int hidden = 32;
};

/// Small conv stack predicting eps from (z_t + guidance, t-embedding).
/// Guidance enters by channel-wise addition to the latent before the first
/// convolution; pass nullptr to run unconditioned.
struct ToyDenoiser {
  ConvLayer conv1;  // C + kTimeEmbedChannels -> hidden, k3 p1
  ConvLayer conv2;  // hidden -> hidden, k3 p1
  ConvLayer conv3;  // hidden -> C, k3 p1
  int latent_channels = 0;

  ToyDenoiser() = default;
  ToyDenoiser(const ToyDenoiserConfig& config, std::uint64_t seed);

  void zero_grad();
  std::size_t num_params() const;

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (ConvLayer* layer : {&conv1, &conv2, &conv3}) {
      for (std::size_t i = 0; i < layer->weight.size(); ++i)
        fn(layer->weight[i], layer->grad_weight[i]);
      for (std::size_t i = 0; i < layer->bias.size(); ++i)
        fn(layer->bias[i], layer->grad_bias[i]);
    }
  }
};

struct DenoiserCache {
  Tensor4 input, a1, s1, a2, s2;
};

Tensor4 denoise(const ToyDenoiser& net, const Tensor4& z_t, int t, const Tensor4* guidance);
Tensor4 denoise(const ToyDenoiser& net, const Tensor4& z_t, int t, const Tensor4* guidance,
                DenoiserCache& cache);

/// Backward; returns the gradient wrt the (z_t + guidance) latent slice, i.e.
/// the gradient that flows into the fused guidance y.
Tensor4 denoise_backward(ToyDenoiser& net, const DenoiserCache& cache,
                         const Tensor4& grad_output);

/// Per-condition encoders keyed by canonical condition name.
using GuidanceNets = std::map<std::string, GuidanceNet>;
using GuidanceBundle = std::map<std::string, Tensor4>;

struct TrainItem {
  Tensor4 z0;
  GuidanceBundle conditions;
};

/// One SGD step over the batch: per item draw t ~ U[1,T] and eps ~ N(0,I),
/// diffuse, encode + fuse guidance, predict, backprop the MSE through the
/// denoiser and all guidance nets, then apply the averaged gradients.
/// Returns the batch mean loss.
double train_step(ToyDenoiser& denoiser, GuidanceNets& nets, const std::vector<TrainItem>& batch,
                  const DiffusionSchedule& sched, CounterRng& rng, double lr);

/// Noise predictor hook for sampling: (z_t, t, guidance-or-null) -> eps_hat.
using NoisePredictor = std::function<Tensor4(const Tensor4&, int, const Tensor4*)>;

/// Deterministic DDIM over a uniformly strided timestep subsequence ending at
/// t = 0. `guidance` may be null (unconditioned).
Tensor4 sample(const NoisePredictor& predict, const Tensor4* guidance, const Tensor4& z_T,
               const DiffusionSchedule& sched, int steps);

/// The strided timestep ladder used by sample(): steps+1 values from T down
/// to 0.
std::vector<int> sample_timesteps(int total_steps, int steps);

}  // namespace chmp
