#include "chmp/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace chmp {

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw InvalidArgumentError("make_schedule: need at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw InvalidArgumentError("make_schedule: need 0 < beta_start <= beta_end < 1");
  DiffusionSchedule sched;
  sched.steps = steps;
  sched.beta.resize(static_cast<std::size_t>(steps));
  sched.alpha_bar.resize(static_cast<std::size_t>(steps));
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
    const double b = beta_start + frac * (beta_end - beta_start);
    sched.beta[static_cast<std::size_t>(t)] = b;
    prod *= 1.0 - b;
    sched.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
  return sched;
}

Tensor4 forward_diffuse(const Tensor4& z0, int t, const Tensor4& eps,
                        const DiffusionSchedule& sched) {
  if (t < 1 || t > sched.steps) throw InvalidArgumentError("forward_diffuse: t out of range");
  if (!z0.same_shape(eps)) throw DimensionError("forward_diffuse: z0/eps shape mismatch");
  const double ab = sched.alpha_bar_at(t);
  const double sa = std::sqrt(ab);
  const double sb = std::sqrt(1.0 - ab);
  Tensor4 out = z0;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = sa * z0.data[i] + sb * eps.data[i];
  return out;
}

double training_loss(const Tensor4& eps_true, const Tensor4& eps_pred, int t,
                     const std::function<double(int)>& weight_fn) {
  if (!eps_true.same_shape(eps_pred)) throw DimensionError("training_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps_true.data.size(); ++i) {
    const double d = eps_true.data[i] - eps_pred.data[i];
    acc += d * d;
  }
  const double w = weight_fn ? weight_fn(t) : 1.0;
  return w * acc / static_cast<double>(eps_true.data.size());
}

std::vector<double> time_embedding(int t) {
  std::vector<double> emb(static_cast<std::size_t>(kTimeEmbedChannels));
  for (int i = 0; i < kTimeEmbedChannels / 2; ++i) {
    const double freq =
        std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(kTimeEmbedChannels));
    emb[static_cast<std::size_t>(2 * i)] = std::sin(static_cast<double>(t) * freq);
    emb[static_cast<std::size_t>(2 * i + 1)] = std::cos(static_cast<double>(t) * freq);
  }
  return emb;
}

ToyDenoiser::ToyDenoiser(const ToyDenoiserConfig& config, std::uint64_t seed)
    : conv1(config.latent_channels + kTimeEmbedChannels, config.hidden, 3, 1, 1),
      conv2(config.hidden, config.hidden, 3, 1, 1),
      conv3(config.hidden, config.latent_channels, 3, 1, 1),
      latent_channels(config.latent_channels) {
  CounterRng rng(seed, /*stream=*/0x64656e6f);
  for (ConvLayer* layer : {&conv1, &conv2, &conv3}) {
    const double std_dev =
        std::sqrt(2.0 / static_cast<double>(layer->c_in * layer->kernel * layer->kernel));
    for (double& w : layer->weight) w = std_dev * rng.next_normal();
  }
}

void ToyDenoiser::zero_grad() {
  conv1.zero_grad();
  conv2.zero_grad();
  conv3.zero_grad();
}

std::size_t ToyDenoiser::num_params() const {
  return conv1.num_params() + conv2.num_params() + conv3.num_params();
}

Tensor4 denoise(const ToyDenoiser& net, const Tensor4& z_t, int t, const Tensor4* guidance) {
  DenoiserCache cache;
  return denoise(net, z_t, t, guidance, cache);
}

Tensor4 denoise(const ToyDenoiser& net, const Tensor4& z_t, int t, const Tensor4* guidance,
                DenoiserCache& cache) {
  if (z_t.c != net.latent_channels) throw DimensionError("denoise: latent channel mismatch");
  if (guidance && !guidance->same_shape(z_t))
    throw DimensionError("denoise: guidance shape must match the latent");

  Tensor4 input(z_t.n, z_t.c + kTimeEmbedChannels, z_t.h, z_t.w);
  const std::vector<double> emb = time_embedding(t);
  for (int b = 0; b < z_t.n; ++b) {
    for (int c = 0; c < z_t.c; ++c)
      for (int y = 0; y < z_t.h; ++y)
        for (int x = 0; x < z_t.w; ++x)
          input.at(b, c, y, x) =
              guidance ? z_t.at(b, c, y, x) + guidance->at(b, c, y, x) : z_t.at(b, c, y, x);
    for (int c = 0; c < kTimeEmbedChannels; ++c)
      for (int y = 0; y < z_t.h; ++y)
        for (int x = 0; x < z_t.w; ++x)
          input.at(b, z_t.c + c, y, x) = emb[static_cast<std::size_t>(c)];
  }

  cache.input = input;
  cache.a1 = conv2d(input, net.conv1);
  cache.s1 = silu(cache.a1);
  cache.a2 = conv2d(cache.s1, net.conv2);
  cache.s2 = silu(cache.a2);
  return conv2d(cache.s2, net.conv3);
}

Tensor4 denoise_backward(ToyDenoiser& net, const DenoiserCache& cache,
                         const Tensor4& grad_output) {
  Tensor4 g = conv2d_backward(cache.s2, net.conv3, grad_output);
  g = silu_backward(cache.a2, g);
  g = conv2d_backward(cache.s1, net.conv2, g);
  g = silu_backward(cache.a1, g);
  const Tensor4 grad_input = conv2d_backward(cache.input, net.conv1, g);

  // latent slice only; the time-embedding channels are not differentiated
  Tensor4 grad_latent(grad_input.n, net.latent_channels, grad_input.h, grad_input.w);
  for (int b = 0; b < grad_input.n; ++b)
    for (int c = 0; c < net.latent_channels; ++c)
      for (int y = 0; y < grad_input.h; ++y)
        for (int x = 0; x < grad_input.w; ++x)
          grad_latent.at(b, c, y, x) = grad_input.at(b, c, y, x);
  return grad_latent;
}

double train_step(ToyDenoiser& denoiser, GuidanceNets& nets, const std::vector<TrainItem>& batch,
                  const DiffusionSchedule& sched, CounterRng& rng, double lr) {
  if (batch.empty()) throw InvalidArgumentError("train_step: empty batch");
  denoiser.zero_grad();
  for (auto& [name, net] : nets) net.zero_grad();

  double total_loss = 0.0;
  for (const TrainItem& item : batch) {
    const int t = static_cast<int>(rng.next_range(1, static_cast<std::uint64_t>(sched.steps)));
    Tensor4 eps = item.z0;
    for (double& v : eps.data) v = rng.next_normal();
    const Tensor4 z_t = forward_diffuse(item.z0, t, eps, sched);

    // encode conditions in canonical order, fuse by summation
    std::map<std::string, EncodeCache> caches;
    GuidanceBundle encoded;
    for (const std::string& name : condition_order()) {
      auto net_it = nets.find(name);
      auto cond_it = item.conditions.find(name);
      if (net_it == nets.end() || cond_it == item.conditions.end()) continue;
      encoded[name] = encode_condition(net_it->second, cond_it->second, caches[name]);
    }
    Tensor4 y;
    const bool has_guidance = !encoded.empty();
    if (has_guidance) y = fuse(encoded);

    DenoiserCache dcache;
    const Tensor4 eps_pred = denoise(denoiser, z_t, t, has_guidance ? &y : nullptr, dcache);
    total_loss += training_loss(eps, eps_pred, t);

    // d loss / d eps_pred, loss averaged over batch afterwards
    Tensor4 grad = eps_pred;
    const double scale =
        2.0 / (static_cast<double>(eps.data.size()) * static_cast<double>(batch.size()));
    for (std::size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] = scale * (eps_pred.data[i] - eps.data[i]);

    const Tensor4 grad_latent = denoise_backward(denoiser, dcache, grad);
    // y enters by addition, so each guidance net sees grad_latent directly
    for (const std::string& name : condition_order()) {
      auto cache_it = caches.find(name);
      if (cache_it == caches.end()) continue;
      encode_condition_backward(nets.at(name), cache_it->second, grad_latent);
    }
  }

  const auto sgd = [lr](double& w, double& g) { w -= lr * g; };
  denoiser.for_each_param(sgd);
  for (const std::string& name : condition_order()) {
    auto it = nets.find(name);
    if (it != nets.end()) it->second.for_each_param(sgd);
  }
  return total_loss / static_cast<double>(batch.size());
}

std::vector<int> sample_timesteps(int total_steps, int steps) {
  if (steps < 1) throw InvalidArgumentError("sample: need at least one step");
  if (steps > total_steps) throw InvalidArgumentError("sample: steps exceed the schedule length");
  std::vector<int> ladder;
  ladder.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double frac = static_cast<double>(steps - i) / static_cast<double>(steps);
    ladder.push_back(static_cast<int>(std::lround(frac * static_cast<double>(total_steps))));
  }
  ladder.front() = total_steps;
  ladder.back() = 0;
  return ladder;
}

Tensor4 sample(const NoisePredictor& predict, const Tensor4* guidance, const Tensor4& z_T,
               const DiffusionSchedule& sched, int steps) {
  const std::vector<int> ladder = sample_timesteps(sched.steps, steps);
  Tensor4 z = z_T;
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    const int t = ladder[i];
    const int t_next = ladder[i + 1];
    const Tensor4 eps_hat = predict(z, t, guidance);
    const double ab = sched.alpha_bar_at(t);
    const double ab_next = sched.alpha_bar_at(t_next);
    const double sa = std::sqrt(ab);
    const double sb = std::sqrt(1.0 - ab);
    const double sa_next = std::sqrt(ab_next);
    const double sb_next = std::sqrt(1.0 - ab_next);
    Tensor4 next = z;
    for (std::size_t j = 0; j < z.data.size(); ++j) {
      const double z0_hat = (z.data[j] - sb * eps_hat.data[j]) / sa;
      next.data[j] = sa_next * z0_hat + sb_next * eps_hat.data[j];
    }
    z = std::move(next);
  }
  return z;
}

}  // namespace chmp
