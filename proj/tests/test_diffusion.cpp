#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "chmp/diffusion.hpp"

using namespace chmp;

namespace {

Tensor4 random_tensor(int n, int c, int h, int w, CounterRng& rng) {
  Tensor4 t(n, c, h, w);
  for (double& v : t.data) v = rng.next_normal();
  return t;
}

GuidanceBundle random_conditions(int h, int w, CounterRng& rng) {
  GuidanceBundle bundle;
  for (const std::string& name : condition_order())
    bundle[name] = random_tensor(1, 3, 2 * h, 2 * w, rng);
  return bundle;
}

std::vector<double> params_of(ToyDenoiser& net) {
  std::vector<double> out;
  net.for_each_param([&](double& p, double&) { out.push_back(p); });
  return out;
}

}  // namespace

TEST_CASE("linear beta schedule and cumulative products") {
  const DiffusionSchedule sched = make_schedule(1000, 1e-4, 0.02);
  REQUIRE(sched.beta.size() == 1000);
  CHECK(sched.beta.front() == 1e-4);
  CHECK(sched.beta.back() == 0.02);
  // linearity: constant increments
  const double inc = sched.beta[1] - sched.beta[0];
  for (std::size_t i = 1; i < sched.beta.size(); ++i)
    CHECK(sched.beta[i] - sched.beta[i - 1] == doctest::Approx(inc).epsilon(1e-9));

  // cumulative product oracle
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    prod *= 1.0 - sched.beta[static_cast<std::size_t>(t - 1)];
    CHECK(sched.alpha_bar_at(t) == doctest::Approx(prod).epsilon(1e-14));
  }
  CHECK(sched.alpha_bar_at(0) == 1.0);
  // monotone decreasing, in (0, 1)
  for (int t = 1; t <= 1000; ++t) {
    CHECK(sched.alpha_bar_at(t) < sched.alpha_bar_at(t - 1));
    CHECK(sched.alpha_bar_at(t) > 0.0);
  }
  CHECK_THROWS_AS(sched.alpha_bar_at(-1), InvalidArgumentError);
  CHECK_THROWS_AS(sched.alpha_bar_at(1001), InvalidArgumentError);

  CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), InvalidArgumentError);
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), InvalidArgumentError);
  CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), InvalidArgumentError);
  CHECK_THROWS_AS(make_schedule(10, 0.5, 1.0), InvalidArgumentError);

  const DiffusionSchedule one = make_schedule(1, 0.1, 0.5);
  CHECK(one.beta[0] == 0.1);
}

TEST_CASE("forward diffusion: closed form and exact inversion") {
  const DiffusionSchedule sched = make_schedule(100, 1e-3, 0.05);
  CounterRng rng(21);
  const Tensor4 z0 = random_tensor(2, 3, 4, 4, rng);
  const Tensor4 eps = random_tensor(2, 3, 4, 4, rng);

  for (int t : {1, 37, 100}) {
    const Tensor4 zt = forward_diffuse(z0, t, eps, sched);
    const double ab = sched.alpha_bar_at(t);
    for (std::size_t i = 0; i < z0.size(); ++i) {
      CHECK(zt.data[i] ==
            doctest::Approx(std::sqrt(ab) * z0.data[i] + std::sqrt(1.0 - ab) * eps.data[i])
                .epsilon(1e-15));
      // invert with the known eps
      const double rec = (zt.data[i] - std::sqrt(1.0 - ab) * eps.data[i]) / std::sqrt(ab);
      CHECK(std::abs(rec - z0.data[i]) < 1e-12);
    }
  }

  // zero noise shrinks toward the origin; full noise at large t dominates
  const Tensor4 zero_eps(2, 3, 4, 4);
  const Tensor4 shrunk = forward_diffuse(z0, 100, zero_eps, sched);
  for (std::size_t i = 0; i < z0.size(); ++i)
    CHECK(std::abs(shrunk.data[i]) <= std::abs(z0.data[i]) + 1e-15);

  CHECK_THROWS_AS(forward_diffuse(z0, 0, eps, sched), InvalidArgumentError);
  CHECK_THROWS_AS(forward_diffuse(z0, 101, eps, sched), InvalidArgumentError);
  CHECK_THROWS_AS(forward_diffuse(z0, 1, Tensor4(1, 3, 4, 4), sched), DimensionError);
}

TEST_CASE("forward diffusion preserves unit variance") {
  const DiffusionSchedule sched = make_schedule(1000, 1e-4, 0.02);
  CounterRng rng(22);
  for (int t : {1, 250, 1000}) {
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    Tensor4 z0(1, 1, 1, 1), eps(1, 1, 1, 1);
    for (int i = 0; i < n; ++i) {
      z0.data[0] = rng.next_normal();
      eps.data[0] = rng.next_normal();
      const double v = forward_diffuse(z0, t, eps, sched).data[0];
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
  }
}

TEST_CASE("training loss: zero at equality, mean-square oracle, weight hook") {
  CounterRng rng(23);
  const Tensor4 a = random_tensor(1, 2, 3, 3, rng);
  CHECK(training_loss(a, a, 5) == 0.0);

  const Tensor4 b = random_tensor(1, 2, 3, 3, rng);
  double want = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    want += d * d;
  }
  want /= static_cast<double>(a.size());
  CHECK(training_loss(a, b, 5) == doctest::Approx(want).epsilon(1e-14));

  const auto weight = [](int t) { return 0.5 * t; };
  CHECK(training_loss(a, b, 4, weight) == doctest::Approx(2.0 * want).epsilon(1e-13));

  CHECK_THROWS_AS(training_loss(a, Tensor4(1, 2, 3, 4), 1), DimensionError);
}

TEST_CASE("time embedding: bounded, right size, distinguishes steps") {
  const auto e1 = time_embedding(1);
  REQUIRE(static_cast<int>(e1.size()) == kTimeEmbedChannels);
  for (double v : e1) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK(time_embedding(1) != time_embedding(2));
  const auto e0 = time_embedding(0);
  CHECK(e0[0] == 0.0);  // sin(0)
  CHECK(e0[1] == 1.0);  // cos(0)
}

TEST_CASE("denoiser: shape contract and guidance-addition equivalence") {
  const ToyDenoiser net(ToyDenoiserConfig{}, 77);
  CounterRng rng(24);
  const Tensor4 z = random_tensor(2, 4, 8, 8, rng);
  const Tensor4 g = random_tensor(2, 4, 8, 8, rng);

  const Tensor4 out = denoise(net, z, 10, nullptr);
  CHECK(out.same_shape(z));

  // guidance enters strictly by addition to the latent
  Tensor4 z_plus_g = z;
  z_plus_g += g;
  const Tensor4 guided = denoise(net, z, 10, &g);
  const Tensor4 summed = denoise(net, z_plus_g, 10, nullptr);
  for (std::size_t i = 0; i < guided.size(); ++i) CHECK(guided.data[i] == summed.data[i]);

  // zero guidance is bitwise equal to no guidance
  const Tensor4 zero_g(2, 4, 8, 8);
  const Tensor4 with_zero = denoise(net, z, 10, &zero_g);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(with_zero.data[i] == out.data[i]);

  CHECK_THROWS_AS(denoise(net, Tensor4(1, 3, 8, 8), 10, nullptr), DimensionError);
  const Tensor4 bad_g(2, 4, 4, 4);
  CHECK_THROWS_AS(denoise(net, z, 10, &bad_g), DimensionError);
}

TEST_CASE("denoiser gradients match central finite differences") {
  ToyDenoiserConfig cfg;
  cfg.latent_channels = 2;
  cfg.hidden = 3;
  ToyDenoiser net(cfg, 31);
  CounterRng rng(25);
  const Tensor4 z = random_tensor(1, 2, 3, 3, rng);
  const Tensor4 mask = random_tensor(1, 2, 3, 3, rng);

  auto loss = [&](ToyDenoiser& n) {
    const Tensor4 out = denoise(n, z, 7, nullptr);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += out.data[i] * mask.data[i];
    return acc;
  };

  net.zero_grad();
  DenoiserCache cache;
  denoise(net, z, 7, nullptr, cache);
  const Tensor4 grad_latent = denoise_backward(net, cache, mask);
  CHECK(grad_latent.same_shape(z));

  const double eps = 1e-5;
  net.for_each_param([&](double& p, double& g) {
    const double orig = p;
    p = orig + eps;
    const double lp = loss(net);
    p = orig - eps;
    const double lm = loss(net);
    p = orig;
    const double fd = (lp - lm) / (2 * eps);
    CHECK(std::abs(g - fd) < 1e-6 + 1e-4 * std::max(std::abs(fd), std::abs(g)));
  });

  // latent gradient is also the gradient into additive guidance
  for (int trial = 0; trial < 8; ++trial) {
    const auto idx = static_cast<std::size_t>(rng.next_range(0, z.size() - 1));
    Tensor4 zp = z, zm = z;
    zp.data[idx] += eps;
    zm.data[idx] -= eps;
    auto eval = [&](const Tensor4& x) {
      const Tensor4 out = denoise(net, x, 7, nullptr);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) acc += out.data[i] * mask.data[i];
      return acc;
    };
    const double fd = (eval(zp) - eval(zm)) / (2 * eps);
    CHECK(std::abs(grad_latent.data[idx] - fd) < 1e-6 + 1e-4 * std::abs(fd));
  }
}

TEST_CASE("sampling ladder: strided, endpoints pinned, strictly decreasing") {
  const auto ladder = sample_timesteps(1000, 10);
  REQUIRE(ladder.size() == 11);
  CHECK(ladder.front() == 1000);
  CHECK(ladder.back() == 0);
  for (std::size_t i = 1; i < ladder.size(); ++i) CHECK(ladder[i] < ladder[i - 1]);
  CHECK(ladder[1] == 900);
  CHECK(ladder[5] == 500);

  const auto full = sample_timesteps(10, 10);
  REQUIRE(full.size() == 11);
  for (int i = 0; i <= 10; ++i) CHECK(full[static_cast<std::size_t>(i)] == 10 - i);

  const auto single = sample_timesteps(1000, 1);
  CHECK(single == std::vector<int>{1000, 0});

  CHECK_THROWS_AS(sample_timesteps(1000, 0), InvalidArgumentError);
  CHECK_THROWS_AS(sample_timesteps(10, 11), InvalidArgumentError);
}

TEST_CASE("deterministic sampler recovers z0 given the ideal noise predictor") {
  const DiffusionSchedule sched = make_schedule(1000, 1e-4, 0.02);
  CounterRng rng(26);
  const Tensor4 z0 = random_tensor(1, 4, 4, 4, rng);
  const Tensor4 eps = random_tensor(1, 4, 4, 4, rng);
  const Tensor4 z_T = forward_diffuse(z0, 1000, eps, sched);

  // oracle predictor: inverts the closed form exactly at every step
  const NoisePredictor oracle = [&](const Tensor4& z, int t, const Tensor4*) {
    const double ab = sched.alpha_bar_at(t);
    Tensor4 out = z;
    for (std::size_t i = 0; i < z.size(); ++i)
      out.data[i] = (z.data[i] - std::sqrt(ab) * z0.data[i]) / std::sqrt(1.0 - ab);
    return out;
  };

  const Tensor4 one_step = sample(oracle, nullptr, z_T, sched, 1);
  for (std::size_t i = 0; i < z0.size(); ++i)
    CHECK(std::abs(one_step.data[i] - z0.data[i]) < 1e-10);

  const Tensor4 ten_steps = sample(oracle, nullptr, z_T, sched, 10);
  for (std::size_t i = 0; i < z0.size(); ++i)
    CHECK(std::abs(ten_steps.data[i] - z0.data[i]) < 1e-8);
}

TEST_CASE("sampler with a zero predictor rescales by the cumulative schedule") {
  const DiffusionSchedule sched = make_schedule(50, 1e-3, 0.04);
  Tensor4 z_T(1, 1, 1, 2);
  z_T.data = {0.8, -1.5};
  const NoisePredictor zero = [](const Tensor4& z, int, const Tensor4*) {
    Tensor4 out = z;
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  };
  // eps_hat = 0 collapses DDIM to z0 = z_T / sqrt(alpha_bar(T)), any ladder
  for (int steps : {1, 5, 50}) {
    const Tensor4 out = sample(zero, nullptr, z_T, sched, steps);
    for (std::size_t i = 0; i < z_T.size(); ++i)
      CHECK(out.data[i] ==
            doctest::Approx(z_T.data[i] / std::sqrt(sched.alpha_bar_at(50))).epsilon(1e-12));
  }
}

TEST_CASE("sampler is deterministic and forwards guidance to the predictor") {
  const DiffusionSchedule sched = make_schedule(100, 1e-3, 0.02);
  const ToyDenoiser net(ToyDenoiserConfig{}, 5);
  CounterRng rng(27);
  const Tensor4 z_T = random_tensor(1, 4, 4, 4, rng);
  const Tensor4 g = random_tensor(1, 4, 4, 4, rng);

  int guided_calls = 0;
  const NoisePredictor predict = [&](const Tensor4& z, int t, const Tensor4* guidance) {
    if (guidance) ++guided_calls;
    return denoise(net, z, t, guidance);
  };

  const Tensor4 a = sample(predict, &g, z_T, sched, 5);
  CHECK(guided_calls == 5);
  const Tensor4 b = sample(predict, &g, z_T, sched, 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);

  const Tensor4 c = sample(predict, nullptr, z_T, sched, 5);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data[i] != c.data[i]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("train_step: deterministic, zero learning rate freezes parameters") {
  const DiffusionSchedule sched = make_schedule(100, 1e-3, 0.02);
  GuidanceNetConfig gcfg;
  gcfg.out_channels = 4;
  CounterRng data_rng(28);

  std::vector<TrainItem> batch;
  for (int i = 0; i < 2; ++i) {
    TrainItem item;
    item.z0 = random_tensor(1, 4, 4, 4, data_rng);
    item.conditions = random_conditions(4, 4, data_rng);
    batch.push_back(std::move(item));
  }

  auto run = [&](std::uint64_t seed, double lr, int steps) {
    ToyDenoiser denoiser(ToyDenoiserConfig{}, 1);
    GuidanceNets nets;
    for (const std::string& name : condition_order()) nets.emplace(name, GuidanceNet(gcfg, 2));
    CounterRng rng(seed);
    std::vector<double> losses;
    for (int s = 0; s < steps; ++s) losses.push_back(train_step(denoiser, nets, batch, sched, rng, lr));
    return std::pair{losses, params_of(denoiser)};
  };

  const auto [l1, p1] = run(9, 1e-3, 3);
  const auto [l2, p2] = run(9, 1e-3, 3);
  CHECK(l1 == l2);
  CHECK(p1 == p2);

  const auto [l3, p3] = run(10, 1e-3, 3);
  CHECK(l1 != l3);

  // lr = 0: parameters unchanged, losses repeat the rng stream's draws
  ToyDenoiser frozen(ToyDenoiserConfig{}, 1);
  const auto before = params_of(frozen);
  GuidanceNets nets;
  for (const std::string& name : condition_order()) nets.emplace(name, GuidanceNet(gcfg, 2));
  CounterRng rng(11);
  const double loss = train_step(frozen, nets, batch, sched, rng, 0.0);
  CHECK(loss > 0.0);
  CHECK(params_of(frozen) == before);

  CHECK_THROWS_AS(train_step(frozen, nets, {}, sched, rng, 0.0), InvalidArgumentError);
}

TEST_CASE("train_step drives the loss down on a tiny fixed problem") {
  const DiffusionSchedule sched = make_schedule(20, 1e-3, 0.05);
  ToyDenoiserConfig dcfg;
  dcfg.hidden = 8;
  ToyDenoiser denoiser(dcfg, 3);
  GuidanceNets nets;  // unconditioned: exercises the no-guidance path

  CounterRng data_rng(29);
  std::vector<TrainItem> batch;
  for (int i = 0; i < 4; ++i) {
    TrainItem item;
    item.z0 = random_tensor(1, 4, 4, 4, data_rng);
    batch.push_back(std::move(item));
  }

  CounterRng rng(30);
  std::vector<double> losses;
  for (int s = 0; s < 120; ++s) losses.push_back(train_step(denoiser, nets, batch, sched, rng, 5e-3));

  const auto mean = [](auto begin, auto end) {
    double acc = 0.0;
    int n = 0;
    for (auto it = begin; it != end; ++it, ++n) acc += *it;
    return acc / n;
  };
  const double early = mean(losses.begin(), losses.begin() + 20);
  const double late = mean(losses.end() - 20, losses.end());
  CHECK(late < early);
}
