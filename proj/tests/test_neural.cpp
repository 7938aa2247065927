#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cadrepair/errors.h"
#include "cadrepair/neural.h"
#include "oracles.h"

using namespace cadrepair;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// True when both stencil points share every ReLU on/off decision, i.e. the
// central difference does not straddle a kink.
bool same_pattern(const Mlp& a, std::span<const double> xa, const Mlp& b, std::span<const double> xb) {
  const ForwardResult fa = mlp_forward(a, xa);
  const ForwardResult fb = mlp_forward(b, xb);
  for (std::size_t l = 0; l + 1 < fa.cache.pre.size(); ++l) {
    for (std::size_t i = 0; i < fa.cache.pre[l].size(); ++i) {
      if ((fa.cache.pre[l][i] > 0.0) != (fb.cache.pre[l][i] > 0.0)) return false;
    }
  }
  return true;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return Errc::Config;
}

}  // namespace

TEST_CASE("forward pass examples") {
  const std::array<std::size_t, 3> dims = {3, 4, 1};
  const Mlp zero = Mlp::zeros(dims, OutputActivation::Sigmoid);
  CHECK(mlp_predict(zero, std::vector<double>{1, -2, 3})[0] == 0.5);

  const std::array<std::size_t, 2> id_dims = {3, 3};
  Mlp id = Mlp::zeros(id_dims, OutputActivation::Identity);
  for (std::size_t i = 0; i < 3; ++i) id.layers[0].weight[i * 3 + i] = 1.0;
  CHECK(mlp_predict(id, std::vector<double>{0.5, -2, 7}) == std::vector<double>{0.5, -2, 7});

  // 2-2-1: h = relu([1 -1; 2 0.5] x + [0.5; -1]), y = [3 -2] h + 0.25
  const std::array<std::size_t, 3> hand_dims = {2, 2, 1};
  Mlp hand = Mlp::zeros(hand_dims, OutputActivation::Identity);
  hand.layers[0].weight = {1, -1, 2, 0.5};
  hand.layers[0].bias = {0.5, -1};
  hand.layers[1].weight = {3, -2};
  hand.layers[1].bias = {0.25};
  // x = (1, 2): pre = (-0.5, 2), h = (0, 2), y = -4 + 0.25
  CHECK(mlp_predict(hand, std::vector<double>{1, 2})[0] == -3.75);
  // x = (2, -1): pre = (3.5, 2.5), h = (3.5, 2.5), y = 10.5 - 5 + 0.25
  CHECK(mlp_predict(hand, std::vector<double>{2, -1})[0] == 5.75);

  CHECK(code_of([&] { mlp_predict(hand, std::vector<double>{1, 2, 3}); }) == Errc::DimensionMismatch);
  const std::array<std::size_t, 2> two_out = {2, 2};
  CHECK(code_of([&] { mlp_grad_input(Mlp::zeros(two_out, OutputActivation::Identity), std::vector<double>{1, 2}); }) ==
        Errc::NonScalarOutput);
}

TEST_CASE("created networks chain dimensions and are seeded") {
  const Mlp a = Mlp::create(kClassifierDims, OutputActivation::Sigmoid, 5);
  REQUIRE(a.layers.size() == 3);
  for (std::size_t l = 1; l < a.layers.size(); ++l) CHECK(a.layers[l].in == a.layers[l - 1].out);
  CHECK(a.parameter_count() == 21 * 128 + 128 + 128 * 64 + 64 + 64 + 1);
  CHECK(a == Mlp::create(kClassifierDims, OutputActivation::Sigmoid, 5));
  CHECK_FALSE(a == Mlp::create(kClassifierDims, OutputActivation::Sigmoid, 6));
  CHECK(a.all_finite());
}

TEST_CASE("input gradient: sigmoid single layer and zero network") {
  const std::array<std::size_t, 2> dims = {3, 1};
  Mlp m = Mlp::zeros(dims, OutputActivation::Sigmoid);
  m.layers[0].weight = {1.0, -2.0, 0.5};
  // w.x = 0 at x = (1, 1, 2)
  const std::vector<double> g = mlp_grad_input(m, std::vector<double>{1, 1, 2});
  CHECK(g == std::vector<double>{0.25, -0.5, 0.125});

  const std::vector<double> x = {0.3, 0.1, -0.4};
  const double s = 1.0 / (1.0 + std::exp(-(0.3 - 0.2 - 0.2)));
  const std::vector<double> g2 = mlp_grad_input(m, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g2[i] == doctest::Approx(s * (1 - s) * m.layers[0].weight[i]).epsilon(1e-14));

  const Mlp z = Mlp::zeros(kClassifierDims, OutputActivation::Sigmoid);
  for (double v : mlp_grad_input(z, std::vector<double>(kLatentDim, 0.3))) CHECK(v == 0.0);
}

TEST_CASE("input gradient matches central differences at 100 random points") {
  // Relative error of the whole gradient vector at each point: single tiny
  // components sit below the difference quotient's rounding floor (~1e-11).
  std::mt19937_64 rng(41);
  const Mlp m = Mlp::create(kClassifierDims, OutputActivation::Sigmoid, 3);
  const double h = 1e-5;
  double worst = 0.0;
  int compared = 0;
  while (compared < 100) {
    std::vector<double> x = random_vec(rng, kLatentDim, 0.5);
    const std::vector<double> g = mlp_grad_input(m, x);
    double diff = 0, ng = 0, nf = 0;
    bool smooth = true;
    for (std::size_t i = 0; i < kLatentDim && smooth; ++i) {
      std::vector<double> xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      smooth = same_pattern(m, xp, m, xm);
      const double fd = (mlp_predict(m, xp)[0] - mlp_predict(m, xm)[0]) / (2 * h);
      diff += (g[i] - fd) * (g[i] - fd);
      ng += g[i] * g[i];
      nf += fd * fd;
    }
    if (!smooth) continue;
    worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(ng), std::sqrt(nf), 1e-12}));
    ++compared;
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("parameter gradients match central differences at 100 random points") {
  std::mt19937_64 rng(43);
  const std::array<std::size_t, 4> dims = {6, 8, 5, 3};
  Mlp m = Mlp::create(dims, OutputActivation::Identity, 9);
  const double h = 1e-5;
  double worst = 0.0;
  int compared = 0;
  for (int p = 0; p < 100; ++p) {
    const std::vector<double> x = random_vec(rng, 6);
    const std::vector<double> target = random_vec(rng, 3);
    // loss = 0.5 ||f(x) - target||^2, so dL/d(pre_out) = f(x) - target
    auto loss = [&](const Mlp& net) {
      const std::vector<double> y = mlp_predict(net, x);
      double l = 0;
      for (std::size_t k = 0; k < y.size(); ++k) l += 0.5 * (y[k] - target[k]) * (y[k] - target[k]);
      return l;
    };
    const ForwardResult fr = mlp_forward(m, x);
    std::vector<double> d(3);
    for (std::size_t k = 0; k < 3; ++k) d[k] = fr.output[k] - target[k];
    MlpGradients grads(m);
    mlp_backward(m, fr.cache, d, grads);

    const std::size_t layer = rng() % m.layers.size();
    const std::size_t wi = rng() % m.layers[layer].weight.size();
    Mlp mp = m, mm = m;
    mp.layers[layer].weight[wi] += h;
    mm.layers[layer].weight[wi] -= h;
    if (same_pattern(mp, x, mm, x)) {
      worst = std::max(worst, rel_err(grads.weight[layer][wi], (loss(mp) - loss(mm)) / (2 * h)));
      ++compared;
    }
    const std::size_t bi = rng() % m.layers[layer].bias.size();
    mp = m, mm = m;
    mp.layers[layer].bias[bi] += h;
    mm.layers[layer].bias[bi] -= h;
    if (same_pattern(mp, x, mm, x)) {
      worst = std::max(worst, rel_err(grads.bias[layer][bi], (loss(mp) - loss(mm)) / (2 * h)));
      ++compared;
    }
  }
  CHECK(compared >= 100);
  CHECK(worst < 1e-5);
}

TEST_CASE("classifier: separable data, single class, undersampling, determinism") {
  std::mt19937_64 rng(47);
  const std::vector<double> w = random_vec(rng, kLatentDim);
  std::vector<LatentVector> zs;
  std::vector<int> labels;
  std::normal_distribution<double> g(0.0, 1.0);
  while (zs.size() < 2000) {
    LatentVector z;
    for (double& v : z.values) v = g(rng);
    double s = 0;
    for (std::size_t i = 0; i < kLatentDim; ++i) s += w[i] * z[i];
    if (std::abs(s) < 0.5) continue;  // margin
    zs.push_back(z);
    labels.push_back(s > 0 ? 1 : 0);
  }
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 3;
  const ClassifierResult r = train_classifier(zs, labels, cfg);
  CHECK(r.metrics.accuracy >= 0.95);
  CHECK(r.model.all_finite());
  for (const LatentVector& z : zs) {
    const double p = classifier_probability(r.model, z);
    REQUIRE(p >= 0.0);
    REQUIRE(p <= 1.0);
  }
  CHECK(train_classifier(zs, labels, cfg).model == r.model);

  std::vector<int> ones(labels.size(), 1);
  CHECK(code_of([&] { train_classifier(zs, ones, cfg); }) == Errc::SingleClassData);

  std::vector<int> skewed(1000, 0);
  for (std::size_t i = 0; i < 1000; i += 7) skewed[i] = 1;
  const std::vector<std::size_t> kept = undersample_balanced(skewed, 11);
  CHECK(std::set<std::size_t>(kept.begin(), kept.end()).size() == kept.size());
  CHECK(std::is_sorted(kept.begin(), kept.end()));
  std::size_t pos = 0;
  for (std::size_t i : kept) pos += static_cast<std::size_t>(skewed[i]);
  CHECK(pos * 2 == kept.size());
  CHECK(pos == 143);
}

TEST_CASE("classification metrics on a hand confusion matrix") {
  const std::vector<int> actual = {1, 1, 1, 0, 0, 0, 0, 1};
  const std::vector<int> predicted = {1, 1, 0, 0, 0, 1, 0, 1};
  const ClassifierMetrics m = classification_metrics(actual, predicted);
  CHECK(m.confusion[1][1] == 3);
  CHECK(m.confusion[1][0] == 1);
  CHECK(m.confusion[0][1] == 1);
  CHECK(m.confusion[0][0] == 3);
  CHECK(m.accuracy == 0.75);
  CHECK(m.valid.precision == 0.75);
  CHECK(m.valid.recall == 0.75);
  CHECK(m.balanced_accuracy == 0.75);
}

TEST_CASE("linear regressor examples") {
  Matrix x(2, 1), y(2, 1);
  x(1, 0) = 1;
  y(0, 0) = 1;
  y(1, 0) = 3;
  const LinearRegressor r = fit_linear_regressor(x, y, 0.0);
  CHECK(r.weight[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.bias[0] == doctest::Approx(1.0).epsilon(1e-14));

  std::mt19937_64 rng(53);
  Matrix in(200, kLatentDim);
  for (double& v : in.data) v = std::normal_distribution<double>(0, 1)(rng);
  const LinearRegressor id = fit_linear_regressor(in, in, 0.0);
  for (std::size_t o = 0; o < kLatentDim; ++o) {
    for (std::size_t i = 0; i < kLatentDim; ++i) CHECK(id.w(o, i) == doctest::Approx(o == i ? 1.0 : 0.0).scale(1));
    CHECK(std::abs(id.bias[o]) < 1e-12);
  }
  CHECK(r2_score(in, predict_rows(id, in)) == doctest::Approx(1.0));

  Matrix dup(3, 2);
  dup(0, 0) = dup(0, 1) = 1;
  dup(1, 0) = dup(1, 1) = 2;
  dup(2, 0) = dup(2, 1) = 3;
  CHECK(code_of([&] { fit_linear_regressor(dup, dup, 0.0); }) == Errc::RankDeficient);

  LinearRegressor two;
  two.in_dim = two.out_dim = 2;
  two.weight = {1, 2, -3, 0.5};
  two.bias = {0.25, -1};
  const std::vector<double> p = regressor_predict(two, std::vector<double>{2, 4});
  CHECK(p == std::vector<double>{10.25, -5});
  LinearRegressor c = two;
  c.weight = {0, 0, 0, 0};
  CHECK(regressor_predict(c, std::vector<double>{9, 9}) == two.bias);
  CHECK(code_of([&] { regressor_predict(two, std::vector<double>{1, 2, 3}); }) == Errc::DimensionMismatch);
}

TEST_CASE("ridge fit matches the normal-equation oracle") {
  std::mt19937_64 rng(59);
  const std::size_t n = 400;
  Matrix x(n, kLatentDim), y(n, kLatentDim);
  for (double& v : x.data) v = std::normal_distribution<double>(0, 1)(rng);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < kLatentDim; ++o) {
      y(r, o) = 0.3 * x(r, (o + 1) % kLatentDim) - 0.1 * x(r, o) + std::normal_distribution<double>(0, 0.5)(rng);
    }
  }
  for (double ridge : {0.0, kDefaultRidge}) {
    const LinearRegressor fit = fit_linear_regressor(x, y, ridge);
    const oracle::LinearFit ref = oracle::normal_equation_fit(x.data, y.data, n, kLatentDim, kLatentDim, ridge);
    double worst = 0;
    for (std::size_t k = 0; k < fit.weight.size(); ++k) worst = std::max(worst, std::abs(fit.weight[k] - ref.weight[k]));
    for (std::size_t k = 0; k < fit.bias.size(); ++k) worst = std::max(worst, std::abs(fit.bias[k] - ref.bias[k]));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("regressor loss gradient") {
  LinearRegressor one;
  one.in_dim = one.out_dim = 1;
  one.weight = {0.0};
  one.bias = {1.0};
  const LossGrad lg = regressor_loss_grad(one, std::vector<double>{0.0});
  CHECK(lg.loss == 1.0);
  CHECK(lg.grad[0] == -2.0);

  const LinearRegressor id = LinearRegressor::identity(kLatentDim);
  std::mt19937_64 rng(61);
  const LossGrad z = regressor_loss_grad(id, random_vec(rng, kLatentDim));
  CHECK(z.loss == 0.0);
  for (double g : z.grad) CHECK(g == 0.0);

  LinearRegressor r;
  r.in_dim = r.out_dim = kLatentDim;
  r.weight = random_vec(rng, kLatentDim * kLatentDim, 0.3);
  r.bias = random_vec(rng, kLatentDim, 0.3);
  const double h = 1e-4;
  double worst = 0;
  double worst_sg = 0;
  for (int p = 0; p < 100; ++p) {
    const std::vector<double> zv = random_vec(rng, kLatentDim);
    const LossGrad g = regressor_loss_grad(r, zv);
    const std::vector<double> y = regressor_predict(r, zv);
    const LossGrad sg = regressor_loss_grad(r, zv, true);
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      std::vector<double> zp = zv, zm = zv;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (regressor_loss_grad(r, zp).loss - regressor_loss_grad(r, zm).loss) / (2 * h);
      worst = std::max(worst, rel_err(g.grad[i], fd));
      // stop-gradient: y held fixed, loss = ||y - z||^2
      double lp = 0, lm = 0;
      for (std::size_t k = 0; k < kLatentDim; ++k) {
        lp += (y[k] - zp[k]) * (y[k] - zp[k]);
        lm += (y[k] - zm[k]) * (y[k] - zm[k]);
      }
      worst_sg = std::max(worst_sg, rel_err(sg.grad[i], (lp - lm) / (2 * h)));
    }
  }
  CHECK(worst < 1e-8);
  CHECK(worst_sg < 1e-8);
}

TEST_CASE("r2 and mse") {
  Matrix t(4, 2), p(4, 2);
  t.data = {1, 5, 2, 5, 3, 5, 4, 5};
  p.data = {1, 5, 2, 5, 3, 5, 5, 5};
  // column 0: SSE 1, SST 5; column 1 constant and exact
  CHECK(r2_score(t, p) == doctest::Approx((0.8 + 1.0) / 2).epsilon(1e-14));
  CHECK(mse(t, p) == doctest::Approx(1.0 / 8).epsilon(1e-14));
}

TEST_CASE("denoiser training: loss falls, reproducible, time embedding") {
  std::mt19937_64 rng(67);
  const DiffusionSchedule sched = build_schedule(100, 1e-4, 0.02);
  std::vector<ConditionVector> cs(256);
  std::vector<LatentVector> zs(256);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (double& v : cs[i].values) v = std::uniform_real_distribution<double>(0, 1)(rng);
    for (std::size_t k = 0; k < kLatentDim; ++k) zs[i][k] = cs[i][k % kConditionDim] - 0.5;
  }
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.05;
  cfg.seed = 5;
  const DenoiserResult a = train_denoiser(cs, zs, sched, cfg);
  CHECK(a.epoch_losses.back() <= 0.5 * a.epoch_losses.front());
  CHECK(a.model.all_finite());
  CHECK(train_denoiser(cs, zs, sched, cfg).model == a.model);
  CHECK(code_of([&] { train_denoiser({}, {}, sched, cfg); }) == Errc::EmptyDataset);

  const auto e1 = timestep_embedding(1);
  const auto e2 = timestep_embedding(2);
  CHECK(e1 != e2);
  CHECK(denoiser_input(std::vector<double>(kLatentDim, 0.0), 3, cs[0]).size() == kDenoiserInputDim);
}

TEST_CASE("model json round trip and format checks") {
  const Mlp m = Mlp::create(kClassifierDims, OutputActivation::Sigmoid, 77);
  CHECK(mlp_from_json(mlp_to_json(m, "classifier")) == m);
  LinearRegressor r = LinearRegressor::identity(kLatentDim);
  r.weight[3] = 0.1 + 1e-17;
  r.bias[2] = -1.0 / 3.0;
  CHECK(regressor_from_json(regressor_to_json(r, "ssl_regressor")) == r);
  CHECK_THROWS_AS(mlp_from_json("{\"format_version\": 2}"), Error);
  CHECK_THROWS_AS(regressor_from_json("not json"), Error);
}
