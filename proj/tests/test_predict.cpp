#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mdgp/model.hpp"
#include "mdgp/predict.hpp"
#include "mdgp/rng.hpp"

using namespace mdgp;

namespace {

NetworkConfig three_head_net(double keep) {
  NetworkConfig net;
  net.input_dim = 1;
  net.hidden_widths = {6};
  net.hidden_activation = Activation::kTanh;
  net.keep_hidden = {keep};
  net.heads = {{"b", OutcomeKind::kBinary},
               {"c", OutcomeKind::kCount},
               {"g", OutcomeKind::kContinuous}};
  net.keep_heads = {keep, keep, keep};
  net.n_train = 10;
  return net;
}

Params random_params(const NetworkConfig& net, std::uint64_t seed,
                     double scale) {
  RngStream rng(seed, 0);
  Params p = Params::zeros_like(net);
  for_each_param(p, [&](double& v) { v = rng.normal(0.0, scale); });
  return p;
}

DenseMatrix line_inputs(std::size_t n) {
  DenseMatrix x(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i) / std::max<std::size_t>(1, n - 1);
  }
  return x;
}

PredictiveSamples constant_eta_samples(double eta, std::size_t m,
                                       std::size_t n, std::size_t nj) {
  PredictiveSamples s;
  s.m_draws = m;
  s.n_locations = n;
  s.n_outcomes = nj;
  s.eta.assign(m * n * nj, eta);
  s.mask_stream_ids.assign(m, 0);
  return s;
}

}  // namespace

TEST_CASE("mc_forward: keep 1 collapses to a deterministic pass") {
  NetworkConfig net = three_head_net(1.0);
  const Params p = random_params(net, 7, 0.6);
  const DenseMatrix x = line_inputs(5);
  PredictConfig pcfg;
  pcfg.m_draws = 8;
  pcfg.seed = 101;
  const auto samples = mc_forward(p, net, x, {}, pcfg);
  for (std::size_t m = 1; m < 8; ++m) {
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(samples.at(m, i, j) == samples.at(0, i, j));
      }
    }
  }
}

TEST_CASE("mc_forward: m_draws = 1 equals a single masked pass on its stream") {
  NetworkConfig net = three_head_net(0.7);
  const Params p = random_params(net, 8, 0.6);
  const DenseMatrix x = line_inputs(3);
  PredictConfig pcfg;
  pcfg.m_draws = 1;
  pcfg.seed = 55;
  const auto samples = mc_forward(p, net, x, {}, pcfg);

  RngStream draw_rng = RngStream(55, 0).split(0);
  const MaskSet masks = sample_masks(net, draw_rng);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto trace = forward(
        p, masks, std::span<const double>(x.row(i), 1), {}, net);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(samples.at(0, i, j) == trace.eta[j]);
    }
  }
}

TEST_CASE("mc_forward: draw variance grows as keep probability falls") {
  // One mask layer varies (the hidden keep); the head mask stays at 1 so
  // each unit carries a single Bernoulli(keep) factor, whose variance
  // q(1-q) is monotone on keep in [0.5, 1].
  const DenseMatrix x = line_inputs(10);
  PredictConfig pcfg;
  pcfg.m_draws = 200;
  pcfg.seed = 11;
  double prev_var = -1.0;
  for (double keep : {1.0, 0.9, 0.7, 0.5}) {
    NetworkConfig net = three_head_net(keep);
    net.keep_hidden = {keep};
    net.keep_heads = {1.0, 1.0, 1.0};
    const Params p = random_params(net, 9, 0.8);  // same seed: same weights
    const auto samples = mc_forward(p, net, x, {}, pcfg);
    double var = 0.0;
    for (std::size_t i = 0; i < samples.n_locations; ++i) {
      for (std::size_t j = 0; j < samples.n_outcomes; ++j) {
        double mean = 0.0;
        for (std::size_t m = 0; m < samples.m_draws; ++m) {
          mean += samples.at(m, i, j);
        }
        mean /= samples.m_draws;
        for (std::size_t m = 0; m < samples.m_draws; ++m) {
          const double d = samples.at(m, i, j) - mean;
          var += d * d;
        }
      }
    }
    var /= (samples.m_draws - 1) * samples.n_locations * samples.n_outcomes;
    CHECK(var >= prev_var);
    prev_var = var;
  }
}

TEST_CASE("predictive_mean: frozen inverse-link values") {
  const std::vector<OutcomeSpec> specs = {{"b", OutcomeKind::kBinary},
                                          {"c", OutcomeKind::kCount},
                                          {"g", OutcomeKind::kContinuous}};
  const auto zero = constant_eta_samples(0.0, 4, 2, 3);
  const auto mean = predictive_mean(zero, specs);
  CHECK(mean[0] == doctest::Approx(0.5));   // binary at eta 0
  CHECK(mean[1] == doctest::Approx(1.0));   // count at eta 0
  CHECK(mean[2] == doctest::Approx(0.0));   // continuous at eta 0

  // Continuous draws {1, 3} -> 2.
  PredictiveSamples two = constant_eta_samples(0.0, 2, 1, 1);
  two.eta = {1.0, 3.0};
  const std::vector<OutcomeSpec> cont = {{"g", OutcomeKind::kContinuous}};
  CHECK(predictive_mean(two, cont)[0] == doctest::Approx(2.0));

  // Binary mean strictly inside (0,1), count mean positive.
  const auto big = constant_eta_samples(30.0, 3, 1, 3);
  const auto bm = predictive_mean(big, specs);
  CHECK(bm[0] > 0.0);
  CHECK(bm[0] < 1.0);
  CHECK(bm[1] > 0.0);
}

TEST_CASE("predictive_interval: degenerate continuous mixture has width 0") {
  const std::vector<OutcomeSpec> specs = {{"g", OutcomeKind::kContinuous}};
  const auto s = constant_eta_samples(1.25, 50, 4, 1);
  PredictConfig pcfg;
  pcfg.m_draws = 50;
  pcfg.y_sample_per_draw = 10;
  RngStream rng(1, 1);
  const std::vector<double> sigma2 = {0.0};
  const auto iv = predictive_interval(s, specs, sigma2, pcfg, rng);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(iv.lo[i] == doctest::Approx(1.25));
    CHECK(iv.hi[i] == doctest::Approx(1.25));
  }
}

TEST_CASE("predictive_interval: Gaussian width oracle at level 0.95") {
  const std::vector<OutcomeSpec> specs = {{"g", OutcomeKind::kContinuous}};
  const auto s = constant_eta_samples(0.0, 200, 1, 1);
  PredictConfig pcfg;
  pcfg.m_draws = 200;
  pcfg.y_sample_per_draw = 20;  // 4000 pooled draws
  RngStream rng(2, 2);
  const std::vector<double> sigma2 = {1.0};
  const auto iv = predictive_interval(s, specs, sigma2, pcfg, rng);
  const double width = iv.hi[0] - iv.lo[0];
  CHECK(std::abs(width - 2.0 * 1.959963984540054) <
        0.1 * 2.0 * 1.959963984540054);
}

TEST_CASE("predictive_interval: Poisson(1) quantile oracle gives [0, 3]") {
  const std::vector<OutcomeSpec> specs = {{"c", OutcomeKind::kCount}};
  const auto s = constant_eta_samples(0.0, 200, 1, 1);
  PredictConfig pcfg;
  pcfg.m_draws = 200;
  pcfg.y_sample_per_draw = 20;
  RngStream rng(3, 3);
  const auto iv = predictive_interval(s, specs, {}, pcfg, rng);
  // P(Y <= 3) ~ 0.981 and P(Y <= 2) ~ 0.920 under Poisson(1), so the
  // equal-tailed 95% interval is [0, 3] after integer snapping.
  CHECK(iv.lo[0] == 0.0);
  CHECK(iv.hi[0] == 3.0);
}

TEST_CASE("predictive_interval: level 0.99 contains level 0.95 per cell") {
  NetworkConfig net = three_head_net(0.8);
  const Params p = random_params(net, 13, 0.7);
  const DenseMatrix x = line_inputs(6);
  PredictConfig pcfg;
  pcfg.m_draws = 60;
  pcfg.y_sample_per_draw = 10;
  pcfg.seed = 17;
  const auto samples = mc_forward(p, net, x, {}, pcfg);
  const std::vector<double> sigma2 = {0.5};

  PredictConfig p95 = pcfg;
  p95.level = 0.95;
  PredictConfig p99 = pcfg;
  p99.level = 0.99;
  RngStream r95(9, 9);
  RngStream r99(9, 9);
  const auto iv95 = predictive_interval(samples, net.heads, sigma2, p95, r95);
  const auto iv99 = predictive_interval(samples, net.heads, sigma2, p99, r99);
  for (std::size_t k = 0; k < iv95.lo.size(); ++k) {
    CHECK(iv99.lo[k] <= iv95.lo[k]);
    CHECK(iv99.hi[k] >= iv95.hi[k]);
  }
}

TEST_CASE("predict_model: deterministic given seeds, lo <= hi always") {
  NetworkConfig net = three_head_net(0.8);
  FittedModel model;
  model.net = net;
  model.params = random_params(net, 23, 0.7);
  model.input_std.mean = {0.0};
  model.input_std.sd = {1.0};
  model.sigma2 = {0.25};

  std::vector<Location> locs;
  DenseMatrix x = line_inputs(7);
  for (std::size_t i = 0; i < 7; ++i) locs.push_back({{x(i, 0)}});

  PredictConfig pcfg;
  pcfg.m_draws = 40;
  pcfg.y_sample_per_draw = 8;
  pcfg.seed = 31;
  const auto t1 = predict_model(model, locs, x, {}, pcfg);
  const auto t2 = predict_model(model, locs, x, {}, pcfg);
  REQUIRE(t1.cells.size() == t2.cells.size());
  for (std::size_t k = 0; k < t1.cells.size(); ++k) {
    CHECK(t1.cells[k].mean == t2.cells[k].mean);
    CHECK(*t1.cells[k].lo == *t2.cells[k].lo);
    CHECK(*t1.cells[k].hi == *t2.cells[k].hi);
    CHECK(*t1.cells[k].sd == *t2.cells[k].sd);
    CHECK(*t1.cells[k].lo <= *t1.cells[k].hi);
  }
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(t1.cell(i, 0).mean > 0.0);
    CHECK(t1.cell(i, 0).mean < 1.0);
  }
}

TEST_CASE("composite_score: single, duplicate, and antisymmetric surfaces") {
  const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  const auto single = composite_score({a});
  // Plain z-scores of a.
  const double mean = 2.5;
  const double sd = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(single[i] == doctest::Approx((a[i] - mean) / sd));
  }

  const auto dup = composite_score({a, a});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(dup[i] == doctest::Approx(single[i]));
  }

  std::vector<double> neg(4);
  for (std::size_t i = 0; i < 4; ++i) neg[i] = -a[i];
  const auto anti = composite_score({a, neg});
  for (double v : anti) CHECK(v == doctest::Approx(0.0));

  CHECK_THROWS_AS(composite_score({{2.0, 2.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("idw_score_grid: exact hit and bounded interpolation") {
  std::vector<Location> pts = {{{0.0, 0.0}}, {{1.0, 0.0}},
                               {{0.0, 1.0}}, {{1.0, 1.0}}};
  const std::vector<double> score = {1.0, 2.0, 3.0, 4.0};
  const auto grid = idw_score_grid(pts, score, 3, 4);
  REQUIRE(grid.value.size() == 9);
  // Corners coincide with data points.
  CHECK(grid.value.front() == doctest::Approx(1.0));
  CHECK(grid.value.back() == doctest::Approx(4.0));
  for (double v : grid.value) {
    CHECK(v >= 1.0);
    CHECK(v <= 4.0);
  }
}
