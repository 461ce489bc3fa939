#include "mdgp/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mdgp/errors.hpp"

namespace mdgp {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate > 0");
  }
}

Params init_params(const NetworkConfig& config, RngStream& rng) {
  Params p = Params::zeros_like(config);
  const bool relu = config.hidden_activation == Activation::kRelu;
  for (auto& layer : p.hidden) {
    const double fan_in = static_cast<double>(layer.w.cols);
    const double sd = std::sqrt((relu ? 2.0 : 1.0) / fan_in);
    for (double& v : layer.w.entries) v = rng.normal(0.0, sd);
  }
  for (auto& head : p.heads) {
    const double fan_in = static_cast<double>(head.w.size());
    const double sd = std::sqrt(1.0 / fan_in);
    for (double& v : head.w) v = rng.normal(0.0, sd);
  }
  return p;
}

namespace {

void clip_global_norm(Params& g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for_each_param(g, [&sq](double& v) { sq += v * v; });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for_each_param(g, [f](double& v) { v *= f; });
  }
}

struct AdamState {
  Params m;
  Params v;
  std::size_t t = 0;
};

void apply_update(Params& params, const Params& g, const TrainConfig& tcfg,
                  double lr, AdamState& adam) {
  if (tcfg.optimizer == Optimizer::kSgd) {
    for_each_param2(params, g, [lr](double& p, double gv) { p -= lr * gv; });
    return;
  }
  adam.t += 1;
  const double b1 = tcfg.adam_beta1;
  const double b2 = tcfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  for_each_param2(adam.m, g, [b1](double& m, double gv) {
    m = b1 * m + (1.0 - b1) * gv;
  });
  for_each_param2(adam.v, g, [b2](double& v, double gv) {
    v = b2 * v + (1.0 - b2) * gv * gv;
  });
  // params -= lr * m_hat / (sqrt(v_hat) + eps), structure-wise triple walk.
  const double eps = tcfg.adam_eps;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    auto& pw = params.hidden[l].w.entries;
    const auto& mw = adam.m.hidden[l].w.entries;
    const auto& vw = adam.v.hidden[l].w.entries;
    for (std::size_t k = 0; k < pw.size(); ++k) {
      pw[k] -= lr * (mw[k] / bc1) / (std::sqrt(vw[k] / bc2) + eps);
    }
    auto& pb = params.hidden[l].b;
    const auto& mb = adam.m.hidden[l].b;
    const auto& vb = adam.v.hidden[l].b;
    for (std::size_t k = 0; k < pb.size(); ++k) {
      pb[k] -= lr * (mb[k] / bc1) / (std::sqrt(vb[k] / bc2) + eps);
    }
  }
  for (std::size_t j = 0; j < params.heads.size(); ++j) {
    auto& pw = params.heads[j].w;
    const auto& mw = adam.m.heads[j].w;
    const auto& vw = adam.v.heads[j].w;
    for (std::size_t k = 0; k < pw.size(); ++k) {
      pw[k] -= lr * (mw[k] / bc1) / (std::sqrt(vw[k] / bc2) + eps);
    }
    params.heads[j].b -= lr * (adam.m.heads[j].b / bc1) /
                         (std::sqrt(adam.v.heads[j].b / bc2) + eps);
  }
}

}  // namespace

std::pair<Params, TrainReport> fit(const TrainingData& train,
                                   const NetworkConfig& net,
                                   const TrainConfig& tcfg) {
  net.validate();
  tcfg.validate();
  if (train.n() == 0) throw std::invalid_argument("fit: empty dataset");
  if (train.inputs.cols != net.input_dim) {
    throw std::invalid_argument("fit: input_dim mismatch");
  }

  const auto t0 = std::chrono::steady_clock::now();
  RngStream root(tcfg.seed, 0);
  RngStream init_rng = root.split(1);
  RngStream shuffle_rng = root.split(2);
  RngStream mask_rng = root.split(3);

  Params params = init_params(net, init_rng);
  TrainReport report;

  AdamState adam;
  adam.m = Params::zeros_like(net);
  adam.v = Params::zeros_like(net);

  const std::size_t n = train.n();
  const std::size_t batch = std::min(tcfg.batch_size, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double lr = tcfg.learning_rate;
  bool halved = false;
  Params g;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.below(i + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_total = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      std::span<const std::size_t> rows(order.data() + start, len);

      double step_loss;
      bool ok = false;
      while (true) {
        MaskSet masks = tcfg.per_row_masks
                            ? MaskSet()  // sampled per row below
                            : sample_masks(net, mask_rng);
        try {
          if (tcfg.per_row_masks) {
            // Ablation path: average per-row gradients, one mask per row.
            Params acc = Params::zeros_like(net);
            step_loss = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
              MaskSet row_mask = sample_masks(net, mask_rng);
              std::size_t row = rows[k];
              std::span<const std::size_t> one(&row, 1);
              step_loss += loss_and_grad(params, row_mask, train, one, net, g);
              for_each_param2(acc, g, [](double& a, double gv) { a += gv; });
            }
            const double inv = 1.0 / static_cast<double>(len);
            for_each_param(acc, [inv](double& v) { v *= inv; });
            step_loss *= inv;
            g = std::move(acc);
          } else {
            step_loss = loss_and_grad(params, masks, train, rows, net, g);
          }
          ok = std::isfinite(step_loss) && g.all_finite();
        } catch (const DivergenceError&) {
          ok = false;
        }
        if (ok) break;
        if (halved) {
          throw DivergenceError(
              "fit: non-finite loss persisted after halving the learning "
              "rate");
        }
        halved = true;
        lr /= 2.0;
      }

      clip_global_norm(g, tcfg.gradient_clip);
      apply_update(params, g, tcfg, lr, adam);
      epoch_total += step_loss;
      epoch_steps += 1;
      report.steps += 1;
    }
    report.epoch_loss.push_back(epoch_total /
                                static_cast<double>(epoch_steps));
  }

  report.final_loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(params), report};
}

std::pair<FittedModel, TrainReport> fit_model(
    const DenseMatrix& inputs_raw, const DenseMatrix& covariates_raw,
    const std::vector<std::optional<double>>& responses,
    const std::vector<OutcomeSpec>& outcomes, NetworkConfig net,
    const TrainConfig& tcfg) {
  FittedModel model;
  net.input_dim = inputs_raw.cols;
  net.covariate_dim = covariates_raw.rows > 0 ? covariates_raw.cols : 0;
  net.n_train = inputs_raw.rows;
  net.heads = outcomes;
  if (net.keep_heads.size() != outcomes.size()) {
    const double keep = !net.keep_heads.empty()
                            ? net.keep_heads.front()
                            : (net.keep_hidden.empty() ? 1.0
                                                       : net.keep_hidden.back());
    net.keep_heads.assign(outcomes.size(), keep);
  }

  model.input_std = Standardizer::fit(inputs_raw);
  if (net.covariate_dim > 0) {
    model.covariate_std = Standardizer::fit(covariates_raw);
  }

  TrainingData data;
  data.inputs = model.input_std.apply(inputs_raw);
  if (net.covariate_dim > 0) {
    data.covariates = model.covariate_std.apply(covariates_raw);
  }
  data.responses = responses;
  data.outcomes = outcomes;

  auto [params, report] = fit(data, net, tcfg);
  model.net = net;
  model.params = std::move(params);
  model.sigma2 = estimate_sigma2(model.params, net, data);
  return {std::move(model), std::move(report)};
}

void write_train_report(const TrainReport& report, const std::string& path,
                        const std::string& header_comment) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  if (!header_comment.empty()) f << "# " << header_comment << "\n";
  f << "epoch,loss\n";
  char buf[40];
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e + 1,
                  report.epoch_loss[e]);
    f << buf;
  }
}

}  // namespace mdgp
