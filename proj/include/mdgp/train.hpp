#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdgp/model.hpp"
#include "mdgp/rng.hpp"

namespace mdgp {

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double gradient_clip = 5.0;  // global norm; <= 0 disables
  bool per_row_masks = false;  // ablation: fresh mask per row, not per batch
  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean step loss per epoch
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
};

/// He (relu) or Lecun-style (tanh/identity) normal initialization,
/// zero biases.
Params init_params(const NetworkConfig& config, RngStream& rng);

/// Minibatch training: per-epoch seeded shuffle, one fresh MaskSet per batch,
/// adaptive first-order updates, single learning-rate halving on a non-finite
/// step before failing with DivergenceError. Deterministic given
/// (data, configs, seed).
std::pair<Params, TrainReport> fit(const TrainingData& train,
                                   const NetworkConfig& net,
                                   const TrainConfig& tcfg);

/// TrainReport -> CSV (epoch, loss).
void write_train_report(const TrainReport& report, const std::string& path,
                        const std::string& header_comment = "");

/// Full fitting pipeline on raw (unstandardized) matrices: fits the input and
/// covariate standardizers on the training set, completes the architecture
/// dims (input_dim, covariate_dim, n_train, heads), trains, and estimates the
/// continuous-outcome residual variances. `net` supplies widths, activation,
/// and keep probabilities; keep_heads defaults to the last keep_hidden value
/// (or 1) when left empty.
std::pair<FittedModel, TrainReport> fit_model(
    const DenseMatrix& inputs_raw, const DenseMatrix& covariates_raw,
    const std::vector<std::optional<double>>& responses,
    const std::vector<OutcomeSpec>& outcomes, NetworkConfig net,
    const TrainConfig& tcfg);

}  // namespace mdgp
