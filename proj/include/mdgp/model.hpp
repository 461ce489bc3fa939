#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdgp/data.hpp"
#include "mdgp/numerics.hpp"
#include "mdgp/rng.hpp"

namespace mdgp {

enum class Activation { kRelu, kTanh, kIdentity };

Activation activation_from_name(const std::string& s);
const char* activation_name(Activation a);

/// Architecture plus the dropout keep-probabilities that drive both mask
/// sampling and the weight-decay constants lambda = keep / (2 N).
/// keep_prob is always the probability a unit is RETAINED.
struct NetworkConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths = {100, 100};
  Activation hidden_activation = Activation::kRelu;
  std::vector<double> keep_hidden = {0.9, 0.9};  // per hidden layer
  std::vector<OutcomeSpec> heads;
  std::vector<double> keep_heads;  // per head, over the head's shared inputs
  std::size_t n_train = 1;
  std::size_t covariate_dim = 0;

  std::size_t n_hidden() const { return hidden_widths.size(); }
  /// Width of the shared representation feeding the heads.
  std::size_t shared_dim() const {
    return hidden_widths.empty() ? input_dim : hidden_widths.back();
  }
  std::size_t head_input_dim() const { return shared_dim() + covariate_dim; }
  void validate() const;
};

struct LayerParams {
  DenseMatrix w;          // k_l x k_{l-1}
  std::vector<double> b;  // k_l
};

struct HeadParams {
  std::vector<double> w;  // shared_dim + covariate_dim
  double b = 0.0;
};

/// All weights and biases; these double as the variational means of the
/// dropout posterior.
struct Params {
  std::vector<LayerParams> hidden;
  std::vector<HeadParams> heads;

  static Params zeros_like(const NetworkConfig& config);
  bool all_finite() const;
};

/// Structure-wise visitation, used by the optimizer and the tests.
template <class F>
void for_each_param(Params& p, F&& f) {
  for (auto& layer : p.hidden) {
    for (double& v : layer.w.entries) f(v);
    for (double& v : layer.b) f(v);
  }
  for (auto& head : p.heads) {
    for (double& v : head.w) f(v);
    f(head.b);
  }
}

template <class F>
void for_each_param2(Params& a, const Params& b, F&& f) {
  for (std::size_t l = 0; l < a.hidden.size(); ++l) {
    for (std::size_t k = 0; k < a.hidden[l].w.entries.size(); ++k) {
      f(a.hidden[l].w.entries[k], b.hidden[l].w.entries[k]);
    }
    for (std::size_t k = 0; k < a.hidden[l].b.size(); ++k) {
      f(a.hidden[l].b[k], b.hidden[l].b[k]);
    }
  }
  for (std::size_t j = 0; j < a.heads.size(); ++j) {
    for (std::size_t k = 0; k < a.heads[j].w.size(); ++k) {
      f(a.heads[j].w[k], b.heads[j].w[k]);
    }
    f(a.heads[j].b, b.heads[j].b);
  }
}

/// Multiplicative 0/1 node masks: one per hidden unit, and per head one over
/// the head's shared inputs (exogenous covariates pass unmasked).
struct MaskSet {
  std::vector<std::vector<double>> hidden;  // per layer, length k_l
  std::vector<std::vector<double>> heads;   // per head, length shared_dim

  static MaskSet all_ones(const NetworkConfig& config);
};

/// Everything a single stochastic forward pass produced.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;   // per hidden layer, before act/mask
  std::vector<std::vector<double>> post;  // per hidden layer, masked
  std::vector<double> shared;             // representation feeding the heads
  std::vector<double> eta;                // per-head linear predictor
};

/// Aligned matrices the training loop consumes: standardized network inputs,
/// optional standardized covariates, and the response table.
struct TrainingData {
  DenseMatrix inputs;      // n x input_dim
  DenseMatrix covariates;  // n x covariate_dim, rows == 0 when none
  std::vector<std::optional<double>> responses;  // n x J row-major
  std::vector<OutcomeSpec> outcomes;

  std::size_t n() const { return inputs.rows; }
  const std::optional<double>& y(std::size_t i, std::size_t j) const {
    return responses[i * outcomes.size() + j];
  }
};

MaskSet sample_masks(const NetworkConfig& config, RngStream& rng);

/// Stochastic forward pass. `covariates` may be null when covariate_dim == 0.
ForwardTrace forward(const Params& params, const MaskSet& masks,
                     std::span<const double> input,
                     std::span<const double> covariates,
                     const NetworkConfig& config);
void forward_into(const Params& params, const MaskSet& masks,
                  const double* input, const double* covariates,
                  const NetworkConfig& config, ForwardTrace& trace);

/// Mask-free forward with every layer's outgoing activations rescaled by its
/// keep probability (and the head's shared inputs by the head keep) — the
/// deterministic fitted predictor.
std::vector<double> forward_deterministic(const Params& params,
                                          const NetworkConfig& config,
                                          std::span<const double> input,
                                          std::span<const double> covariates);

/// The equivalent-parameters view of a mask: hidden masks zero rows of W_l
/// and entries of b_l, head masks zero the corresponding shared-input
/// columns of the head weights.
Params apply_masks(const Params& params, const MaskSet& masks,
                   const NetworkConfig& config);

/// Negative log-likelihood of one cell on the link scale (training form:
/// unit Gaussian variance for continuous outcomes).
double nll_cell(double eta, double y, OutcomeKind kind);

/// Sum of nll_cell over observed cells; eta and y are per-outcome aligned,
/// missing cells contribute zero.
double nll(std::span<const double> eta,
           std::span<const std::optional<double>> y,
           std::span<const OutcomeSpec> specs);

/// Batch objective: nll over the rows scaled by n_train / batch_size, plus
/// the dropout-matched quadratic penalty with lambda = keep / (2 n_train).
double loss(const Params& params, const MaskSet& masks,
            const TrainingData& data, std::span<const std::size_t> rows,
            const NetworkConfig& config);

/// Exact gradient of `loss` with the masks held fixed.
Params grad(const Params& params, const MaskSet& masks,
            const TrainingData& data, std::span<const std::size_t> rows,
            const NetworkConfig& config);

/// Both at once; the training loop's inner step.
double loss_and_grad(const Params& params, const MaskSet& masks,
                     const TrainingData& data,
                     std::span<const std::size_t> rows,
                     const NetworkConfig& config, Params& out_grad);

/// Residual variance of each continuous outcome under the deterministic
/// fitted predictor. Throws when an outcome has fewer than 2 observed cells.
std::vector<double> estimate_sigma2(const Params& params,
                                    const NetworkConfig& config,
                                    const TrainingData& train);

/// Diagnostic wide-width layer covariance estimate:
/// (1/width) sigma(Phi W^T + 1 b^T) sigma(Phi W^T + 1 b^T)^T.
DenseMatrix layer_kernel(const DenseMatrix& phi_prev, const DenseMatrix& w,
                         const std::vector<double>& b, Activation activation,
                         std::size_t width);

/// Column-wise z-standardization fitted on training data and reapplied at
/// test time. Near-constant columns (sd < 1e-12) pass through centered.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  static Standardizer fit(const DenseMatrix& x);
  DenseMatrix apply(const DenseMatrix& x) const;
  std::vector<double> apply_row(std::span<const double> row) const;
};

/// A trained model plus everything needed to predict: architecture,
/// weights, input/covariate standardization, and the per-continuous-outcome
/// residual variances.
struct FittedModel {
  NetworkConfig net;
  Params params;
  Standardizer input_std;
  Standardizer covariate_std;
  std::vector<double> sigma2;  // one per continuous head, in head order
  std::uint64_t config_hash = 0;
};

/// Versioned binary checkpoint; round-trips bit-exactly.
void save_checkpoint(const FittedModel& model, const std::string& path);
FittedModel load_checkpoint(const std::string& path);

}  // namespace mdgp
