#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdgp/model.hpp"
#include "mdgp/rng.hpp"

namespace mdgp {

struct PredictConfig {
  std::size_t m_draws = 200;
  double level = 0.95;
  std::size_t y_sample_per_draw = 20;  // conditional response draws per draw
  std::uint64_t seed = 0;
  void validate() const;
};

/// Linear predictors from M stochastic forward passes:
/// eta[(m * n_locations + i) * n_outcomes + j].
struct PredictiveSamples {
  std::size_t m_draws = 0;
  std::size_t n_locations = 0;
  std::size_t n_outcomes = 0;
  std::vector<double> eta;
  std::vector<std::uint64_t> mask_stream_ids;  // audit trail, one per draw

  double at(std::size_t m, std::size_t i, std::size_t j) const {
    return eta[(m * n_locations + i) * n_outcomes + j];
  }
};

/// Summary for one (location, outcome) cell. The mean is on the response
/// scale (probability / intensity / value); intervals are equal-tailed
/// quantiles of simulated responses from the MC mixture, so the mean need
/// not lie inside. lo/hi/sd are absent for methods without uncertainty.
struct PredictionCell {
  double mean = 0.0;
  std::optional<double> lo;
  std::optional<double> hi;
  std::optional<double> sd;  // sd of the mean-parameter draws
};

/// Full prediction table plus the coordinates it refers to.
struct PredictionTable {
  std::vector<Location> locations;
  std::vector<OutcomeSpec> outcomes;
  std::vector<PredictionCell> cells;  // n x J row-major

  PredictionCell& cell(std::size_t i, std::size_t j) {
    return cells[i * outcomes.size() + j];
  }
  const PredictionCell& cell(std::size_t i, std::size_t j) const {
    return cells[i * outcomes.size() + j];
  }
};

/// M masked forward passes over every location; draw m uses the child
/// stream split(m) of the config seed, so results are deterministic and
/// draw-parallelizable. Inputs must already be standardized.
PredictiveSamples mc_forward(const Params& params, const NetworkConfig& net,
                             const DenseMatrix& inputs,
                             const DenseMatrix& covariates,
                             const PredictConfig& pcfg);

/// Response-scale mean per cell: mean over draws of the inverse link of eta.
std::vector<double> predictive_mean(const PredictiveSamples& samples,
                                    std::span<const OutcomeSpec> specs);

/// Equal-tailed empirical quantile interval of pooled simulated responses
/// (m_draws x y_sample_per_draw per cell); count endpoints snapped to
/// integers (floor lo, ceil hi). sigma2_hat holds one variance per
/// continuous outcome, in head order.
struct IntervalTable {
  std::vector<double> lo;  // n x J row-major
  std::vector<double> hi;
};
IntervalTable predictive_interval(const PredictiveSamples& samples,
                                  std::span<const OutcomeSpec> specs,
                                  std::span<const double> sigma2_hat,
                                  const PredictConfig& pcfg, RngStream& rng);

/// Standard deviation of the mean-parameter draws per cell.
std::vector<double> predictive_sd(const PredictiveSamples& samples,
                                  std::span<const OutcomeSpec> specs);

/// End-to-end MC-dropout prediction for a fitted model on raw (unstandardized)
/// inputs; assembles means, intervals, and sds into a PredictionTable.
PredictionTable predict_model(const FittedModel& model,
                              const std::vector<Location>& locations,
                              const DenseMatrix& inputs_raw,
                              const DenseMatrix& covariates_raw,
                              const PredictConfig& pcfg);

/// Average of z-standardized surfaces across outcomes.
/// Throws on a zero-variance surface.
std::vector<double> composite_score(
    const std::vector<std::vector<double>>& surfaces);

/// Inverse-distance-weighted interpolation of a point-indexed score onto a
/// grid_size x grid_size lattice over the points' bounding box
/// (power 2, k nearest neighbors). Presentation-only.
struct ScoreGrid {
  std::size_t grid_size = 0;
  std::vector<double> x;      // flattened row-major
  std::vector<double> y;
  std::vector<double> value;
};
ScoreGrid idw_score_grid(const std::vector<Location>& points,
                         const std::vector<double>& score,
                         std::size_t grid_size, std::size_t k_neighbors = 12);

/// Prediction CSV: coords, outcome, mean, lo, hi, sd (empty when absent).
void write_csv_predictions(const PredictionTable& table,
                           const std::string& path,
                           const std::string& header_comment = "");

void write_csv_score_grid(const ScoreGrid& grid, const std::string& path,
                          const std::string& header_comment = "");

}  // namespace mdgp
