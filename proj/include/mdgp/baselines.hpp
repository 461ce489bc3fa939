#pragma once

#include <optional>
#include <vector>

#include "mdgp/data.hpp"
#include "mdgp/model.hpp"
#include "mdgp/numerics.hpp"
#include "mdgp/predict.hpp"
#include "mdgp/train.hpp"

namespace mdgp {

/// Exponential variogram nugget + partial_sill * (1 - exp(-h / range)).
struct VariogramModel {
  double nugget = 0.0;
  double partial_sill = 0.0;
  double range = 1.0;

  double total_sill() const { return nugget + partial_sill; }
  /// Covariance form: partial_sill * exp(-h/range) + nugget * 1[h == 0].
  double covariance(double h) const;
};

struct SemivariogramBin {
  double lag = 0.0;       // bin center
  double gamma = 0.0;     // method-of-moments estimate
  std::size_t pairs = 0;  // pair count in the bin
};

struct KrigingPrediction {
  std::vector<double> mean;
  std::vector<double> variance;        // clamped at 0
  std::size_t negative_variance_clamps = 0;
};

/// Method-of-moments semivariogram over equal-width distance bins on
/// [0, max_dist]; empty bins are dropped.
std::vector<SemivariogramBin> empirical_semivariogram(
    const std::vector<Location>& locations, const std::vector<double>& values,
    std::size_t n_bins, double max_dist);

/// Weighted least squares (weights pair_count / lag^2) exponential-variogram
/// fit: grid-refined search over range with closed-form WLS for the linear
/// parameters, nonnegativity by clamping. Needs >= 3 nonempty bins.
VariogramModel fit_variogram(const std::vector<SemivariogramBin>& empirical);

/// Ordinary kriging: BLUP mean and kriging variance per test point under the
/// unbiasedness constraint. One jitter retry on a singular system.
/// simple_mean, when set, switches to simple kriging around that known mean.
KrigingPrediction krige(const std::vector<Location>& train_locations,
                        const std::vector<double>& train_values,
                        const std::vector<Location>& test_locations,
                        const VariogramModel& vg,
                        std::optional<double> simple_mean = std::nullopt);

enum class CountTransform { kLog1p, kIdentity };

/// Per-outcome kriging pipeline: indicator kriging for binary (no intervals),
/// log1p-transformed Gaussian kriging for counts (back-transformed interval
/// endpoints, floor/ceil snapped), direct kriging with mean +/- 1.96 sd for
/// continuous outcomes. Variogram fitting settings are deterministic.
struct KrigeOutcomeResult {
  std::vector<PredictionCell> cells;  // one per test location
  VariogramModel variogram;
  std::size_t clamped_means = 0;  // indicator-kriging [0,1] clamps
};
KrigeOutcomeResult krige_outcome(const Dataset& train,
                                 const std::vector<Location>& test_locations,
                                 std::size_t outcome_index,
                                 CountTransform transform = CountTransform::kLog1p);

/// Deterministic multi-task DNN baseline: identical architecture and training
/// to the primary model (dropout as a regularizer), predictions from the
/// mask-free keep-rescaled pass. Means only, per the shared-training design.
struct DnnResult {
  DenseMatrix means;  // n_test x J, response scale
  FittedModel model;
  TrainReport report;
};
DnnResult dnn_fit_predict(const DenseMatrix& train_inputs_raw,
                          const DenseMatrix& train_covariates_raw,
                          const std::vector<std::optional<double>>& responses,
                          const std::vector<OutcomeSpec>& outcomes,
                          const DenseMatrix& test_inputs_raw,
                          const DenseMatrix& test_covariates_raw,
                          NetworkConfig net, const TrainConfig& tcfg);

}  // namespace mdgp
