#pragma once

#include <string>
#include <vector>

#include "mdgp/baselines.hpp"
#include "mdgp/config.hpp"
#include "mdgp/data.hpp"
#include "mdgp/metrics.hpp"
#include "mdgp/predict.hpp"

namespace mdgp {

/// Network inputs assembled from a dataset per the run configuration:
/// raw coordinates, or TPS radial features over the configured knot lattice;
/// exogenous covariates ride along unchanged.
struct AssembledInputs {
  DenseMatrix inputs;      // n x input_dim, unstandardized
  DenseMatrix covariates;  // n x covariate_dim, rows == 0 when none
};
AssembledInputs assemble_inputs(const Dataset& data, const RunConfig& cfg,
                                const KnotSet* knots);

/// The knot lattice a TPS-configured run uses (full lattice over the
/// configured bbox; custom mask predicates are a library-level hook).
KnotSet config_knots(const RunConfig& cfg);

/// Per-replicate generation: simulate (stage 0) then split (stage 1) with
/// stream ids hash2(replicate, stage) off the master seed.
std::pair<Dataset, Dataset> make_replicate(const RunConfig& cfg,
                                           std::size_t replicate);

/// CSV column schema implied by the configured case.
struct DatasetSchema {
  std::vector<std::string> coord_columns;
  std::vector<OutcomeSpec> outcomes;
  std::vector<std::string> covariate_columns;
};
DatasetSchema dataset_schema(const RunConfig& cfg);

struct SimulateResult {
  std::vector<std::string> files;
  std::string manifest_path;
};
SimulateResult cmd_simulate(const RunConfig& cfg);

struct TrainResult {
  std::string checkpoint_path;
  std::string report_path;
  double final_loss = 0.0;
};
TrainResult cmd_train(const RunConfig& cfg, const std::string& data_path);

struct PredictResult {
  std::string predictions_path;
  std::string grid_path;  // empty unless composite_grid > 0
};
PredictResult cmd_predict(const RunConfig& cfg,
                          const std::string& checkpoint_path,
                          const std::string& locations_path,
                          std::size_t composite_grid = 0);

struct BenchResult {
  MetricReport report;
  std::vector<std::vector<MetricValue>> raw;  // indexed by replicate
  std::vector<std::string> failures;
  std::string report_path;
  std::string raw_path;
  std::string timings_path;
};
BenchResult cmd_bench(const RunConfig& cfg);

struct EvalResult {
  std::string report_path;
};
EvalResult cmd_eval(const RunConfig& cfg, const std::string& predictions_path,
                    const std::string& truth_path);

/// Parse a prediction CSV written by write_csv_predictions.
PredictionTable read_csv_predictions(const std::string& path);

/// Parse a raw per-replicate metrics CSV written by cmd_bench; outer index
/// is the replicate.
std::vector<std::vector<MetricValue>> read_csv_raw_metrics(
    const std::string& path);

/// One replicate of the benchmark loop (exposed for tests).
std::vector<MetricValue> bench_replicate(const RunConfig& cfg,
                                         std::size_t replicate);

}  // namespace mdgp
