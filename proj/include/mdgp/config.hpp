#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdgp/data.hpp"
#include "mdgp/model.hpp"
#include "mdgp/predict.hpp"
#include "mdgp/train.hpp"

namespace mdgp {

enum class CaseKind { kCase1, kCase2, kCsv };

/// Declarative run configuration: a plain-text `key = value` document with
/// '#' comments. Unknown keys are rejected. See docs/formats.md for the
/// schema and defaults.
struct RunConfig {
  CaseKind case_kind = CaseKind::kCase1;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::size_t replicates = 100;
  std::size_t workers = 1;
  std::vector<std::string> methods = {"multideepgp", "multidnn", "kriging"};

  Case1Config case1;
  Case2Config case2;

  struct CsvSettings {
    std::string train_path;
    std::string test_path;
    std::vector<std::string> coord_columns;
    std::vector<OutcomeSpec> outcomes;
    std::vector<std::string> covariate_columns;
  } csv;

  struct NetSettings {
    std::vector<std::size_t> hidden_widths = {100, 100};
    std::string activation = "relu";
    std::vector<double> keep_hidden = {0.9, 0.9};
    double keep_heads = 0.9;
    bool use_tps = false;
    std::vector<std::size_t> tps_grid = {25, 25};
    std::vector<double> tps_bbox = {0.0, 1.0, 0.0, 1.0};  // x0,x1,y0,y1
  } net;

  TrainConfig train;
  PredictConfig predict;

  std::uint64_t config_hash = 0;  // of the canonicalized document

  NetworkConfig make_network() const;
};

/// Parse + schema-validate a config document from text or a file.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// FNV-1a over the canonicalized (sorted key=value) document; comments and
/// whitespace do not affect the hash.
std::uint64_t config_hash_of(const std::string& text);

std::string hash_hex(std::uint64_t h);

}  // namespace mdgp
