#include "mdgp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mdgp/errors.hpp"
#include "mdgp/train.hpp"
#include "mdgp/version.hpp"

namespace mdgp {
namespace {

namespace fs = std::filesystem;

// Pipeline stage keys for per-replicate stream ids hash2(replicate, stage).
constexpr std::uint64_t kStageSimulate = 0;
constexpr std::uint64_t kStageSplit = 1;
constexpr std::uint64_t kStageDeepGpTrain = 2;
constexpr std::uint64_t kStageDeepGpPredict = 3;
constexpr std::uint64_t kStageDnnTrain = 4;
constexpr std::uint64_t kStageStandalone = 11;

std::string comment_line(const RunConfig& cfg) {
  return std::string(kToolName) + " " + kToolVersion +
         " config=" + hash_hex(cfg.config_hash);
}

std::string replicate_dir(const RunConfig& cfg, std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "replicate_%04zu", r);
  return (fs::path(cfg.out_dir) / buf).string();
}

void fmt(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::vector<double> column_observed(const Dataset& d, std::size_t j,
                                    const std::vector<double>& aligned,
                                    std::vector<double>* truth) {
  // Collect (truth, aligned-prediction) pairs over the observed cells.
  std::vector<double> pred;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& cell = d.response(i, j);
    if (!cell) continue;
    truth->push_back(*cell);
    pred.push_back(aligned[i]);
  }
  return pred;
}

}  // namespace

KnotSet config_knots(const RunConfig& cfg) {
  const auto& b = cfg.net.tps_bbox;
  return knot_lattice({{b[0], b[1]}, {b[2], b[3]}},
                      {cfg.net.tps_grid[0], cfg.net.tps_grid[1]});
}

AssembledInputs assemble_inputs(const Dataset& data, const RunConfig& cfg,
                                const KnotSet* knots) {
  AssembledInputs out;
  if (cfg.net.use_tps) {
    if (knots == nullptr) {
      throw std::invalid_argument("assemble_inputs: TPS requires knots");
    }
    out.inputs = tps_features(data.locations, *knots);
  } else {
    const std::size_t d = data.coord_dim();
    out.inputs = DenseMatrix(data.n(), d);
    for (std::size_t i = 0; i < data.n(); ++i) {
      for (std::size_t a = 0; a < d; ++a) {
        out.inputs(i, a) = data.locations[i].coords[a];
      }
    }
  }
  out.covariates = data.features;
  return out;
}

std::pair<Dataset, Dataset> make_replicate(const RunConfig& cfg,
                                           std::size_t replicate) {
  RngStream sim_rng(cfg.seed, RngStream::hash2(replicate, kStageSimulate));
  RngStream split_rng(cfg.seed, RngStream::hash2(replicate, kStageSplit));
  if (cfg.case_kind == CaseKind::kCase1) {
    Dataset data = simulate_case1(cfg.case1, sim_rng);
    return split(data, cfg.case1.train_count, split_rng);
  }
  if (cfg.case_kind == CaseKind::kCase2) {
    Dataset data = simulate_case2(cfg.case2, sim_rng);
    return split_frac(data, cfg.case2.train_frac, split_rng);
  }
  throw ConfigError("replicate generation requires case1 or case2");
}

DatasetSchema dataset_schema(const RunConfig& cfg) {
  DatasetSchema schema;
  if (cfg.case_kind == CaseKind::kCsv) {
    schema.coord_columns = cfg.csv.coord_columns;
    schema.outcomes = cfg.csv.outcomes;
    schema.covariate_columns = cfg.csv.covariate_columns;
    return schema;
  }
  schema.coord_columns = (cfg.case_kind == CaseKind::kCase1)
                             ? std::vector<std::string>{"s"}
                             : std::vector<std::string>{"x", "y"};
  schema.outcomes = {{"binary", OutcomeKind::kBinary},
                     {"count", OutcomeKind::kCount},
                     {"continuous", OutcomeKind::kContinuous}};
  return schema;
}

SimulateResult cmd_simulate(const RunConfig& cfg) {
  if (cfg.case_kind == CaseKind::kCsv) {
    throw ConfigError("simulate requires case1 or case2");
  }
  fs::create_directories(cfg.out_dir);
  SimulateResult result;
  nlohmann::json manifest;
  manifest["tool"] = std::string(kToolName) + " " + kToolVersion;
  manifest["config_hash"] = hash_hex(cfg.config_hash);
  manifest["master_seed"] = cfg.seed;
  manifest["case"] = cfg.case_kind == CaseKind::kCase1 ? "case1" : "case2";
  manifest["replicates"] = cfg.replicates;
  nlohmann::json reps = nlohmann::json::array();

  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    const std::string dir = replicate_dir(cfg, r);
    fs::create_directories(dir);
    auto [train, test] = make_replicate(cfg, r);
    const std::string train_path = (fs::path(dir) / "train.csv").string();
    const std::string test_path = (fs::path(dir) / "test.csv").string();
    write_csv_dataset(train, train_path, comment_line(cfg));
    write_csv_dataset(test, test_path, comment_line(cfg));
    result.files.push_back(train_path);
    result.files.push_back(test_path);

    nlohmann::json rep;
    rep["replicate"] = r;
    rep["simulate_stream"] = RngStream::hash2(r, kStageSimulate);
    rep["split_stream"] = RngStream::hash2(r, kStageSplit);
    rep["train"] = train_path;
    rep["test"] = test_path;
    reps.push_back(rep);
  }
  manifest["files"] = reps;
  result.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
  std::ofstream f(result.manifest_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + result.manifest_path);
  f << manifest.dump(2) << "\n";
  return result;
}

namespace {

struct LoadedData {
  Dataset data;
  AssembledInputs assembled;
};

LoadedData load_dataset(const RunConfig& cfg, const std::string& path,
                        const KnotSet* knots) {
  const DatasetSchema schema = dataset_schema(cfg);
  LoadedData out;
  out.data = read_csv_dataset(path, schema.outcomes, schema.coord_columns,
                              schema.covariate_columns);
  out.assembled = assemble_inputs(out.data, cfg, knots);
  return out;
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, const std::string& data_path) {
  fs::create_directories(cfg.out_dir);
  KnotSet knots;
  if (cfg.net.use_tps) knots = config_knots(cfg);
  LoadedData loaded =
      load_dataset(cfg, data_path, cfg.net.use_tps ? &knots : nullptr);

  TrainConfig tcfg = cfg.train;
  tcfg.seed = RngStream::hash2(cfg.seed, kStageStandalone);
  auto [model, report] =
      fit_model(loaded.assembled.inputs, loaded.assembled.covariates,
                loaded.data.responses, loaded.data.outcomes,
                cfg.make_network(), tcfg);
  model.config_hash = cfg.config_hash;

  TrainResult result;
  result.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
  result.report_path = (fs::path(cfg.out_dir) / "train_report.csv").string();
  result.final_loss = report.final_loss;
  save_checkpoint(model, result.checkpoint_path);
  write_train_report(report, result.report_path, comment_line(cfg));
  return result;
}

PredictResult cmd_predict(const RunConfig& cfg,
                          const std::string& checkpoint_path,
                          const std::string& locations_path,
                          std::size_t composite_grid) {
  fs::create_directories(cfg.out_dir);
  const FittedModel model = load_checkpoint(checkpoint_path);
  if (model.config_hash != cfg.config_hash) {
    throw ConfigError(
        "checkpoint was trained under config " + hash_hex(model.config_hash) +
        " but the supplied config hashes to " + hash_hex(cfg.config_hash) +
        "; refusing to predict");
  }
  KnotSet knots;
  if (cfg.net.use_tps) knots = config_knots(cfg);
  const DatasetSchema schema = dataset_schema(cfg);
  // Locations CSV: coords + covariates; any outcome columns are ignored.
  Dataset locs = read_csv_dataset(locations_path, {}, schema.coord_columns,
                                  schema.covariate_columns);
  const AssembledInputs assembled =
      assemble_inputs(locs, cfg, cfg.net.use_tps ? &knots : nullptr);

  PredictConfig pcfg = cfg.predict;
  pcfg.seed = RngStream::hash2(cfg.seed, kStageStandalone);
  const PredictionTable table = predict_model(
      model, locs.locations, assembled.inputs, assembled.covariates, pcfg);

  PredictResult result;
  result.predictions_path =
      (fs::path(cfg.out_dir) / "predictions.csv").string();
  write_csv_predictions(table, result.predictions_path, comment_line(cfg));

  if (composite_grid > 0) {
    std::vector<std::vector<double>> surfaces;
    for (std::size_t j = 0; j < table.outcomes.size(); ++j) {
      std::vector<double> surface(table.locations.size());
      for (std::size_t i = 0; i < table.locations.size(); ++i) {
        surface[i] = table.cell(i, j).mean;
      }
      surfaces.push_back(std::move(surface));
    }
    const auto score = composite_score(surfaces);
    const auto grid = idw_score_grid(table.locations, score, composite_grid);
    result.grid_path = (fs::path(cfg.out_dir) / "composite_grid.csv").string();
    write_csv_score_grid(grid, result.grid_path, comment_line(cfg));
  }
  return result;
}

std::vector<MetricValue> bench_replicate(const RunConfig& cfg,
                                         std::size_t replicate) {
  auto [train_data, test_data] = make_replicate(cfg, replicate);
  KnotSet knots;
  if (cfg.net.use_tps) knots = config_knots(cfg);
  const KnotSet* knots_ptr = cfg.net.use_tps ? &knots : nullptr;
  const AssembledInputs train_in = assemble_inputs(train_data, cfg, knots_ptr);
  const AssembledInputs test_in = assemble_inputs(test_data, cfg, knots_ptr);

  std::vector<MetricValue> values;
  auto add = [&](const std::string& method, const std::string& outcome,
                 const std::string& metric, double value) {
    values.push_back({method, outcome, metric, value});
  };

  auto score_outcome = [&](const std::string& method, std::size_t j,
                           const std::vector<double>& mean_rows,
                           const std::vector<double>* lo_rows,
                           const std::vector<double>* hi_rows) {
    const auto& spec = test_data.outcomes[j];
    std::vector<double> truth;
    std::vector<double> pred = column_observed(test_data, j, mean_rows,
                                               &truth);
    if (truth.empty()) return;
    switch (spec.kind) {
      case OutcomeKind::kBinary:
        add(method, spec.name, "auc", auc(truth, pred));
        add(method, spec.name, "brier", brier(truth, pred));
        break;
      case OutcomeKind::kCount:
      case OutcomeKind::kContinuous:
        add(method, spec.name, "rmse", rmse(truth, pred));
        break;
    }
    if (lo_rows != nullptr && hi_rows != nullptr &&
        spec.kind != OutcomeKind::kBinary) {
      std::vector<double> t2, lo, hi;
      for (std::size_t i = 0; i < test_data.n(); ++i) {
        const auto& cell = test_data.response(i, j);
        if (!cell) continue;
        t2.push_back(*cell);
        lo.push_back((*lo_rows)[i]);
        hi.push_back((*hi_rows)[i]);
      }
      const auto [cov, width] = coverage_and_width(t2, lo, hi);
      add(method, spec.name, "coverage", cov);
      add(method, spec.name, "width", width);
    }
  };

  const std::size_t nj = test_data.n_outcomes();
  for (const auto& method : cfg.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    if (method == "multideepgp") {
      TrainConfig tcfg = cfg.train;
      tcfg.seed = RngStream::hash2(
          cfg.seed, RngStream::hash2(replicate, kStageDeepGpTrain));
      auto [model, report] = fit_model(
          train_in.inputs, train_in.covariates, train_data.responses,
          train_data.outcomes, cfg.make_network(), tcfg);
      PredictConfig pcfg = cfg.predict;
      pcfg.seed = RngStream::hash2(
          cfg.seed, RngStream::hash2(replicate, kStageDeepGpPredict));
      const PredictionTable table =
          predict_model(model, test_data.locations, test_in.inputs,
                        test_in.covariates, pcfg);
      for (std::size_t j = 0; j < nj; ++j) {
        std::vector<double> mean(test_data.n()), lo(test_data.n()),
            hi(test_data.n());
        for (std::size_t i = 0; i < test_data.n(); ++i) {
          mean[i] = table.cell(i, j).mean;
          lo[i] = *table.cell(i, j).lo;
          hi[i] = *table.cell(i, j).hi;
        }
        score_outcome(method, j, mean, &lo, &hi);
      }
    } else if (method == "multidnn") {
      TrainConfig tcfg = cfg.train;
      tcfg.seed = RngStream::hash2(
          cfg.seed, RngStream::hash2(replicate, kStageDnnTrain));
      const DnnResult dnn = dnn_fit_predict(
          train_in.inputs, train_in.covariates, train_data.responses,
          train_data.outcomes, test_in.inputs, test_in.covariates,
          cfg.make_network(), tcfg);
      for (std::size_t j = 0; j < nj; ++j) {
        std::vector<double> mean(test_data.n());
        for (std::size_t i = 0; i < test_data.n(); ++i) {
          mean[i] = dnn.means(i, j);
        }
        score_outcome(method, j, mean, nullptr, nullptr);
      }
    } else if (method == "kriging") {
      for (std::size_t j = 0; j < nj; ++j) {
        const KrigeOutcomeResult kr =
            krige_outcome(train_data, test_data.locations, j);
        std::vector<double> mean(test_data.n()), lo(test_data.n()),
            hi(test_data.n());
        bool has_intervals = true;
        for (std::size_t i = 0; i < test_data.n(); ++i) {
          mean[i] = kr.cells[i].mean;
          if (kr.cells[i].lo && kr.cells[i].hi) {
            lo[i] = *kr.cells[i].lo;
            hi[i] = *kr.cells[i].hi;
          } else {
            has_intervals = false;
          }
        }
        score_outcome(method, j, mean, has_intervals ? &lo : nullptr,
                      has_intervals ? &hi : nullptr);
      }
    } else {
      throw ConfigError("unknown method '" + method + "'");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    add(method, "", "seconds", secs);
  }
  return values;
}

BenchResult cmd_bench(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  BenchResult result;
  result.raw.resize(cfg.replicates);
  std::vector<std::string> errors(cfg.replicates);

  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= cfg.replicates) break;
      try {
        result.raw[r] = bench_replicate(cfg, r);
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<std::vector<MetricValue>> ok_raw;
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    if (!errors[r].empty()) {
      result.failures.push_back("replicate " + std::to_string(r) + ": " +
                                errors[r]);
    } else {
      ok_raw.push_back(result.raw[r]);
    }
  }
  if (ok_raw.empty()) {
    throw std::runtime_error("bench: every replicate failed: " +
                             (result.failures.empty()
                                  ? std::string("no detail")
                                  : result.failures.front()));
  }
  result.report = aggregate(ok_raw);

  // Deterministic metric report and raw values; wall-clock goes to its own
  // (nondeterministic) file.
  result.report_path = (fs::path(cfg.out_dir) / "report.csv").string();
  write_csv_metric_report(result.report, cfg.methods, result.report_path,
                          comment_line(cfg), /*include_seconds=*/false);

  std::string raw_csv = "# " + comment_line(cfg) + "\n";
  raw_csv += "replicate,method,outcome,metric,value\n";
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    for (const auto& mv : result.raw[r]) {
      if (mv.metric == "seconds") continue;
      raw_csv += std::to_string(r) + "," + mv.method + "," + mv.outcome +
                 "," + mv.metric + ",";
      fmt(raw_csv, mv.value);
      raw_csv += "\n";
    }
  }
  result.raw_path = (fs::path(cfg.out_dir) / "raw.csv").string();
  {
    std::ofstream f(result.raw_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + result.raw_path);
    f << raw_csv;
  }

  std::string timing_csv =
      "# wall-clock seconds; excluded from the reproducibility contract\n";
  timing_csv += "method,mean_seconds,sd_seconds\n";
  for (const auto& method : cfg.methods) {
    const MeanSd* ms = result.report.find(method, "", "seconds");
    if (ms == nullptr) continue;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f\n", method.c_str(),
                  ms->mean, ms->sd);
    timing_csv += buf;
  }
  result.timings_path = (fs::path(cfg.out_dir) / "timings.csv").string();
  {
    std::ofstream f(result.timings_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + result.timings_path);
    f << timing_csv;
  }
  return result;
}

PredictionTable read_csv_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  do {
    if (!std::getline(in, line)) {
      throw MalformedRow(line_no + 1, "missing header row");
    }
    ++line_no;
  } while (!line.empty() && line[0] == '#');

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  const std::size_t d = header.size() - 5;  // coords, outcome, mean,lo,hi,sd
  if (d < 1 || d > 2 || header[d] != "outcome") {
    throw MalformedRow(line_no, "unexpected prediction CSV header");
  }

  PredictionTable table;
  std::vector<std::string> outcome_order;
  struct Row {
    Location loc;
    std::string outcome;
    PredictionCell cell;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < header.size()) fields.push_back("");
    if (fields.size() != header.size()) {
      throw MalformedRow(line_no, "field count mismatch");
    }
    Row row;
    for (std::size_t a = 0; a < d; ++a) {
      row.loc.coords.push_back(std::stod(fields[a]));
    }
    row.outcome = fields[d];
    row.cell.mean = std::stod(fields[d + 1]);
    if (!fields[d + 2].empty()) row.cell.lo = std::stod(fields[d + 2]);
    if (!fields[d + 3].empty()) row.cell.hi = std::stod(fields[d + 3]);
    if (!fields[d + 4].empty()) row.cell.sd = std::stod(fields[d + 4]);
    if (std::find(outcome_order.begin(), outcome_order.end(), row.outcome) ==
        outcome_order.end()) {
      outcome_order.push_back(row.outcome);
    }
    rows.push_back(std::move(row));
  }
  const std::size_t nj = outcome_order.size();
  if (nj == 0 || rows.size() % nj != 0) {
    throw std::runtime_error("prediction CSV: ragged outcome blocks");
  }
  for (const auto& name : outcome_order) {
    OutcomeSpec spec;
    spec.name = name;
    table.outcomes.push_back(spec);
  }
  const std::size_t n = rows.size() / nj;
  table.cells.resize(rows.size());
  table.locations.resize(n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = k / nj;
    const std::size_t j = k % nj;
    table.locations[i] = rows[k].loc;
    table.cells[i * nj + j] = rows[k].cell;
    if (rows[k].outcome != outcome_order[j]) {
      throw std::runtime_error("prediction CSV: inconsistent outcome order");
    }
  }
  return table;
}

std::vector<std::vector<MetricValue>> read_csv_raw_metrics(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::vector<std::vector<MetricValue>> out;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string rep, method, outcome, metric, value;
    std::getline(ss, rep, ',');
    std::getline(ss, method, ',');
    std::getline(ss, outcome, ',');
    std::getline(ss, metric, ',');
    std::getline(ss, value, ',');
    const std::size_t r = std::stoull(rep);
    if (out.size() <= r) out.resize(r + 1);
    out[r].push_back({method, outcome, metric, std::stod(value)});
  }
  return out;
}

EvalResult cmd_eval(const RunConfig& cfg, const std::string& predictions_path,
                    const std::string& truth_path) {
  fs::create_directories(cfg.out_dir);
  const PredictionTable pred = read_csv_predictions(predictions_path);
  const DatasetSchema schema = dataset_schema(cfg);
  const Dataset truth = read_csv_dataset(truth_path, schema.outcomes,
                                         schema.coord_columns,
                                         schema.covariate_columns);
  if (truth.n() != pred.locations.size()) {
    throw std::runtime_error(
        "eval: prediction and truth row counts differ (rows are matched "
        "by order)");
  }

  std::vector<MetricValue> values;
  for (std::size_t j = 0; j < pred.outcomes.size(); ++j) {
    // Find the outcome in the truth schema by name.
    std::size_t tj = truth.n_outcomes();
    for (std::size_t k = 0; k < truth.n_outcomes(); ++k) {
      if (truth.outcomes[k].name == pred.outcomes[j].name) tj = k;
    }
    if (tj == truth.n_outcomes()) continue;
    const auto kind = truth.outcomes[tj].kind;
    std::vector<double> t, m, lo, hi;
    bool has_intervals = true;
    for (std::size_t i = 0; i < truth.n(); ++i) {
      const auto& cell = truth.response(i, tj);
      if (!cell) continue;
      t.push_back(*cell);
      m.push_back(pred.cell(i, j).mean);
      if (pred.cell(i, j).lo && pred.cell(i, j).hi) {
        lo.push_back(*pred.cell(i, j).lo);
        hi.push_back(*pred.cell(i, j).hi);
      } else {
        has_intervals = false;
      }
    }
    if (t.empty()) continue;
    const std::string name = pred.outcomes[j].name;
    if (kind == OutcomeKind::kBinary) {
      values.push_back({"eval", name, "auc", auc(t, m)});
      values.push_back({"eval", name, "brier", brier(t, m)});
    } else {
      values.push_back({"eval", name, "rmse", rmse(t, m)});
      if (has_intervals) {
        const auto [cov, width] = coverage_and_width(t, lo, hi);
        values.push_back({"eval", name, "coverage", cov});
        values.push_back({"eval", name, "width", width});
      }
    }
  }
  const MetricReport report = aggregate({values});
  EvalResult result;
  result.report_path = (fs::path(cfg.out_dir) / "eval_report.csv").string();
  write_csv_metric_report(report, {"eval"}, result.report_path,
                          comment_line(cfg));
  return result;
}

}  // namespace mdgp
