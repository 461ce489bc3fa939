#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdgp/bench.hpp"
#include "mdgp/config.hpp"
#include "mdgp/errors.hpp"
#include "mdgp/train.hpp"

using namespace mdgp;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

RunConfig tiny_case2_config(const std::string& out_dir) {
  RunConfig cfg = parse_run_config(
      "case = case2\n"
      "seed = 11\n"
      "replicates = 2\n"
      "case2.n = 120\n"
      "net.hidden_widths = 16\n"
      "net.keep_hidden = 0.9\n"
      "train.epochs = 4\n"
      "train.batch_size = 32\n"
      "predict.m_draws = 16\n"
      "predict.y_samples = 8\n");
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("simulate: replicate count, sizes, byte-identical reruns") {
  const std::string dir1 = fresh_dir("mdgp_sim1");
  RunConfig cfg = parse_run_config(
      "case = case1\n"
      "seed = 5\n"
      "replicates = 1\n"
      "case1.n = 60\n"
      "case1.train_count = 48\n");
  cfg.out_dir = dir1;
  const auto r1 = cmd_simulate(cfg);
  REQUIRE(r1.files.size() == 2);

  const DatasetSchema schema = dataset_schema(cfg);
  const Dataset train = read_csv_dataset(r1.files[0], schema.outcomes,
                                         schema.coord_columns);
  const Dataset test = read_csv_dataset(r1.files[1], schema.outcomes,
                                        schema.coord_columns);
  CHECK(train.n() == 48);
  CHECK(test.n() == 12);

  const std::string dir2 = fresh_dir("mdgp_sim2");
  cfg.out_dir = dir2;
  const auto r2 = cmd_simulate(cfg);
  CHECK(slurp(r1.files[0]) == slurp(r2.files[0]));
  CHECK(slurp(r1.files[1]) == slurp(r2.files[1]));

  // Manifest records the config hash, recomputable from the document.
  const std::string manifest = slurp(r2.manifest_path);
  CHECK(manifest.find(hash_hex(cfg.config_hash)) != std::string::npos);
}

TEST_CASE("train: zero-epoch checkpoint equals the serialized initialization") {
  const std::string dir = fresh_dir("mdgp_train0");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.replicates = 1;
  cfg.train.epochs = 0;
  const auto sim = cmd_simulate(cfg);
  const auto tr = cmd_train(cfg, sim.files[0]);
  const FittedModel model = load_checkpoint(tr.checkpoint_path);

  // Reconstruct the init under the same derived stream.
  RngStream root(RngStream::hash2(cfg.seed, 11), 0);
  RngStream init_rng = root.split(1);
  const Params expected = init_params(model.net, init_rng);
  for (std::size_t l = 0; l < expected.hidden.size(); ++l) {
    CHECK(model.params.hidden[l].w.entries == expected.hidden[l].w.entries);
    CHECK(model.params.hidden[l].b == expected.hidden[l].b);
  }
  for (std::size_t j = 0; j < expected.heads.size(); ++j) {
    CHECK(model.params.heads[j].w == expected.heads[j].w);
    CHECK(model.params.heads[j].b == expected.heads[j].b);
  }
}

TEST_CASE("train: corrupt dataset surfaces TypeViolation with line number") {
  const std::string dir = fresh_dir("mdgp_train_bad");
  const std::string bad = dir + "/bad.csv";
  {
    std::ofstream f(bad);
    f << "x,y,binary,count,continuous\n";
    f << "0.1,0.2,1,2,0.5\n";
    f << "0.3,0.4,1,2.5,0.1\n";  // fractional count on line 3
  }
  RunConfig cfg = tiny_case2_config(dir);
  try {
    cmd_train(cfg, bad);
    FAIL("expected TypeViolation");
  } catch (const TypeViolation& e) {
    CHECK(e.line == 3);
    CHECK(e.column == "count");
  }
}

TEST_CASE("predict: checkpoint round trip reproduces predictions bit-exactly") {
  const std::string dir = fresh_dir("mdgp_predict");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.replicates = 1;
  const auto sim = cmd_simulate(cfg);
  const auto tr = cmd_train(cfg, sim.files[0]);

  cfg.out_dir = dir + "/p1";
  const auto p1 = cmd_predict(cfg, tr.checkpoint_path, sim.files[1]);
  cfg.out_dir = dir + "/p2";
  const auto p2 = cmd_predict(cfg, tr.checkpoint_path, sim.files[1]);
  CHECK(slurp(p1.predictions_path) == slurp(p2.predictions_path));

  // Level monotonicity at the CLI surface: 0.99 interval contains 0.95.
  cfg.out_dir = dir + "/p99";
  cfg.predict.level = 0.99;
  const auto p99 = cmd_predict(cfg, tr.checkpoint_path, sim.files[1]);
  const PredictionTable t95 = read_csv_predictions(p1.predictions_path);
  const PredictionTable t99 = read_csv_predictions(p99.predictions_path);
  REQUIRE(t95.cells.size() == t99.cells.size());
  for (std::size_t k = 0; k < t95.cells.size(); ++k) {
    CHECK(*t99.cells[k].lo <= *t95.cells[k].lo);
    CHECK(*t99.cells[k].hi >= *t95.cells[k].hi);
  }
}

TEST_CASE("predict: config hash mismatch is refused") {
  const std::string dir = fresh_dir("mdgp_hash");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.replicates = 1;
  const auto sim = cmd_simulate(cfg);
  const auto tr = cmd_train(cfg, sim.files[0]);
  RunConfig other = cfg;
  other.config_hash ^= 0x1;
  CHECK_THROWS_AS(cmd_predict(other, tr.checkpoint_path, sim.files[1]),
                  ConfigError);
}

TEST_CASE("predict: composite grid rejects a constant surface") {
  const std::string dir = fresh_dir("mdgp_grid");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.replicates = 1;
  cfg.train.epochs = 0;  // untrained
  const auto sim = cmd_simulate(cfg);
  const auto tr = cmd_train(cfg, sim.files[0]);

  // Zero out the checkpoint weights so every surface is constant.
  FittedModel model = load_checkpoint(tr.checkpoint_path);
  for (auto& layer : model.params.hidden) {
    for (double& v : layer.w.entries) v = 0.0;
    for (double& v : layer.b) v = 0.0;
  }
  for (auto& head : model.params.heads) {
    for (double& v : head.w) v = 0.0;
    head.b = 0.0;
  }
  model.net.keep_hidden.assign(model.net.keep_hidden.size(), 1.0);
  model.net.keep_heads.assign(model.net.keep_heads.size(), 1.0);
  const std::string flat_ckpt = dir + "/flat.bin";
  save_checkpoint(model, flat_ckpt);
  CHECK_THROWS_AS(cmd_predict(cfg, flat_ckpt, sim.files[1], 8),
                  std::invalid_argument);
}

TEST_CASE("bench: methods toggle controls the report columns") {
  const std::string dir = fresh_dir("mdgp_bench_kriging");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.methods = {"kriging"};
  const auto result = cmd_bench(cfg);
  CHECK(result.failures.empty());
  CHECK(result.report.find("kriging", "continuous", "rmse") != nullptr);
  CHECK(result.report.find("multideepgp", "continuous", "rmse") == nullptr);
  const std::string report = slurp(result.report_path);
  CHECK(report.find("kriging") != std::string::npos);
  CHECK(report.find("multideepgp") == std::string::npos);
}

TEST_CASE("bench: aggregate equals re-aggregation of the raw CSV") {
  const std::string dir = fresh_dir("mdgp_bench_raw");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.methods = {"multideepgp", "kriging"};
  const auto result = cmd_bench(cfg);
  CHECK(result.failures.empty());
  const auto raw = read_csv_raw_metrics(result.raw_path);
  const MetricReport again = aggregate(raw);
  for (const auto& [key, ms] : result.report.entries) {
    const auto pos = key.rfind('|');
    if (key.substr(pos + 1) == "seconds") continue;
    REQUIRE(again.entries.count(key) == 1);
    const auto& other = again.entries.at(key);
    CHECK(ms.mean == doctest::Approx(other.mean).epsilon(1e-12));
    CHECK(ms.sd == doctest::Approx(other.sd).epsilon(1e-9));
  }
}

TEST_CASE("bench: worker count does not change the report") {
  const std::string d1 = fresh_dir("mdgp_bench_w1");
  const std::string d2 = fresh_dir("mdgp_bench_w4");
  RunConfig cfg = tiny_case2_config(d1);
  cfg.workers = 1;
  const auto r1 = cmd_bench(cfg);
  cfg.out_dir = d2;
  cfg.workers = 4;
  const auto r2 = cmd_bench(cfg);
  CHECK(slurp(r1.report_path) == slurp(r2.report_path));
  CHECK(slurp(r1.raw_path) == slurp(r2.raw_path));
}

TEST_CASE("eval: re-scores simulated predictions") {
  const std::string dir = fresh_dir("mdgp_eval");
  RunConfig cfg = tiny_case2_config(dir);
  cfg.replicates = 1;
  cfg.train.epochs = 6;
  const auto sim = cmd_simulate(cfg);
  const auto tr = cmd_train(cfg, sim.files[0]);
  const auto pr = cmd_predict(cfg, tr.checkpoint_path, sim.files[1]);
  const auto ev = cmd_eval(cfg, pr.predictions_path, sim.files[1]);
  const std::string report = slurp(ev.report_path);
  CHECK(report.find("auc") != std::string::npos);
  CHECK(report.find("coverage") != std::string::npos);
  CHECK(report.find("rmse") != std::string::npos);
}
