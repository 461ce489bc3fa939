#include "mdgp/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mdgp/errors.hpp"

namespace mdgp {
namespace {

const std::set<std::string> kKnownKeys = {
    "case", "seed", "out_dir", "replicates", "workers", "methods",
    "case1.n", "case1.mu", "case1.sigma2", "case1.rho", "case1.tau2",
    "case1.c", "case1.kappa", "case1.alpha", "case1.beta",
    "case1.train_count",
    "case2.n", "case2.alpha", "case2.beta", "case2.sigma2",
    "case2.train_frac", "case2.grid_locations",
    "csv.train_path", "csv.test_path", "csv.coord_columns", "csv.outcomes",
    "csv.covariate_columns",
    "net.hidden_widths", "net.activation", "net.keep_hidden",
    "net.keep_heads", "net.use_tps", "net.tps_grid", "net.tps_bbox",
    "train.epochs", "train.batch_size", "train.learning_rate",
    "train.optimizer", "train.gradient_clip", "train.per_row_masks",
    "predict.m_draws", "predict.level", "predict.y_samples",
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));  // tolerate trailing comma
  return out;
}

std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    if (pairs.count(key)) {
      throw ConfigError("config: duplicate key '" + key + "'");
    }
    pairs[key] = value;
  }
  return pairs;
}

class Schema {
 public:
  explicit Schema(std::map<std::string, std::string> pairs)
      : pairs_(std::move(pairs)) {
    for (const auto& [k, v] : pairs_) {
      if (!kKnownKeys.count(k)) {
        throw ConfigError("config: unknown key '" + k + "'");
      }
    }
  }

  bool has(const std::string& key) const { return pairs_.count(key) > 0; }
  std::string str(const std::string& key, const std::string& dflt) const {
    const auto it = pairs_.find(key);
    return it == pairs_.end() ? dflt : it->second;
  }
  double real(const std::string& key, double dflt) const {
    const auto it = pairs_.find(key);
    if (it == pairs_.end()) return dflt;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not a number");
    }
  }
  std::uint64_t u64(const std::string& key, std::uint64_t dflt) const {
    const auto it = pairs_.find(key);
    if (it == pairs_.end()) return dflt;
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key +
                        "' is not an unsigned integer");
    }
  }
  bool flag(const std::string& key, bool dflt) const {
    const auto it = pairs_.find(key);
    if (it == pairs_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config: key '" + key + "' must be true/false");
  }
  std::vector<std::string> list(const std::string& key,
                                const std::vector<std::string>& dflt) const {
    const auto it = pairs_.find(key);
    if (it == pairs_.end()) return dflt;
    return split_list(it->second);
  }

  const std::map<std::string, std::string>& pairs() const { return pairs_; }

 private:
  std::map<std::string, std::string> pairs_;
};

std::vector<double> real_list(const Schema& s, const std::string& key,
                              const std::vector<double>& dflt) {
  if (!s.has(key)) return dflt;
  std::vector<double> out;
  for (const auto& item : s.list(key, {})) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' holds a non-number");
    }
  }
  return out;
}

std::vector<std::size_t> count_list(const Schema& s, const std::string& key,
                                    const std::vector<std::size_t>& dflt) {
  if (!s.has(key)) return dflt;
  std::vector<std::size_t> out;
  for (const auto& item : s.list(key, {})) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' holds a non-count");
    }
  }
  return out;
}

}  // namespace

std::uint64_t config_hash_of(const std::string& text) {
  const auto pairs = parse_pairs(text);
  std::string canon;
  for (const auto& [k, v] : pairs) {  // std::map iterates sorted
    canon += k;
    canon += '=';
    canon += v;
    canon += '\n';
  }
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_run_config(const std::string& text) {
  Schema s(parse_pairs(text));
  RunConfig cfg;

  const std::string case_name = s.str("case", "case1");
  if (case_name == "case1") {
    cfg.case_kind = CaseKind::kCase1;
  } else if (case_name == "case2") {
    cfg.case_kind = CaseKind::kCase2;
  } else if (case_name == "csv") {
    cfg.case_kind = CaseKind::kCsv;
  } else {
    throw ConfigError("config: case must be case1 | case2 | csv");
  }

  cfg.seed = s.u64("seed", 0);
  cfg.out_dir = s.str("out_dir", ".");
  cfg.replicates = s.u64("replicates", 100);
  cfg.workers = s.u64("workers", 1);
  cfg.methods = s.list("methods", cfg.methods);
  for (const auto& m : cfg.methods) {
    if (m != "multideepgp" && m != "multidnn" && m != "kriging") {
      throw ConfigError("config: unknown method '" + m + "'");
    }
  }
  if (cfg.methods.empty()) throw ConfigError("config: empty methods list");

  cfg.case1.n = s.u64("case1.n", cfg.case1.n);
  cfg.case1.mu = s.real("case1.mu", cfg.case1.mu);
  cfg.case1.sigma2 = s.real("case1.sigma2", cfg.case1.sigma2);
  cfg.case1.rho = s.real("case1.rho", cfg.case1.rho);
  cfg.case1.tau2 = s.real("case1.tau2", cfg.case1.tau2);
  cfg.case1.c = s.real("case1.c", cfg.case1.c);
  cfg.case1.kappa = s.real("case1.kappa", cfg.case1.kappa);
  cfg.case1.alpha = s.real("case1.alpha", cfg.case1.alpha);
  cfg.case1.beta = s.real("case1.beta", cfg.case1.beta);
  cfg.case1.train_count = s.u64("case1.train_count", cfg.case1.train_count);

  cfg.case2.n = s.u64("case2.n", cfg.case2.n);
  cfg.case2.alpha = s.real("case2.alpha", cfg.case2.alpha);
  cfg.case2.beta = s.real("case2.beta", cfg.case2.beta);
  cfg.case2.sigma2 = s.real("case2.sigma2", cfg.case2.sigma2);
  cfg.case2.train_frac = s.real("case2.train_frac", cfg.case2.train_frac);
  cfg.case2.grid_locations =
      s.flag("case2.grid_locations", cfg.case2.grid_locations);

  cfg.csv.train_path = s.str("csv.train_path", "");
  cfg.csv.test_path = s.str("csv.test_path", "");
  cfg.csv.coord_columns = s.list("csv.coord_columns", {});
  cfg.csv.covariate_columns = s.list("csv.covariate_columns", {});
  if (s.has("csv.outcomes")) {
    // name:kind pairs, e.g. "veg:binary, cases:count, water:continuous"
    for (const auto& item : s.list("csv.outcomes", {})) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ConfigError("config: csv.outcomes entries are name:kind");
      }
      OutcomeSpec spec;
      spec.name = trim(item.substr(0, colon));
      try {
        spec.kind = kind_from_name(trim(item.substr(colon + 1)));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      cfg.csv.outcomes.push_back(spec);
    }
  }
  if (cfg.case_kind == CaseKind::kCsv) {
    if (cfg.csv.train_path.empty() || cfg.csv.coord_columns.empty() ||
        cfg.csv.outcomes.empty()) {
      throw ConfigError(
          "config: case=csv requires csv.train_path, csv.coord_columns and "
          "csv.outcomes");
    }
  }

  cfg.net.hidden_widths =
      count_list(s, "net.hidden_widths", cfg.net.hidden_widths);
  cfg.net.activation = s.str("net.activation", cfg.net.activation);
  activation_from_name(cfg.net.activation);  // validate
  cfg.net.keep_hidden = real_list(s, "net.keep_hidden", cfg.net.keep_hidden);
  if (cfg.net.keep_hidden.size() == 1 && cfg.net.hidden_widths.size() > 1) {
    cfg.net.keep_hidden.assign(cfg.net.hidden_widths.size(),
                               cfg.net.keep_hidden[0]);
  }
  if (cfg.net.keep_hidden.size() != cfg.net.hidden_widths.size()) {
    throw ConfigError("config: net.keep_hidden length mismatch");
  }
  cfg.net.keep_heads = s.real("net.keep_heads", cfg.net.keep_heads);
  cfg.net.use_tps = s.flag("net.use_tps", cfg.net.use_tps);
  cfg.net.tps_grid = count_list(s, "net.tps_grid", cfg.net.tps_grid);
  cfg.net.tps_bbox = real_list(s, "net.tps_bbox", cfg.net.tps_bbox);
  if (cfg.net.tps_grid.size() != 2 || cfg.net.tps_bbox.size() != 4) {
    throw ConfigError("config: net.tps_grid is r,c and net.tps_bbox is "
                      "x0,x1,y0,y1");
  }

  cfg.train.epochs = s.u64("train.epochs", cfg.train.epochs);
  cfg.train.batch_size = s.u64("train.batch_size", cfg.train.batch_size);
  cfg.train.learning_rate =
      s.real("train.learning_rate", cfg.train.learning_rate);
  const std::string opt = s.str("train.optimizer", "adam");
  if (opt == "adam") {
    cfg.train.optimizer = Optimizer::kAdam;
  } else if (opt == "sgd") {
    cfg.train.optimizer = Optimizer::kSgd;
  } else {
    throw ConfigError("config: train.optimizer must be adam | sgd");
  }
  cfg.train.gradient_clip =
      s.real("train.gradient_clip", cfg.train.gradient_clip);
  cfg.train.per_row_masks =
      s.flag("train.per_row_masks", cfg.train.per_row_masks);

  cfg.predict.m_draws = s.u64("predict.m_draws", cfg.predict.m_draws);
  cfg.predict.level = s.real("predict.level", cfg.predict.level);
  cfg.predict.y_sample_per_draw =
      s.u64("predict.y_samples", cfg.predict.y_sample_per_draw);
  cfg.predict.validate();

  std::string canon;
  for (const auto& [k, v] : s.pairs()) {
    canon += k;
    canon += '=';
    canon += v;
    canon += '\n';
  }
  cfg.config_hash = config_hash_of(canon);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

NetworkConfig RunConfig::make_network() const {
  NetworkConfig nc;
  nc.hidden_widths = net.hidden_widths;
  nc.hidden_activation = activation_from_name(net.activation);
  nc.keep_hidden = net.keep_hidden;
  // input_dim / covariate_dim / n_train / heads are completed by fit_model,
  // which broadcasts a single keep_heads value across all heads.
  nc.keep_heads = {net.keep_heads};
  nc.input_dim = 1;  // placeholder until data is attached
  return nc;
}

}  // namespace mdgp
