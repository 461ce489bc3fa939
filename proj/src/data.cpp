#include "mdgp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mdgp/errors.hpp"

namespace mdgp {
namespace {

// Fixed sub-stream keys so adding a draw stage never perturbs another's
// sequence.
constexpr std::uint64_t kStageGp = 1;
constexpr std::uint64_t kStageNugget = 2;
constexpr std::uint64_t kStageBinary = 3;
constexpr std::uint64_t kStageCount = 4;
constexpr std::uint64_t kStageLocations = 5;
constexpr std::uint64_t kStageNoise = 6;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fmt_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

const char* kind_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kBinary: return "binary";
    case OutcomeKind::kCount: return "count";
    case OutcomeKind::kContinuous: return "continuous";
  }
  return "?";
}

const char* link_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kBinary: return "logit";
    case OutcomeKind::kCount: return "log";
    case OutcomeKind::kContinuous: return "identity";
  }
  return "?";
}

OutcomeKind kind_from_name(const std::string& s) {
  if (s == "binary") return OutcomeKind::kBinary;
  if (s == "count") return OutcomeKind::kCount;
  if (s == "continuous") return OutcomeKind::kContinuous;
  throw std::invalid_argument("unknown outcome kind: " + s);
}

void Dataset::validate() const {
  const std::size_t j = outcomes.size();
  if (responses.size() != n() * j) {
    throw std::invalid_argument("Dataset: response table dimension mismatch");
  }
  for (const auto& loc : locations) {
    if (loc.coords.size() != coord_dim()) {
      throw std::invalid_argument("Dataset: inconsistent coordinate dims");
    }
    for (double c : loc.coords) {
      if (!std::isfinite(c)) {
        throw std::invalid_argument("Dataset: non-finite coordinate");
      }
    }
  }
  for (std::size_t i = 0; i < n(); ++i) {
    for (std::size_t k = 0; k < j; ++k) {
      const auto& cell = response(i, k);
      if (!cell) continue;
      const double v = *cell;
      if (!std::isfinite(v)) {
        throw std::invalid_argument("Dataset: non-finite response");
      }
      if (outcomes[k].kind == OutcomeKind::kBinary && v != 0.0 && v != 1.0) {
        throw std::invalid_argument("Dataset: binary cell outside {0,1}");
      }
      if (outcomes[k].kind == OutcomeKind::kCount &&
          (v < 0.0 || v != std::floor(v))) {
        throw std::invalid_argument("Dataset: count cell not a nonneg integer");
      }
    }
  }
  if (features.rows != 0 && features.rows != n()) {
    throw std::invalid_argument("Dataset: feature rows mismatch");
  }
}

void Case1Config::validate() const {
  if (sigma2 <= 0 || rho <= 0 || tau2 <= 0 || kappa <= 0) {
    throw std::invalid_argument("Case1Config: sigma2, rho, tau2, kappa > 0");
  }
  if (n < 2 || train_count == 0 || train_count >= n) {
    throw std::invalid_argument("Case1Config: need 0 < train_count < n");
  }
}

void Case2Config::validate() const {
  if (n < 2) throw std::invalid_argument("Case2Config: n >= 2");
  if (sigma2 <= 0) throw std::invalid_argument("Case2Config: sigma2 > 0");
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("Case2Config: train_frac in (0,1)");
  }
}

double case2_surface(double sbar) {
  const double t = sbar - 0.9;
  return std::sin(30.0 * t * t * t * t) * std::cos(2.0 * t) + t / 2.0;
}

Dataset simulate_case1(const Case1Config& config, RngStream& rng) {
  config.validate();
  const std::size_t n = config.n;

  Dataset data;
  data.locations.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.locations[i].coords = {static_cast<double>(i) /
                                static_cast<double>(n - 1)};
  }

  DenseMatrix cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double d = std::abs(data.locations[i].coords[0] -
                                data.locations[j].coords[0]);
      const double v = exp_cov(d, config.sigma2, config.rho);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  DenseMatrix chol;
  try {
    chol = cholesky(cov);
  } catch (const NotPositiveDefinite&) {
    // One jitter retry; a second failure propagates.
    for (std::size_t i = 0; i < n; ++i) cov(i, i) += 1e-8;
    chol = cholesky(cov);
  }

  RngStream gp_rng = rng.split(kStageGp);
  RngStream nugget_rng = rng.split(kStageNugget);
  RngStream binary_rng = rng.split(kStageBinary);
  RngStream count_rng = rng.split(kStageCount);

  std::vector<double> zero(n, 0.0);
  std::vector<double> nu = mvn_sample(zero, chol, gp_rng);
  const double tau = std::sqrt(config.tau2);

  data.outcomes = {{"binary", OutcomeKind::kBinary},
                   {"count", OutcomeKind::kCount},
                   {"continuous", OutcomeKind::kContinuous}};
  data.responses.assign(n * 3, std::nullopt);
  data.latent.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = config.mu + nu[i] + nugget_rng.normal(0.0, tau);
    data.latent[i] = z;
    const double p = logistic((z - config.c) / config.kappa);
    data.response(i, 0) = binary_rng.bernoulli(p) ? 1.0 : 0.0;
    data.response(i, 1) = static_cast<double>(
        count_rng.poisson(std::exp(config.alpha + config.beta * z)));
    data.response(i, 2) = z;
  }
  return data;
}

Dataset simulate_case2(const Case2Config& config, RngStream& rng) {
  config.validate();
  const std::size_t n = config.n;

  Dataset data;
  data.locations.resize(n);
  RngStream loc_rng = rng.split(kStageLocations);
  if (config.grid_locations) {
    const auto side = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(n))));
    std::size_t idx = 0;
    for (std::size_t i = 0; i < side && idx < n; ++i) {
      for (std::size_t j = 0; j < side && idx < n; ++j, ++idx) {
        data.locations[idx].coords = {
            static_cast<double>(i) / static_cast<double>(side - 1),
            static_cast<double>(j) / static_cast<double>(side - 1)};
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = loc_rng.uniform();
      const double y = loc_rng.uniform();
      data.locations[i].coords = {x, y};
    }
  }

  RngStream count_rng = rng.split(kStageCount);
  RngStream binary_rng = rng.split(kStageBinary);
  RngStream noise_rng = rng.split(kStageNoise);
  const double sd = std::sqrt(config.sigma2);

  data.outcomes = {{"binary", OutcomeKind::kBinary},
                   {"count", OutcomeKind::kCount},
                   {"continuous", OutcomeKind::kContinuous}};
  data.responses.assign(n * 3, std::nullopt);
  data.latent.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sbar =
        (data.locations[i].coords[0] + data.locations[i].coords[1]) / 2.0;
    const double eta = config.alpha + config.beta * case2_surface(sbar);
    data.latent[i] = eta;
    data.response(i, 0) = binary_rng.bernoulli(logistic(eta)) ? 1.0 : 0.0;
    data.response(i, 1) =
        static_cast<double>(count_rng.poisson(std::exp(eta)));
    data.response(i, 2) = eta + noise_rng.normal(0.0, sd);
  }
  return data;
}

namespace {

Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.outcomes = data.outcomes;
  out.feature_names = data.feature_names;
  out.locations.reserve(rows.size());
  out.responses.reserve(rows.size() * data.n_outcomes());
  if (data.features.rows > 0) {
    out.features = DenseMatrix(rows.size(), data.features.cols);
  }
  if (!data.latent.empty()) out.latent.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    out.locations.push_back(data.locations[i]);
    for (std::size_t j = 0; j < data.n_outcomes(); ++j) {
      out.responses.push_back(data.response(i, j));
    }
    if (data.features.rows > 0) {
      for (std::size_t c = 0; c < data.features.cols; ++c) {
        out.features(r, c) = data.features(i, c);
      }
    }
    if (!data.latent.empty()) out.latent.push_back(data.latent[i]);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t train_count,
                                  RngStream& rng) {
  const std::size_t n = data.n();
  if (train_count == 0 || train_count >= n) {
    throw std::invalid_argument("split: need 0 < train size < n");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Fisher-Yates with the seeded stream.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::size_t> train_rows(idx.begin(), idx.begin() + train_count);
  std::vector<std::size_t> test_rows(idx.begin() + train_count, idx.end());
  return {take_rows(data, train_rows), take_rows(data, test_rows)};
}

std::pair<Dataset, Dataset> split_frac(const Dataset& data, double train_frac,
                                       RngStream& rng) {
  // Rounding convention: train size = round(frac * n), nearest, ties away
  // from zero.
  const auto train_count = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(data.n())));
  return split(data, train_count, rng);
}

KnotSet knot_lattice(const std::vector<std::pair<double, double>>& bbox,
                     const std::vector<std::size_t>& grid,
                     const std::function<bool(const Location&)>& mask) {
  if (bbox.size() != grid.size() || bbox.empty()) {
    throw std::invalid_argument("knot_lattice: bbox/grid dims mismatch");
  }
  for (std::size_t g : grid) {
    if (g < 2) throw std::invalid_argument("knot_lattice: grid dims >= 2");
  }
  KnotSet out;
  out.grid_dims = grid;
  out.bbox = bbox;

  const std::size_t d = grid.size();
  std::size_t total = 1;
  for (std::size_t g : grid) total *= g;
  std::vector<std::size_t> ix(d, 0);
  for (std::size_t k = 0; k < total; ++k) {
    Location loc;
    loc.coords.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      const double t = static_cast<double>(ix[a]) /
                       static_cast<double>(grid[a] - 1);
      loc.coords[a] = bbox[a].first + t * (bbox[a].second - bbox[a].first);
    }
    if (!mask || mask(loc)) out.knots.push_back(std::move(loc));
    for (std::size_t a = d; a-- > 0;) {
      if (++ix[a] < grid[a]) break;
      ix[a] = 0;
    }
  }
  if (out.knots.empty()) {
    throw std::invalid_argument("knot_lattice: mask removed every knot");
  }
  return out;
}

DenseMatrix tps_features(const std::vector<Location>& locations,
                         const KnotSet& knots) {
  const std::size_t n = locations.size();
  const std::size_t m = knots.knots.size();
  if (n > 0 && m > 0 &&
      locations[0].coords.size() != knots.knots[0].coords.size()) {
    throw std::invalid_argument("tps_features: coordinate dims differ");
  }
  DenseMatrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = locations[i].coords;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& u = knots.knots[j].coords;
      double r2 = 0.0;
      for (std::size_t a = 0; a < s.size(); ++a) {
        const double dd = s[a] - u[a];
        r2 += dd * dd;
      }
      // r^2 log r, continuous extension 0 at r = 0.
      x(i, j) = (r2 == 0.0) ? 0.0 : 0.5 * r2 * std::log(r2);
    }
  }
  return x;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line,
                    const std::string& col) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw TypeViolation(line, col, "not a number: '" + s + "'");
  }
  if (pos != s.size()) {
    throw TypeViolation(line, col, "trailing characters: '" + s + "'");
  }
  if (!std::isfinite(v)) throw TypeViolation(line, col, "non-finite value");
  return v;
}

}  // namespace

Dataset read_csv_dataset(const std::string& path,
                         const std::vector<OutcomeSpec>& schema,
                         const std::vector<std::string>& coord_columns,
                         const std::vector<std::string>& covariate_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  // Leading '#' comment lines are tool metadata, not data.
  do {
    if (!std::getline(in, line)) {
      throw MalformedRow(line_no + 1, "missing header row");
    }
    ++line_no;
  } while (!line.empty() && line[0] == '#');

  const auto header = split_csv_line(line);
  auto col_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw std::runtime_error("column '" + name + "' not found in " + path);
  };

  std::vector<std::size_t> coord_ix, outcome_ix, cov_ix;
  for (const auto& c : coord_columns) coord_ix.push_back(col_index(c));
  for (const auto& o : schema) outcome_ix.push_back(col_index(o.name));
  for (const auto& c : covariate_columns) cov_ix.push_back(col_index(c));

  Dataset data;
  data.outcomes = schema;
  data.feature_names = covariate_columns;
  std::vector<double> feat_flat;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw MalformedRow(line_no, "expected " +
                                      std::to_string(header.size()) +
                                      " fields, got " +
                                      std::to_string(fields.size()));
    }
    Location loc;
    for (std::size_t ci : coord_ix) {
      loc.coords.push_back(
          parse_double(trim(fields[ci]), line_no, trim(header[ci])));
    }
    data.locations.push_back(std::move(loc));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string cell = trim(fields[outcome_ix[j]]);
      if (cell.empty()) {
        data.responses.emplace_back(std::nullopt);
        continue;
      }
      const double v = parse_double(cell, line_no, schema[j].name);
      switch (schema[j].kind) {
        case OutcomeKind::kBinary:
          if (v != 0.0 && v != 1.0) {
            throw TypeViolation(line_no, schema[j].name,
                                "binary value outside {0,1}");
          }
          break;
        case OutcomeKind::kCount:
          if (v < 0.0 || v != std::floor(v)) {
            throw TypeViolation(line_no, schema[j].name,
                                "count value not a nonnegative integer");
          }
          break;
        case OutcomeKind::kContinuous:
          break;
      }
      data.responses.emplace_back(v);
    }
    for (std::size_t ci : cov_ix) {
      feat_flat.push_back(
          parse_double(trim(fields[ci]), line_no, trim(header[ci])));
    }
  }
  if (!cov_ix.empty()) {
    data.features = DenseMatrix(data.n(), cov_ix.size());
    data.features.entries = std::move(feat_flat);
  }
  data.validate();
  return data;
}

void write_csv_dataset(const Dataset& data, const std::string& path,
                       const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  const std::size_t d = data.coord_dim();
  for (std::size_t a = 0; a < d; ++a) {
    if (a) out += ",";
    out += (d == 1) ? "s" : (a == 0 ? "x" : "y");
  }
  for (const auto& o : data.outcomes) {
    out += ",";
    out += o.name;
  }
  for (const auto& f : data.feature_names) {
    out += ",";
    out += f;
  }
  out += "\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      if (a) out += ",";
      fmt_double(out, data.locations[i].coords[a]);
    }
    for (std::size_t j = 0; j < data.n_outcomes(); ++j) {
      out += ",";
      if (data.response(i, j)) fmt_double(out, *data.response(i, j));
    }
    for (std::size_t c = 0; c < data.features.cols; ++c) {
      out += ",";
      fmt_double(out, data.features(i, c));
    }
    out += "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

void write_csv_knots(const KnotSet& knots, const std::string& path) {
  std::string out;
  const std::size_t d =
      knots.knots.empty() ? 0 : knots.knots[0].coords.size();
  for (std::size_t a = 0; a < d; ++a) {
    if (a) out += ",";
    out += (d == 1) ? "s" : (a == 0 ? "x" : "y");
  }
  out += "\n";
  for (const auto& k : knots.knots) {
    for (std::size_t a = 0; a < d; ++a) {
      if (a) out += ",";
      fmt_double(out, k.coords[a]);
    }
    out += "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

}  // namespace mdgp
