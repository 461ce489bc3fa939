#include "mdgp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mdgp/errors.hpp"

namespace mdgp {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double inverse_link(OutcomeKind kind, double eta) {
  switch (kind) {
    case OutcomeKind::kBinary: return sigmoid(eta);
    case OutcomeKind::kCount: return std::exp(eta);
    case OutcomeKind::kContinuous: return eta;
  }
  return eta;
}

void fmt(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void PredictConfig::validate() const {
  if (m_draws == 0) throw std::invalid_argument("PredictConfig: m_draws >= 1");
  if (y_sample_per_draw == 0) {
    throw std::invalid_argument("PredictConfig: y_sample_per_draw >= 1");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("PredictConfig: level in (0,1)");
  }
}

PredictiveSamples mc_forward(const Params& params, const NetworkConfig& net,
                             const DenseMatrix& inputs,
                             const DenseMatrix& covariates,
                             const PredictConfig& pcfg) {
  pcfg.validate();
  if (inputs.cols != net.input_dim) {
    throw std::invalid_argument("mc_forward: input_dim mismatch");
  }
  if (net.covariate_dim > 0 && covariates.rows != inputs.rows) {
    throw std::invalid_argument("mc_forward: covariate rows mismatch");
  }
  PredictiveSamples out;
  out.m_draws = pcfg.m_draws;
  out.n_locations = inputs.rows;
  out.n_outcomes = net.heads.size();
  out.eta.resize(out.m_draws * out.n_locations * out.n_outcomes);
  out.mask_stream_ids.resize(out.m_draws);

  RngStream base(pcfg.seed, 0);
  ForwardTrace trace;
  for (std::size_t m = 0; m < pcfg.m_draws; ++m) {
    RngStream draw_rng = base.split(m);
    out.mask_stream_ids[m] = draw_rng.stream_id();
    const MaskSet masks = sample_masks(net, draw_rng);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
      forward_into(params, masks, inputs.row(i),
                   net.covariate_dim ? covariates.row(i) : nullptr, net,
                   trace);
      double* dst =
          out.eta.data() + (m * out.n_locations + i) * out.n_outcomes;
      for (std::size_t j = 0; j < out.n_outcomes; ++j) dst[j] = trace.eta[j];
    }
  }
  return out;
}

std::vector<double> predictive_mean(const PredictiveSamples& samples,
                                    std::span<const OutcomeSpec> specs) {
  if (specs.size() != samples.n_outcomes) {
    throw std::invalid_argument("predictive_mean: spec count mismatch");
  }
  std::vector<double> mean(samples.n_locations * samples.n_outcomes, 0.0);
  const double inv_m = 1.0 / static_cast<double>(samples.m_draws);
  for (std::size_t m = 0; m < samples.m_draws; ++m) {
    for (std::size_t i = 0; i < samples.n_locations; ++i) {
      for (std::size_t j = 0; j < samples.n_outcomes; ++j) {
        mean[i * samples.n_outcomes + j] +=
            inverse_link(specs[j].kind, samples.at(m, i, j)) * inv_m;
      }
    }
  }
  return mean;
}

std::vector<double> predictive_sd(const PredictiveSamples& samples,
                                  std::span<const OutcomeSpec> specs) {
  const std::size_t n = samples.n_locations;
  const std::size_t nj = samples.n_outcomes;
  std::vector<double> mean = predictive_mean(samples, specs);
  std::vector<double> sq(n * nj, 0.0);
  for (std::size_t m = 0; m < samples.m_draws; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < nj; ++j) {
        const double d =
            inverse_link(specs[j].kind, samples.at(m, i, j)) - mean[i * nj + j];
        sq[i * nj + j] += d * d;
      }
    }
  }
  std::vector<double> sd(n * nj, 0.0);
  if (samples.m_draws > 1) {
    const double inv = 1.0 / static_cast<double>(samples.m_draws - 1);
    for (std::size_t k = 0; k < sd.size(); ++k) sd[k] = std::sqrt(sq[k] * inv);
  }
  return sd;
}

IntervalTable predictive_interval(const PredictiveSamples& samples,
                                  std::span<const OutcomeSpec> specs,
                                  std::span<const double> sigma2_hat,
                                  const PredictConfig& pcfg, RngStream& rng) {
  pcfg.validate();
  const std::size_t n = samples.n_locations;
  const std::size_t nj = samples.n_outcomes;
  std::size_t n_cont = 0;
  for (const auto& s : specs) {
    if (s.kind == OutcomeKind::kContinuous) ++n_cont;
  }
  if (sigma2_hat.size() != n_cont) {
    throw std::invalid_argument(
        "predictive_interval: sigma2_hat must hold one variance per "
        "continuous outcome");
  }

  IntervalTable out;
  out.lo.assign(n * nj, 0.0);
  out.hi.assign(n * nj, 0.0);
  const double alpha = 1.0 - pcfg.level;
  const std::size_t pool_size = samples.m_draws * pcfg.y_sample_per_draw;
  std::vector<double> pool(pool_size);

  std::size_t cont_slot = 0;
  for (std::size_t j = 0; j < nj; ++j) {
    const OutcomeKind kind = specs[j].kind;
    double sigma = 0.0;
    if (kind == OutcomeKind::kContinuous) {
      sigma = std::sqrt(sigma2_hat[cont_slot]);
      ++cont_slot;
    }
    for (std::size_t i = 0; i < n; ++i) {
      // Per-cell child stream: the pooled responses depend only on the
      // stream and the draws, never on the level, so intervals nest
      // across levels under the same seed.
      RngStream cell_rng = rng.split(RngStream::hash2(i, j));
      std::size_t w = 0;
      for (std::size_t m = 0; m < samples.m_draws; ++m) {
        const double eta = samples.at(m, i, j);
        switch (kind) {
          case OutcomeKind::kBinary: {
            const double p = sigmoid(eta);
            for (std::size_t k = 0; k < pcfg.y_sample_per_draw; ++k) {
              pool[w++] = cell_rng.bernoulli(p) ? 1.0 : 0.0;
            }
            break;
          }
          case OutcomeKind::kCount: {
            const double lambda = std::exp(eta);
            for (std::size_t k = 0; k < pcfg.y_sample_per_draw; ++k) {
              pool[w++] = static_cast<double>(cell_rng.poisson(lambda));
            }
            break;
          }
          case OutcomeKind::kContinuous: {
            for (std::size_t k = 0; k < pcfg.y_sample_per_draw; ++k) {
              pool[w++] = eta + sigma * cell_rng.normal();
            }
            break;
          }
        }
      }
      std::sort(pool.begin(), pool.end());
      double lo = empirical_quantile_sorted(pool, alpha / 2.0);
      double hi = empirical_quantile_sorted(pool, 1.0 - alpha / 2.0);
      if (kind == OutcomeKind::kCount) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
      }
      out.lo[i * nj + j] = lo;
      out.hi[i * nj + j] = hi;
    }
  }
  return out;
}

PredictionTable predict_model(const FittedModel& model,
                              const std::vector<Location>& locations,
                              const DenseMatrix& inputs_raw,
                              const DenseMatrix& covariates_raw,
                              const PredictConfig& pcfg) {
  const DenseMatrix inputs = model.input_std.apply(inputs_raw);
  DenseMatrix covs;
  if (model.net.covariate_dim > 0) {
    covs = model.covariate_std.apply(covariates_raw);
  }
  const PredictiveSamples samples =
      mc_forward(model.params, model.net, inputs, covs, pcfg);
  const auto mean = predictive_mean(samples, model.net.heads);
  const auto sd = predictive_sd(samples, model.net.heads);
  RngStream interval_rng = RngStream(pcfg.seed, 0).split(0x1eaf);
  const auto intervals = predictive_interval(samples, model.net.heads,
                                             model.sigma2, pcfg, interval_rng);

  PredictionTable table;
  table.locations = locations;
  table.outcomes = model.net.heads;
  const std::size_t nj = model.net.heads.size();
  table.cells.resize(inputs.rows * nj);
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      auto& cell = table.cell(i, j);
      cell.mean = mean[i * nj + j];
      cell.lo = intervals.lo[i * nj + j];
      cell.hi = intervals.hi[i * nj + j];
      cell.sd = sd[i * nj + j];
    }
  }
  return table;
}

std::vector<double> composite_score(
    const std::vector<std::vector<double>>& surfaces) {
  if (surfaces.empty()) {
    throw std::invalid_argument("composite_score: no surfaces");
  }
  const std::size_t n = surfaces[0].size();
  std::vector<double> score(n, 0.0);
  for (const auto& surface : surfaces) {
    if (surface.size() != n) {
      throw std::invalid_argument("composite_score: surface length mismatch");
    }
    double mean = 0.0;
    for (double v : surface) mean += v;
    mean /= static_cast<double>(n);
    double sq = 0.0;
    for (double v : surface) sq += (v - mean) * (v - mean);
    if (n < 2 || sq <= 0.0) {
      throw std::invalid_argument("composite_score: zero-variance surface");
    }
    const double sd = std::sqrt(sq / static_cast<double>(n - 1));
    for (std::size_t i = 0; i < n; ++i) {
      score[i] += (surface[i] - mean) / sd;
    }
  }
  const double inv = 1.0 / static_cast<double>(surfaces.size());
  for (double& v : score) v *= inv;
  return score;
}

ScoreGrid idw_score_grid(const std::vector<Location>& points,
                         const std::vector<double>& score,
                         std::size_t grid_size, std::size_t k_neighbors) {
  if (points.size() != score.size() || points.empty()) {
    throw std::invalid_argument("idw_score_grid: points/score mismatch");
  }
  if (grid_size < 2) throw std::invalid_argument("idw_score_grid: grid >= 2");
  if (points[0].coords.size() != 2) {
    throw std::invalid_argument("idw_score_grid: 2-d locations required");
  }
  double x0 = points[0].coords[0], x1 = x0;
  double y0 = points[0].coords[1], y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.coords[0]);
    x1 = std::max(x1, p.coords[0]);
    y0 = std::min(y0, p.coords[1]);
    y1 = std::max(y1, p.coords[1]);
  }
  const std::size_t k = std::min(k_neighbors, points.size());

  ScoreGrid grid;
  grid.grid_size = grid_size;
  grid.x.reserve(grid_size * grid_size);
  grid.y.reserve(grid_size * grid_size);
  grid.value.reserve(grid_size * grid_size);

  std::vector<std::pair<double, std::size_t>> dist(points.size());
  for (std::size_t gi = 0; gi < grid_size; ++gi) {
    const double gx =
        x0 + (x1 - x0) * static_cast<double>(gi) /
                 static_cast<double>(grid_size - 1);
    for (std::size_t gj = 0; gj < grid_size; ++gj) {
      const double gy =
          y0 + (y1 - y0) * static_cast<double>(gj) /
                   static_cast<double>(grid_size - 1);
      for (std::size_t p = 0; p < points.size(); ++p) {
        const double dx = points[p].coords[0] - gx;
        const double dy = points[p].coords[1] - gy;
        dist[p] = {dx * dx + dy * dy, p};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k),
                        dist.end());
      double wsum = 0.0, vsum = 0.0;
      bool exact = false;
      for (std::size_t t = 0; t < k; ++t) {
        if (dist[t].first == 0.0) {
          vsum = score[dist[t].second];
          exact = true;
          break;
        }
        const double w = 1.0 / dist[t].first;  // power-2 IDW on distance
        wsum += w;
        vsum += w * score[dist[t].second];
      }
      grid.x.push_back(gx);
      grid.y.push_back(gy);
      grid.value.push_back(exact ? vsum : vsum / wsum);
    }
  }
  return grid;
}

void write_csv_predictions(const PredictionTable& table,
                           const std::string& path,
                           const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  const std::size_t d =
      table.locations.empty() ? 0 : table.locations[0].coords.size();
  for (std::size_t a = 0; a < d; ++a) {
    if (a) out += ",";
    out += (d == 1) ? "s" : (a == 0 ? "x" : "y");
  }
  out += ",outcome,mean,lo,hi,sd\n";
  for (std::size_t i = 0; i < table.locations.size(); ++i) {
    for (std::size_t j = 0; j < table.outcomes.size(); ++j) {
      const auto& cell = table.cell(i, j);
      for (std::size_t a = 0; a < d; ++a) {
        if (a) out += ",";
        fmt(out, table.locations[i].coords[a]);
      }
      out += "," + table.outcomes[j].name + ",";
      fmt(out, cell.mean);
      out += ",";
      if (cell.lo) fmt(out, *cell.lo);
      out += ",";
      if (cell.hi) fmt(out, *cell.hi);
      out += ",";
      if (cell.sd) fmt(out, *cell.sd);
      out += "\n";
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

void write_csv_score_grid(const ScoreGrid& grid, const std::string& path,
                          const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  out += "x,y,score\n";
  for (std::size_t i = 0; i < grid.value.size(); ++i) {
    fmt(out, grid.x[i]);
    out += ",";
    fmt(out, grid.y[i]);
    out += ",";
    fmt(out, grid.value[i]);
    out += "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

}  // namespace mdgp
