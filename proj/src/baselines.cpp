#include "mdgp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mdgp {
namespace {

double distance(const Location& a, const Location& b) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.coords.size(); ++k) {
    const double d = a.coords[k] - b.coords[k];
    sq += d * d;
  }
  return std::sqrt(sq);
}

constexpr double kZ95 = 1.96;  // fixed nominal-95% kriging intervals

}  // namespace

double VariogramModel::covariance(double h) const {
  double c = partial_sill * std::exp(-h / range);
  if (h == 0.0) c += nugget;
  return c;
}

std::vector<SemivariogramBin> empirical_semivariogram(
    const std::vector<Location>& locations, const std::vector<double>& values,
    std::size_t n_bins, double max_dist) {
  const std::size_t n = locations.size();
  if (n < 2 || values.size() != n) {
    throw std::invalid_argument(
        "empirical_semivariogram: need >= 2 aligned observations");
  }
  if (!(max_dist > 0.0) || n_bins == 0) {
    throw std::invalid_argument("empirical_semivariogram: max_dist, n_bins");
  }
  std::vector<double> sums(n_bins, 0.0);
  std::vector<std::size_t> counts(n_bins, 0);
  const double width = max_dist / static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double h = distance(locations[i], locations[j]);
      if (h > max_dist) continue;
      std::size_t b = static_cast<std::size_t>(h / width);
      if (b >= n_bins) b = n_bins - 1;  // h == max_dist lands in the last bin
      const double d = values[i] - values[j];
      sums[b] += d * d;
      counts[b] += 1;
    }
  }
  std::vector<SemivariogramBin> bins;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (counts[b] == 0) continue;
    SemivariogramBin bin;
    bin.lag = (static_cast<double>(b) + 0.5) * width;
    bin.gamma = sums[b] / (2.0 * static_cast<double>(counts[b]));
    bin.pairs = counts[b];
    bins.push_back(bin);
  }
  if (bins.empty()) {
    throw std::invalid_argument("empirical_semivariogram: all bins empty");
  }
  return bins;
}

namespace {

struct WlsFit {
  double nugget = 0.0;
  double psill = 0.0;
  double sse = 0.0;
};

// Weighted least squares of gamma ~ a + b * g(h) with a, b clamped >= 0,
// g(h) = 1 - exp(-h / range).
WlsFit wls_linear(const std::vector<SemivariogramBin>& bins, double range) {
  double sw = 0.0, swg = 0.0, swgg = 0.0, swy = 0.0, swgy = 0.0;
  for (const auto& bin : bins) {
    const double w = static_cast<double>(bin.pairs) / (bin.lag * bin.lag);
    const double g = 1.0 - std::exp(-bin.lag / range);
    sw += w;
    swg += w * g;
    swgg += w * g * g;
    swy += w * bin.gamma;
    swgy += w * g * bin.gamma;
  }
  const double det = sw * swgg - swg * swg;
  double a, b;
  if (std::abs(det) < 1e-300) {
    a = swy / sw;
    b = 0.0;
  } else {
    a = (swgg * swy - swg * swgy) / det;
    b = (sw * swgy - swg * swy) / det;
  }
  if (a < 0.0) {
    a = 0.0;
    b = swgg > 0.0 ? std::max(0.0, swgy / swgg) : 0.0;
  } else if (b < 0.0) {
    b = 0.0;
    a = std::max(0.0, swy / sw);
  }
  WlsFit fit;
  fit.nugget = a;
  fit.psill = b;
  for (const auto& bin : bins) {
    const double w = static_cast<double>(bin.pairs) / (bin.lag * bin.lag);
    const double g = 1.0 - std::exp(-bin.lag / range);
    const double r = bin.gamma - (a + b * g);
    fit.sse += w * r * r;
  }
  return fit;
}

}  // namespace

VariogramModel fit_variogram(const std::vector<SemivariogramBin>& empirical) {
  if (empirical.size() < 3) {
    throw std::invalid_argument("fit_variogram: need >= 3 nonempty bins");
  }
  double max_lag = 0.0;
  double max_gamma = 0.0;
  for (const auto& bin : empirical) {
    max_lag = std::max(max_lag, bin.lag);
    max_gamma = std::max(max_gamma, bin.gamma);
  }
  if (max_gamma <= 0.0) {
    // Constant field; keep the model valid with a vanishing sill.
    VariogramModel vg;
    vg.nugget = 1e-12;
    vg.partial_sill = 0.0;
    vg.range = max_lag > 0.0 ? max_lag / 3.0 : 1.0;
    return vg;
  }

  auto search = [&](double lo, double hi, std::size_t steps) {
    double best_range = lo;
    WlsFit best;
    best.sse = std::numeric_limits<double>::infinity();
    const double log_lo = std::log(lo);
    const double log_hi = std::log(hi);
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
      const double range = std::exp(log_lo + t * (log_hi - log_lo));
      const WlsFit fit = wls_linear(empirical, range);
      if (fit.sse < best.sse) {
        best = fit;
        best_range = range;
      }
    }
    return std::make_pair(best_range, best);
  };

  double lo = max_lag / 1000.0;
  double hi = max_lag * 4.0;
  auto [range, fit] = search(lo, hi, 64);
  // Two refinement passes around the incumbent.
  for (int pass = 0; pass < 2; ++pass) {
    lo = range / 2.0;
    hi = range * 2.0;
    std::tie(range, fit) = search(lo, hi, 32);
  }

  VariogramModel vg;
  vg.nugget = fit.nugget;
  vg.partial_sill = fit.psill;
  vg.range = range;
  if (vg.total_sill() <= 0.0) vg.nugget = 1e-12;
  return vg;
}

KrigingPrediction krige(const std::vector<Location>& train_locations,
                        const std::vector<double>& train_values,
                        const std::vector<Location>& test_locations,
                        const VariogramModel& vg,
                        std::optional<double> simple_mean) {
  const std::size_t n = train_locations.size();
  if (n == 0 || train_values.size() != n) {
    throw std::invalid_argument("krige: empty or misaligned training data");
  }
  if (!(vg.range > 0.0) || !(vg.total_sill() > 0.0)) {
    throw std::invalid_argument("krige: invalid variogram");
  }
  const bool ordinary = !simple_mean.has_value();
  const std::size_t dim = ordinary ? n + 1 : n;

  auto build = [&](double jitter) {
    DenseMatrix a(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        a(i, j) = vg.covariance(distance(train_locations[i],
                                         train_locations[j]));
      }
      a(i, i) += jitter;
      if (ordinary) {
        a(i, n) = 1.0;
        a(n, i) = 1.0;
      }
    }
    return a;
  };

  std::optional<LuSolver> solver;
  try {
    solver.emplace(build(0.0));
  } catch (const std::runtime_error&) {
    solver.emplace(build(1e-10));  // one jitter retry, then propagate
  }

  KrigingPrediction out;
  out.mean.resize(test_locations.size());
  out.variance.resize(test_locations.size());
  std::vector<double> rhs(dim, 0.0);
  const double c0 = vg.covariance(0.0);
  for (std::size_t t = 0; t < test_locations.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      rhs[i] = vg.covariance(distance(test_locations[t], train_locations[i]));
    }
    if (ordinary) rhs[n] = 1.0;
    const std::vector<double> sol = solver->solve(rhs);

    double mean = ordinary ? 0.0 : *simple_mean;
    double var = c0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = sol[i];
      mean += w * (train_values[i] - (ordinary ? 0.0 : *simple_mean));
      var -= w * rhs[i];
    }
    if (ordinary) var -= sol[n];  // Lagrange multiplier
    if (var < 0.0) {
      var = 0.0;
      out.negative_variance_clamps += 1;
    }
    out.mean[t] = mean;
    out.variance[t] = var;
  }
  return out;
}

KrigeOutcomeResult krige_outcome(const Dataset& train,
                                 const std::vector<Location>& test_locations,
                                 std::size_t outcome_index,
                                 CountTransform transform) {
  if (outcome_index >= train.n_outcomes()) {
    throw std::invalid_argument("krige_outcome: outcome index out of range");
  }
  const OutcomeKind kind = train.outcomes[outcome_index].kind;

  std::vector<Location> locs;
  std::vector<double> values;
  for (std::size_t i = 0; i < train.n(); ++i) {
    const auto& cell = train.response(i, outcome_index);
    if (!cell) continue;
    locs.push_back(train.locations[i]);
    double v = *cell;
    if (kind == OutcomeKind::kCount && transform == CountTransform::kLog1p) {
      v = std::log1p(v);
    }
    values.push_back(v);
  }
  if (locs.empty()) {
    throw std::invalid_argument("krige_outcome: outcome has no observations");
  }

  // Deterministic variogram-fitting defaults: 15 equal-width bins with a
  // cutoff of half the domain diameter.
  double diameter = 0.0;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    for (std::size_t j = i + 1; j < locs.size(); ++j) {
      diameter = std::max(diameter, distance(locs[i], locs[j]));
    }
  }
  if (diameter <= 0.0) {
    throw std::invalid_argument("krige_outcome: degenerate geometry");
  }
  const auto empirical =
      empirical_semivariogram(locs, values, 15, diameter / 2.0);
  const VariogramModel vg = fit_variogram(empirical);
  const KrigingPrediction kp = krige(locs, values, test_locations, vg);

  KrigeOutcomeResult result;
  result.variogram = vg;
  result.cells.resize(test_locations.size());
  for (std::size_t t = 0; t < test_locations.size(); ++t) {
    auto& cell = result.cells[t];
    const double sd = std::sqrt(kp.variance[t]);
    switch (kind) {
      case OutcomeKind::kBinary: {
        double p = kp.mean[t];
        if (p < 0.0 || p > 1.0) {
          p = std::clamp(p, 0.0, 1.0);
          result.clamped_means += 1;
        }
        cell.mean = p;  // indicator kriging: probabilities, no intervals
        break;
      }
      case OutcomeKind::kCount: {
        if (transform == CountTransform::kLog1p) {
          cell.mean = std::max(0.0, std::expm1(kp.mean[t]));
          cell.lo = std::floor(
              std::max(0.0, std::expm1(kp.mean[t] - kZ95 * sd)));
          cell.hi =
              std::ceil(std::max(0.0, std::expm1(kp.mean[t] + kZ95 * sd)));
        } else {
          cell.mean = std::max(0.0, kp.mean[t]);
          cell.lo = std::floor(std::max(0.0, kp.mean[t] - kZ95 * sd));
          cell.hi = std::ceil(std::max(0.0, kp.mean[t] + kZ95 * sd));
        }
        cell.sd = sd;
        break;
      }
      case OutcomeKind::kContinuous: {
        cell.mean = kp.mean[t];
        cell.lo = kp.mean[t] - kZ95 * sd;
        cell.hi = kp.mean[t] + kZ95 * sd;
        cell.sd = sd;
        break;
      }
    }
  }
  return result;
}

DnnResult dnn_fit_predict(const DenseMatrix& train_inputs_raw,
                          const DenseMatrix& train_covariates_raw,
                          const std::vector<std::optional<double>>& responses,
                          const std::vector<OutcomeSpec>& outcomes,
                          const DenseMatrix& test_inputs_raw,
                          const DenseMatrix& test_covariates_raw,
                          NetworkConfig net, const TrainConfig& tcfg) {
  DnnResult result;
  auto [model, report] = fit_model(train_inputs_raw, train_covariates_raw,
                                   responses, outcomes, std::move(net), tcfg);
  result.report = std::move(report);

  const DenseMatrix inputs = model.input_std.apply(test_inputs_raw);
  DenseMatrix covs;
  if (model.net.covariate_dim > 0) {
    covs = model.covariate_std.apply(test_covariates_raw);
  }
  const std::size_t nj = outcomes.size();
  result.means = DenseMatrix(inputs.rows, nj);
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    std::span<const double> cov;
    if (model.net.covariate_dim) {
      cov = std::span<const double>(covs.row(i), model.net.covariate_dim);
    }
    const auto eta = forward_deterministic(
        model.params, model.net,
        std::span<const double>(inputs.row(i), model.net.input_dim), cov);
    for (std::size_t j = 0; j < nj; ++j) {
      double v = eta[j];
      switch (outcomes[j].kind) {
        case OutcomeKind::kBinary: v = 1.0 / (1.0 + std::exp(-v)); break;
        case OutcomeKind::kCount: v = std::exp(v); break;
        case OutcomeKind::kContinuous: break;
      }
      result.means(i, j) = v;
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace mdgp
