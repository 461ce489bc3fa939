#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mdgp/numerics.hpp"
#include "mdgp/rng.hpp"

namespace mdgp {

/// A spatial location: 1-d or 2-d coordinates in the unit domain for
/// simulated data, longitude/latitude degrees for ingested data. Distances
/// are planar Euclidean throughout (documented limitation for degree inputs).
struct Location {
  std::vector<double> coords;
};

enum class OutcomeKind { kBinary, kCount, kContinuous };

/// Canonical kind/link pairings: binary/logit, count/log, continuous/identity.
struct OutcomeSpec {
  std::string name;
  OutcomeKind kind = OutcomeKind::kContinuous;
};

const char* kind_name(OutcomeKind k);
const char* link_name(OutcomeKind k);
OutcomeKind kind_from_name(const std::string& s);

/// Locations plus a per-outcome response table with per-cell missingness.
/// Binary cells hold 0/1; count cells hold nonnegative integers stored as
/// doubles. `features` carries exogenous covariates aligned with locations
/// (concatenated at the network's final layer when present). `latent` is a
/// diagnostics-only side channel of the generating latent value per row —
/// written by the simulators, never exposed to any model.
struct Dataset {
  std::vector<Location> locations;
  std::vector<OutcomeSpec> outcomes;
  std::vector<std::optional<double>> responses;  // row-major, n x J
  DenseMatrix features;                          // n x covariate_dim (may be 0)
  std::vector<std::string> feature_names;
  std::vector<double> latent;  // empty or length n

  std::size_t n() const { return locations.size(); }
  std::size_t n_outcomes() const { return outcomes.size(); }
  std::size_t coord_dim() const {
    return locations.empty() ? 0 : locations[0].coords.size();
  }
  std::optional<double>& response(std::size_t i, std::size_t j) {
    return responses[i * outcomes.size() + j];
  }
  const std::optional<double>& response(std::size_t i, std::size_t j) const {
    return responses[i * outcomes.size() + j];
  }
  void validate() const;  // throws std::invalid_argument on broken invariants
};

/// One-dimensional stationary GP generator settings. Defaults reproduce the
/// reference configuration: latent z(s) = mu + nu(s) + eps(s) on n equally
/// spaced sites in [0,1], exponential covariance nu, Gaussian nugget eps.
struct Case1Config {
  std::size_t n = 1000;
  double mu = 1.0;
  double sigma2 = 1.0;
  double rho = 0.1;
  double tau2 = 0.01;
  double c = 1.0;       // logistic centering
  double kappa = 0.35;  // logistic steepness
  double alpha = -0.25; // count intercept
  double beta = 0.60;   // count slope on the latent
  std::size_t train_count = 800;
  void validate() const;
};

/// Two-dimensional nonstationary surface generator settings.
struct Case2Config {
  std::size_t n = 900;
  double alpha = 0.5;
  double beta = 3.0;
  double sigma2 = 0.25;
  double train_frac = 0.8;
  bool grid_locations = false;  // visualization option; default is uniform draws
  void validate() const;
};

/// Candidate knot set from a regular lattice, possibly masked.
struct KnotSet {
  std::vector<Location> knots;
  std::vector<std::size_t> grid_dims;          // generating lattice dims
  std::vector<std::pair<double, double>> bbox; // per-axis (min, max)
};

/// The shared nonstationary test surface of the 2-d generator,
/// evaluated at sbar = (s_x + s_y) / 2.
double case2_surface(double sbar);

Dataset simulate_case1(const Case1Config& config, RngStream& rng);
Dataset simulate_case2(const Case2Config& config, RngStream& rng);

/// Uniform random partition without replacement; deterministic given rng.
std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t train_count,
                                  RngStream& rng);
std::pair<Dataset, Dataset> split_frac(const Dataset& data, double train_frac,
                                       RngStream& rng);

/// rows x cols lattice spanning bbox inclusive of the edges; knots failing
/// the mask predicate are removed. Throws if nothing survives.
KnotSet knot_lattice(const std::vector<std::pair<double, double>>& bbox,
                     const std::vector<std::size_t>& grid,
                     const std::function<bool(const Location&)>& mask = {});

/// Thin-plate-spline radial features: entry (i,j) = r^2 log r at
/// r = ||location_i - knot_j||, with the r = 0 entry set to its limit 0.
DenseMatrix tps_features(const std::vector<Location>& locations,
                         const KnotSet& knots);

/// CSV ingestion. Header row mandatory; UTF-8; '.' decimal separator;
/// empty field = missing. Binary/count cells are validated against the
/// schema. covariate_columns become Dataset::features.
Dataset read_csv_dataset(const std::string& path,
                         const std::vector<OutcomeSpec>& schema,
                         const std::vector<std::string>& coord_columns,
                         const std::vector<std::string>& covariate_columns = {});

/// Dataset -> CSV (coords, outcome columns, covariate columns). The optional
/// header_comment is emitted as a leading '#' line.
void write_csv_dataset(const Dataset& data, const std::string& path,
                       const std::string& header_comment = "");

/// KnotSet -> CSV, one knot per row.
void write_csv_knots(const KnotSet& knots, const std::string& path);

}  // namespace mdgp
