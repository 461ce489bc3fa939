#pragma once

#include <cstdint>
#include <vector>

#include "mdgp/numerics.hpp"

namespace mdgp {

/// Counter-based deterministic random stream. A stream is fully identified by
/// (seed, stream-id): the n-th draw is a pure function of (seed, stream-id, n),
/// so sequences are reproducible across platforms and independent of thread
/// scheduling. Distinct stream-ids give statistically independent streams.
///
/// Every variate consumes a fixed number of uniforms (normals go through the
/// inverse CDF, never Box-Muller), which keeps draw counts deterministic.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  /// Uniform draw strictly inside (0,1), 53 significant bits.
  double uniform();

  /// Standard normal via the AS241 inverse CDF (one uniform per variate).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson draw by CDF inversion; exact for all lambda (large means are
  /// split recursively so the running product never underflows). One uniform
  /// per inversion step of the recursion.
  long poisson(double lambda);

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Child stream derived from this stream's identity and the given key.
  /// Children are independent of the parent and of each other.
  RngStream split(std::uint64_t key) const;

  /// Stable 64-bit combiner, used to derive stream-ids such as
  /// hash2(replicate, stage).
  static std::uint64_t hash2(std::uint64_t a, std::uint64_t b);

  std::uint64_t stream_id() const { return stream_id_; }

 private:
  RngStream(std::uint64_t key, std::uint64_t stream_id, int);
  std::uint64_t key_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

/// Inverse standard normal CDF (Wichura's AS241, double precision).
/// Requires p in (0,1).
double inv_normal_cdf(double p);

/// mean + L·z with z i.i.d. standard normal drawn from rng.
/// chol_lower is the lower Cholesky factor of the target covariance.
std::vector<double> mvn_sample(const std::vector<double>& mean,
                               const DenseMatrix& chol_lower, RngStream& rng);

}  // namespace mdgp
