#include "mdgp/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mdgp {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer; full avalanche on 64 bits.
std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

std::uint64_t RngStream::hash2(std::uint64_t a, std::uint64_t b) {
  return mix64(a + kGamma + mix64(b + kGamma));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_(hash2(seed, stream_id)), stream_id_(stream_id) {}

RngStream::RngStream(std::uint64_t key, std::uint64_t stream_id, int)
    : key_(key), stream_id_(stream_id) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RngStream::uniform() {
  const std::uint64_t bits = next_u64() >> 11;  // 53 bits
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return inv_normal_cdf(uniform()); }

long RngStream::poisson(double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw std::invalid_argument("poisson: lambda must be finite, nonnegative");
  }
  if (lambda == 0.0) return 0;
  if (lambda > 60.0) {
    const double half = lambda / 2.0;
    return poisson(half) + poisson(lambda - half);
  }
  const double u = uniform();
  double p = std::exp(-lambda);
  double cdf = p;
  long k = 0;
  const long cap = static_cast<long>(lambda + 40.0 * std::sqrt(lambda) + 100.0);
  while (u > cdf && k < cap) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  // Rejection keeps the distribution exact; iterations are part of the
  // stream's deterministic draw sequence.
  const std::uint64_t limit = n * (~0ULL / n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

RngStream RngStream::split(std::uint64_t key) const {
  const std::uint64_t child_id = hash2(stream_id_, key);
  return RngStream(hash2(key_, key + kGamma), child_id, 0);
}

double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("inv_normal_cdf: p outside (0,1)");
  }
  // Wichura (1988), algorithm AS 241, routine PPND16.
  static const double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2,
      1.9715909503065514427e3,  1.3731693765509461125e4,
      4.5921953931549871457e4,  6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static const double b[8] = {
      1.0,                      4.2313330701600911252e1,
      6.8718700749205790830e2,  5.3941960214247511077e3,
      2.1213794301586595867e4,  3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static const double c[8] = {
      1.42343711074968357734e0,  4.63033784615654529590e0,
      5.76949722146069140550e0,  3.64784832476320460504e0,
      1.27045825245236838258e0,  2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0,                       2.05319162663775882187e0,
      1.67638483018380384940e0,  6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0,  5.46378491116411436990e0,
      1.78482653991729133580e0,  2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0,                       5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  auto ratio = [](const double* num, const double* den, double r) {
    double n = num[7];
    double m = den[7];
    for (int i = 6; i >= 0; --i) {
      n = n * r + num[i];
      m = m * r + den[i];
    }
    return n / m;
  };

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * ratio(a, b, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    val = ratio(c, d, r - 1.6);
  } else {
    val = ratio(e, f, r - 5.0);
  }
  return (q < 0.0) ? -val : val;
}

std::vector<double> mvn_sample(const std::vector<double>& mean,
                               const DenseMatrix& chol_lower, RngStream& rng) {
  const std::size_t n = mean.size();
  if (chol_lower.rows != n || chol_lower.cols != n) {
    throw std::invalid_argument("mvn_sample: dimension mismatch");
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  std::vector<double> out(mean);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = chol_lower.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += li[j] * z[j];
    out[i] += s;
  }
  return out;
}

}  // namespace mdgp
