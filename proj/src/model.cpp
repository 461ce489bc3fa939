#include "mdgp/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mdgp/errors.hpp"

namespace mdgp {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// Derivative in terms of the pre-activation.
double activate_deriv(Activation a, double pre) {
  switch (a) {
    case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + s);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

void NetworkConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("NetworkConfig: input_dim");
  if (keep_hidden.size() != hidden_widths.size()) {
    throw std::invalid_argument("NetworkConfig: keep_hidden length");
  }
  if (heads.empty()) throw std::invalid_argument("NetworkConfig: no heads");
  if (keep_heads.size() != heads.size()) {
    throw std::invalid_argument("NetworkConfig: keep_heads length");
  }
  for (double p : keep_hidden) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw std::invalid_argument("NetworkConfig: keep_prob outside (0,1]");
    }
  }
  for (double p : keep_heads) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw std::invalid_argument("NetworkConfig: keep_prob outside (0,1]");
    }
  }
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("NetworkConfig: zero width");
  }
  if (n_train == 0) throw std::invalid_argument("NetworkConfig: n_train >= 1");
}

Params Params::zeros_like(const NetworkConfig& config) {
  Params p;
  std::size_t prev = config.input_dim;
  for (std::size_t w : config.hidden_widths) {
    LayerParams layer;
    layer.w = DenseMatrix(w, prev);
    layer.b.assign(w, 0.0);
    p.hidden.push_back(std::move(layer));
    prev = w;
  }
  for (std::size_t j = 0; j < config.heads.size(); ++j) {
    HeadParams head;
    head.w.assign(config.head_input_dim(), 0.0);
    p.heads.push_back(std::move(head));
  }
  return p;
}

bool Params::all_finite() const {
  bool ok = true;
  for (const auto& layer : hidden) {
    ok = ok && layer.w.all_finite();
    for (double v : layer.b) ok = ok && std::isfinite(v);
  }
  for (const auto& head : heads) {
    for (double v : head.w) ok = ok && std::isfinite(v);
    ok = ok && std::isfinite(head.b);
  }
  return ok;
}

MaskSet MaskSet::all_ones(const NetworkConfig& config) {
  MaskSet m;
  for (std::size_t w : config.hidden_widths) {
    m.hidden.emplace_back(w, 1.0);
  }
  for (std::size_t j = 0; j < config.heads.size(); ++j) {
    m.heads.emplace_back(config.shared_dim(), 1.0);
  }
  return m;
}

MaskSet sample_masks(const NetworkConfig& config, RngStream& rng) {
  if (config.keep_hidden.size() != config.hidden_widths.size() ||
      config.keep_heads.size() != config.heads.size()) {
    throw std::invalid_argument("sample_masks: keep_prob lengths mismatch");
  }
  MaskSet m;
  for (std::size_t l = 0; l < config.n_hidden(); ++l) {
    std::vector<double> mask(config.hidden_widths[l]);
    for (double& v : mask) {
      v = rng.bernoulli(config.keep_hidden[l]) ? 1.0 : 0.0;
    }
    m.hidden.push_back(std::move(mask));
  }
  for (std::size_t j = 0; j < config.heads.size(); ++j) {
    std::vector<double> mask(config.shared_dim());
    for (double& v : mask) {
      v = rng.bernoulli(config.keep_heads[j]) ? 1.0 : 0.0;
    }
    m.heads.push_back(std::move(mask));
  }
  return m;
}

void forward_into(const Params& params, const MaskSet& masks,
                  const double* input, const double* covariates,
                  const NetworkConfig& config, ForwardTrace& trace) {
  const std::size_t nh = config.n_hidden();
  trace.pre.resize(nh);
  trace.post.resize(nh);

  const double* prev = input;
  std::size_t prev_dim = config.input_dim;
  for (std::size_t l = 0; l < nh; ++l) {
    const auto& layer = params.hidden[l];
    const std::size_t width = config.hidden_widths[l];
    trace.pre[l].resize(width);
    trace.post[l].resize(width);
    const auto& mask = masks.hidden[l];
    for (std::size_t k = 0; k < width; ++k) {
      const double* wr = layer.w.row(k);
      double s = layer.b[k];
      for (std::size_t i = 0; i < prev_dim; ++i) s += wr[i] * prev[i];
      trace.pre[l][k] = s;
      trace.post[l][k] = activate(config.hidden_activation, s) * mask[k];
    }
    prev = trace.post[l].data();
    prev_dim = width;
  }

  trace.shared.assign(prev, prev + prev_dim);

  const std::size_t sd = config.shared_dim();
  trace.eta.resize(config.heads.size());
  for (std::size_t j = 0; j < config.heads.size(); ++j) {
    const auto& head = params.heads[j];
    const auto& hmask = masks.heads[j];
    double s = head.b;
    for (std::size_t k = 0; k < sd; ++k) {
      s += head.w[k] * (hmask[k] * trace.shared[k]);
    }
    for (std::size_t c = 0; c < config.covariate_dim; ++c) {
      s += head.w[sd + c] * covariates[c];
    }
    if (!std::isfinite(s)) {
      throw DivergenceError("forward: non-finite head output");
    }
    trace.eta[j] = s;
  }
}

ForwardTrace forward(const Params& params, const MaskSet& masks,
                     std::span<const double> input,
                     std::span<const double> covariates,
                     const NetworkConfig& config) {
  if (input.size() != config.input_dim) {
    throw std::invalid_argument("forward: input length != input_dim");
  }
  if (covariates.size() != config.covariate_dim) {
    throw std::invalid_argument("forward: covariate length mismatch");
  }
  ForwardTrace trace;
  forward_into(params, masks, input.data(),
               covariates.empty() ? nullptr : covariates.data(), config,
               trace);
  return trace;
}

std::vector<double> forward_deterministic(const Params& params,
                                          const NetworkConfig& config,
                                          std::span<const double> input,
                                          std::span<const double> covariates) {
  const std::size_t nh = config.n_hidden();
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < nh; ++l) {
    const auto& layer = params.hidden[l];
    const std::size_t width = config.hidden_widths[l];
    next.resize(width);
    const double keep = config.keep_hidden[l];
    for (std::size_t k = 0; k < width; ++k) {
      const double* wr = layer.w.row(k);
      double s = layer.b[k];
      for (std::size_t i = 0; i < cur.size(); ++i) s += wr[i] * cur[i];
      next[k] = activate(config.hidden_activation, s) * keep;
    }
    cur.swap(next);
  }
  const std::size_t sd = config.shared_dim();
  std::vector<double> eta(config.heads.size());
  for (std::size_t j = 0; j < config.heads.size(); ++j) {
    const auto& head = params.heads[j];
    const double keep = config.keep_heads[j];
    double s = head.b;
    for (std::size_t k = 0; k < sd; ++k) s += head.w[k] * (keep * cur[k]);
    for (std::size_t c = 0; c < config.covariate_dim; ++c) {
      s += head.w[sd + c] * covariates[c];
    }
    eta[j] = s;
  }
  return eta;
}

Params apply_masks(const Params& params, const MaskSet& masks,
                   const NetworkConfig& config) {
  Params out = params;
  for (std::size_t l = 0; l < out.hidden.size(); ++l) {
    auto& layer = out.hidden[l];
    for (std::size_t k = 0; k < layer.b.size(); ++k) {
      if (masks.hidden[l][k] == 0.0) {
        double* wr = layer.w.row(k);
        for (std::size_t i = 0; i < layer.w.cols; ++i) wr[i] = 0.0;
        layer.b[k] = 0.0;
      }
    }
  }
  const std::size_t sd = config.shared_dim();
  for (std::size_t j = 0; j < out.heads.size(); ++j) {
    for (std::size_t k = 0; k < sd; ++k) {
      if (masks.heads[j][k] == 0.0) out.heads[j].w[k] = 0.0;
    }
  }
  return out;
}

double nll_cell(double eta, double y, OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::kBinary:
      return softplus(eta) - y * eta;
    case OutcomeKind::kCount:
      if (y < 0.0 || y != std::floor(y)) {
        throw std::invalid_argument(
            "nll: count response must be a nonnegative integer");
      }
      return std::exp(eta) - y * eta + std::lgamma(y + 1.0);
    case OutcomeKind::kContinuous:
      // Unit variance during training; sigma2 is estimated post fit.
      return 0.5 * (y - eta) * (y - eta) + kHalfLog2Pi;
  }
  return 0.0;
}

double nll(std::span<const double> eta,
           std::span<const std::optional<double>> y,
           std::span<const OutcomeSpec> specs) {
  double total = 0.0;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    if (y[j]) total += nll_cell(eta[j], *y[j], specs[j].kind);
  }
  return total;
}

namespace {

double penalty(const Params& params, const NetworkConfig& config) {
  const double inv2n = 1.0 / (2.0 * static_cast<double>(config.n_train));
  double total = 0.0;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const double lambda = config.keep_hidden[l] * inv2n;
    double sq = 0.0;
    for (double v : params.hidden[l].w.entries) sq += v * v;
    for (double v : params.hidden[l].b) sq += v * v;
    total += lambda * sq;
  }
  for (std::size_t j = 0; j < params.heads.size(); ++j) {
    const double lambda = config.keep_heads[j] * inv2n;
    double sq = params.heads[j].b * params.heads[j].b;
    for (double v : params.heads[j].w) sq += v * v;
    total += lambda * sq;
  }
  return total;
}

void add_penalty_grad(const Params& params, const NetworkConfig& config,
                      Params& g) {
  const double inv2n = 1.0 / (2.0 * static_cast<double>(config.n_train));
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const double two_lambda = 2.0 * config.keep_hidden[l] * inv2n;
    for (std::size_t k = 0; k < params.hidden[l].w.entries.size(); ++k) {
      g.hidden[l].w.entries[k] += two_lambda * params.hidden[l].w.entries[k];
    }
    for (std::size_t k = 0; k < params.hidden[l].b.size(); ++k) {
      g.hidden[l].b[k] += two_lambda * params.hidden[l].b[k];
    }
  }
  for (std::size_t j = 0; j < params.heads.size(); ++j) {
    const double two_lambda = 2.0 * config.keep_heads[j] * inv2n;
    for (std::size_t k = 0; k < params.heads[j].w.size(); ++k) {
      g.heads[j].w[k] += two_lambda * params.heads[j].w[k];
    }
    g.heads[j].b += two_lambda * params.heads[j].b;
  }
}

}  // namespace

double loss(const Params& params, const MaskSet& masks,
            const TrainingData& data, std::span<const std::size_t> rows,
            const NetworkConfig& config) {
  if (rows.empty()) throw std::invalid_argument("loss: empty batch");
  ForwardTrace trace;
  double total = 0.0;
  for (std::size_t r : rows) {
    forward_into(params, masks, data.inputs.row(r),
                 config.covariate_dim ? data.covariates.row(r) : nullptr,
                 config, trace);
    for (std::size_t j = 0; j < data.outcomes.size(); ++j) {
      const auto& cell = data.y(r, j);
      if (cell) total += nll_cell(trace.eta[j], *cell, data.outcomes[j].kind);
    }
  }
  const double scale = static_cast<double>(config.n_train) /
                       static_cast<double>(rows.size());
  return scale * total + penalty(params, config);
}

double loss_and_grad(const Params& params, const MaskSet& masks,
                     const TrainingData& data,
                     std::span<const std::size_t> rows,
                     const NetworkConfig& config, Params& out_grad) {
  if (rows.empty()) throw std::invalid_argument("grad: empty batch");
  out_grad = Params::zeros_like(config);

  const std::size_t nh = config.n_hidden();
  const std::size_t sd = config.shared_dim();
  ForwardTrace trace;
  std::vector<double> dshared(sd);
  std::vector<std::vector<double>> dpre(nh);
  for (std::size_t l = 0; l < nh; ++l) dpre[l].resize(config.hidden_widths[l]);

  double total = 0.0;
  for (std::size_t r : rows) {
    const double* input = data.inputs.row(r);
    const double* cov =
        config.covariate_dim ? data.covariates.row(r) : nullptr;
    forward_into(params, masks, input, cov, config, trace);

    std::fill(dshared.begin(), dshared.end(), 0.0);
    for (std::size_t j = 0; j < data.outcomes.size(); ++j) {
      const auto& cell = data.y(r, j);
      if (!cell) continue;
      const double y = *cell;
      const double eta = trace.eta[j];
      total += nll_cell(eta, y, data.outcomes[j].kind);
      double deta = 0.0;
      switch (data.outcomes[j].kind) {
        case OutcomeKind::kBinary: deta = sigmoid(eta) - y; break;
        case OutcomeKind::kCount: deta = std::exp(eta) - y; break;
        case OutcomeKind::kContinuous: deta = eta - y; break;
      }
      auto& ghead = out_grad.heads[j];
      const auto& head = params.heads[j];
      const auto& hmask = masks.heads[j];
      for (std::size_t k = 0; k < sd; ++k) {
        const double masked_h = hmask[k] * trace.shared[k];
        ghead.w[k] += deta * masked_h;
        dshared[k] += deta * head.w[k] * hmask[k];
      }
      for (std::size_t c = 0; c < config.covariate_dim; ++c) {
        ghead.w[sd + c] += deta * cov[c];
      }
      ghead.b += deta;
    }

    // Backprop through the hidden stack; masked-out units get zero gradient.
    const double* dpost = dshared.data();
    for (std::size_t l = nh; l-- > 0;) {
      const auto& layer = params.hidden[l];
      const auto& mask = masks.hidden[l];
      auto& dp = dpre[l];
      const std::size_t width = config.hidden_widths[l];
      for (std::size_t k = 0; k < width; ++k) {
        dp[k] = dpost[k] * mask[k] *
                activate_deriv(config.hidden_activation, trace.pre[l][k]);
      }
      const double* below = (l == 0) ? input : trace.post[l - 1].data();
      const std::size_t below_dim =
          (l == 0) ? config.input_dim : config.hidden_widths[l - 1];
      auto& glayer = out_grad.hidden[l];
      for (std::size_t k = 0; k < width; ++k) {
        const double dk = dp[k];
        if (dk == 0.0) continue;
        double* gw = glayer.w.row(k);
        for (std::size_t i = 0; i < below_dim; ++i) gw[i] += dk * below[i];
        glayer.b[k] += dk;
      }
      if (l > 0) {
        // dphi_{l-1} = W_l^T dpre_l, written into dpre[l-1] which doubles
        // as the next iteration's dpost buffer (element-wise transform is
        // alias-safe).
        auto& dprev = dpre[l - 1];
        std::fill(dprev.begin(), dprev.end(), 0.0);
        for (std::size_t k = 0; k < width; ++k) {
          const double dk = dp[k];
          if (dk == 0.0) continue;
          const double* wr = layer.w.row(k);
          for (std::size_t i = 0; i < below_dim; ++i) dprev[i] += dk * wr[i];
        }
        dpost = dprev.data();
      }
    }
  }

  const double scale = static_cast<double>(config.n_train) /
                       static_cast<double>(rows.size());
  for_each_param(out_grad, [scale](double& v) { v *= scale; });
  add_penalty_grad(params, config, out_grad);
  return scale * total + penalty(params, config);
}

Params grad(const Params& params, const MaskSet& masks,
            const TrainingData& data, std::span<const std::size_t> rows,
            const NetworkConfig& config) {
  Params g;
  loss_and_grad(params, masks, data, rows, config, g);
  return g;
}

std::vector<double> estimate_sigma2(const Params& params,
                                    const NetworkConfig& config,
                                    const TrainingData& train) {
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> cont_heads;
  for (std::size_t j = 0; j < config.heads.size(); ++j) {
    if (config.heads[j].kind == OutcomeKind::kContinuous) {
      cont_heads.push_back(j);
      sums.push_back(0.0);
      counts.push_back(0);
    }
  }
  for (std::size_t i = 0; i < train.n(); ++i) {
    std::span<const double> cov;
    if (config.covariate_dim) {
      cov = std::span<const double>(train.covariates.row(i),
                                    config.covariate_dim);
    }
    const auto eta = forward_deterministic(
        params, config,
        std::span<const double>(train.inputs.row(i), config.input_dim), cov);
    for (std::size_t k = 0; k < cont_heads.size(); ++k) {
      const auto& cell = train.y(i, cont_heads[k]);
      if (!cell) continue;
      const double r = *cell - eta[cont_heads[k]];
      sums[k] += r * r;
      counts[k] += 1;
    }
  }
  std::vector<double> sigma2(cont_heads.size());
  for (std::size_t k = 0; k < cont_heads.size(); ++k) {
    if (counts[k] < 2) {
      throw std::invalid_argument(
          "estimate_sigma2: need >= 2 observed cells per continuous outcome");
    }
    sigma2[k] = sums[k] / static_cast<double>(counts[k]);
  }
  return sigma2;
}

DenseMatrix layer_kernel(const DenseMatrix& phi_prev, const DenseMatrix& w,
                         const std::vector<double>& b, Activation activation,
                         std::size_t width) {
  if (w.cols != phi_prev.cols || b.size() != w.rows || width == 0) {
    throw std::invalid_argument("layer_kernel: shape mismatch");
  }
  const std::size_t n = phi_prev.rows;
  DenseMatrix act(n, w.rows);
  for (std::size_t i = 0; i < n; ++i) {
    const double* pi = phi_prev.row(i);
    for (std::size_t k = 0; k < w.rows; ++k) {
      const double* wr = w.row(k);
      double s = b[k];
      for (std::size_t c = 0; c < w.cols; ++c) s += wr[c] * pi[c];
      act(i, k) = activate(activation, s);
    }
  }
  DenseMatrix kernel(n, n);
  const double inv_width = 1.0 / static_cast<double>(width);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      const double* ai = act.row(i);
      const double* aj = act.row(j);
      for (std::size_t k = 0; k < w.rows; ++k) s += ai[k] * aj[k];
      kernel(i, j) = kernel(j, i) = s * inv_width;
    }
  }
  return kernel;
}

Standardizer Standardizer::fit(const DenseMatrix& x) {
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.sd.assign(x.cols, 1.0);
  if (x.rows == 0) return s;
  for (std::size_t c = 0; c < x.cols; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) m += x(i, c);
    m /= static_cast<double>(x.rows);
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double d = x(i, c) - m;
      v += d * d;
    }
    v /= static_cast<double>(x.rows);
    s.mean[c] = m;
    const double sd = std::sqrt(v);
    s.sd[c] = sd < 1e-12 ? 1.0 : sd;
  }
  return s;
}

DenseMatrix Standardizer::apply(const DenseMatrix& x) const {
  if (x.cols != mean.size()) {
    throw std::invalid_argument("Standardizer: column count mismatch");
  }
  DenseMatrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* r = out.row(i);
    for (std::size_t c = 0; c < x.cols; ++c) r[c] = (r[c] - mean[c]) / sd[c];
  }
  return out;
}

std::vector<double> Standardizer::apply_row(std::span<const double> row) const {
  if (row.size() != mean.size()) {
    throw std::invalid_argument("Standardizer: row length mismatch");
  }
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    out[c] = (row[c] - mean[c]) / sd[c];
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'D', 'G', 'P', 'C', 'K', 'P', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}
void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}
void put_f64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    take(&v, 8);
    return v;
  }
  double f64() {
    double v;
    take(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    check(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) { take(dst, n); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void check(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error("checkpoint: truncated file");
    }
  }
  void take(void* dst, std::size_t n) {
    check(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

void put_standardizer(std::string& out, const Standardizer& s) {
  put_u32(out, static_cast<std::uint32_t>(s.mean.size()));
  for (double v : s.mean) put_f64(out, v);
  for (double v : s.sd) put_f64(out, v);
}

Standardizer read_standardizer(Reader& r) {
  Standardizer s;
  const std::uint32_t n = r.u32();
  s.mean.resize(n);
  s.sd.resize(n);
  for (auto& v : s.mean) v = r.f64();
  for (auto& v : s.sd) v = r.f64();
  return s;
}

}  // namespace

void save_checkpoint(const FittedModel& model, const std::string& path) {
  std::string out;
  out.append(kMagic, 8);
  put_u64(out, model.config_hash);

  const auto& net = model.net;
  put_u32(out, static_cast<std::uint32_t>(net.input_dim));
  put_u32(out, static_cast<std::uint32_t>(net.covariate_dim));
  put_u64(out, net.n_train);
  out.push_back(static_cast<char>(net.hidden_activation));
  put_u32(out, static_cast<std::uint32_t>(net.hidden_widths.size()));
  for (std::size_t w : net.hidden_widths) {
    put_u32(out, static_cast<std::uint32_t>(w));
  }
  for (double p : net.keep_hidden) put_f64(out, p);
  put_u32(out, static_cast<std::uint32_t>(net.heads.size()));
  for (std::size_t j = 0; j < net.heads.size(); ++j) {
    put_str(out, net.heads[j].name);
    out.push_back(static_cast<char>(net.heads[j].kind));
    put_f64(out, net.keep_heads[j]);
  }

  put_standardizer(out, model.input_std);
  put_standardizer(out, model.covariate_std);

  for (const auto& layer : model.params.hidden) {
    for (double v : layer.w.entries) put_f64(out, v);
    for (double v : layer.b) put_f64(out, v);
  }
  for (const auto& head : model.params.heads) {
    for (double v : head.w) put_f64(out, v);
    put_f64(out, head.b);
  }

  put_u32(out, static_cast<std::uint32_t>(model.sigma2.size()));
  for (double v : model.sigma2) put_f64(out, v);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

FittedModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));

  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic / unsupported version");
  }

  FittedModel model;
  model.config_hash = r.u64();
  auto& net = model.net;
  net.input_dim = r.u32();
  net.covariate_dim = r.u32();
  net.n_train = r.u64();
  char act;
  r.raw(&act, 1);
  net.hidden_activation = static_cast<Activation>(act);
  const std::uint32_t nh = r.u32();
  net.hidden_widths.resize(nh);
  for (auto& w : net.hidden_widths) w = r.u32();
  net.keep_hidden.resize(nh);
  for (auto& p : net.keep_hidden) p = r.f64();
  const std::uint32_t nheads = r.u32();
  net.heads.resize(nheads);
  net.keep_heads.resize(nheads);
  for (std::uint32_t j = 0; j < nheads; ++j) {
    net.heads[j].name = r.str();
    char kind;
    r.raw(&kind, 1);
    net.heads[j].kind = static_cast<OutcomeKind>(kind);
    net.keep_heads[j] = r.f64();
  }

  model.input_std = read_standardizer(r);
  model.covariate_std = read_standardizer(r);

  model.params = Params::zeros_like(net);
  for (auto& layer : model.params.hidden) {
    for (double& v : layer.w.entries) v = r.f64();
    for (double& v : layer.b) v = r.f64();
  }
  for (auto& head : model.params.heads) {
    for (double& v : head.w) v = r.f64();
    head.b = r.f64();
  }

  const std::uint32_t ns = r.u32();
  model.sigma2.resize(ns);
  for (double& v : model.sigma2) v = r.f64();
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return model;
}

}  // namespace mdgp
