#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "dc2ac/hash.hpp"
#include "dc2ac/nnet.hpp"
#include "binio.hpp"
#include "json.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;
using json = nlohmann::json;

constexpr char kMagic[8] = {'D', 'C', '2', 'A', 'C', 'N', 'N', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPrefix = 8 + 4 + 4 + 8;
constexpr std::size_t kDigest = 32;

// log(1 + e^{-x}) for x ≥ 0
double log1p_exp_neg(double x) { return std::log1p(std::exp(-x)); }

}  // namespace

double softplus(double x) { return x > 0.0 ? x + log1p_exp_neg(x) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BoundedValue bounded_output(double z, double l, double u) {
  const bool has_l = std::isfinite(l), has_u = std::isfinite(u);
  if (!has_l && !has_u) return {z, 1.0};
  if (!has_u) return {l + softplus(z - l), sigmoid(z - l)};
  if (!has_l) return {u - softplus(u - z), sigmoid(u - z)};
  const double a = z - l, b = z - u;
  double y, dy;
  if (b > 0.0) {
    // both arguments positive: write in terms of the complements
    y = u - (log1p_exp_neg(b) - log1p_exp_neg(a));
    dy = sigmoid(-b) - sigmoid(-a);
  } else {
    y = l + (softplus(a) - softplus(b));
    dy = sigmoid(a) - sigmoid(b);
  }
  return {std::clamp(y, l, u), dy};
}

double bounded_inverse(double y, double l, double u) {
  if (!(y > l && y < u)) throw std::invalid_argument("bounded_inverse: target outside (l, u)");
  if (!std::isfinite(l) && !std::isfinite(u)) return y;
  double lo = y - 1.0, hi = y + 1.0;
  for (double step = 1.0; bounded_output(lo, l, u).y >= y; step *= 2.0) lo -= step;
  for (double step = 1.0; bounded_output(hi, l, u).y <= y; step *= 2.0) hi += step;
  double z = std::clamp(y, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const BoundedValue f = bounded_output(z, l, u);
    const double r = f.y - y;
    if (r == 0.0) break;
    (r > 0.0 ? hi : lo) = z;
    double next = f.dy > 0.0 ? z - r / f.dy : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - z) <= 1e-15 * std::max(1.0, std::abs(z))) {
      z = next;
      break;
    }
    z = next;
  }
  return z;
}

// -- Mlp --

Mlp::Mlp(Index inputs, const std::vector<Index>& hidden, const Vec& lower, const Vec& upper, std::uint64_t seed)
    : lower_(lower), upper_(upper) {
  if (inputs <= 0 || lower.size() == 0 || lower.size() != upper.size()) {
    throw std::invalid_argument("Mlp: input and output sizes must be positive and bounds must agree");
  }
  for (Index k = 0; k < lower.size(); ++k) {
    if (!(lower[k] < upper[k])) throw std::invalid_argument("Mlp: output bounds need l < u");
  }
  sizes_.push_back(inputs);
  for (Index h : hidden) {
    if (h <= 0) throw std::invalid_argument("Mlp: hidden widths must be positive");
    sizes_.push_back(h);
  }
  sizes_.push_back(lower.size());
  Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * (sizes_[l] + 1);
  }
  params_.resize(total);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double k = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-k, k);
    const Index count = sizes_[l + 1] * (sizes_[l] + 1);
    for (Index p = 0; p < count; ++p) params_[offset(l) + p] = dist(rng);
  }
}

void Mlp::set_params(const Vec& p) {
  if (p.size() != params_.size()) throw std::invalid_argument("Mlp::set_params: size mismatch");
  if (!p.allFinite()) throw std::invalid_argument("Mlp::set_params: non-finite parameter");
  params_ = p;
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t layer) {
  return {params_.data() + offset(layer), sizes_[layer + 1], sizes_[layer]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t layer) const {
  return {params_.data() + offset(layer), sizes_[layer + 1], sizes_[layer]};
}
Eigen::Map<Vec> Mlp::bias(std::size_t layer) {
  return {params_.data() + offset(layer) + sizes_[layer + 1] * sizes_[layer], sizes_[layer + 1]};
}
Eigen::Map<const Vec> Mlp::bias(std::size_t layer) const {
  return {params_.data() + offset(layer) + sizes_[layer + 1] * sizes_[layer], sizes_[layer + 1]};
}

void Mlp::set_output_target(const Vec& y) {
  if (y.size() != outputs()) throw std::invalid_argument("Mlp::set_output_target: size mismatch");
  auto b = bias(num_layers() - 1);
  for (Index k = 0; k < y.size(); ++k) b[k] = bounded_inverse(y[k], lower_[k], upper_[k]);
}

Vec Mlp::forward(const Vec& x) const {
  Cache cache;
  return forward(x, cache);
}

Vec Mlp::forward(const Vec& x, Cache& cache) const {
  if (x.size() != inputs()) {
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(inputs()));
  }
  const std::size_t hidden = num_layers() - 1;
  cache.input = x;
  cache.pre.resize(hidden);
  cache.post.resize(hidden);
  const Vec* h = &cache.input;
  for (std::size_t l = 0; l < hidden; ++l) {
    cache.pre[l] = weight(l) * *h + bias(l);
    cache.post[l] = cache.pre[l].unaryExpr([](double a) { return softplus(a); });
    h = &cache.post[l];
  }
  cache.z = weight(hidden) * *h + bias(hidden);
  cache.y.resize(outputs());
  for (Index k = 0; k < outputs(); ++k) cache.y[k] = bounded_output(cache.z[k], lower_[k], upper_[k]).y;
  return cache.y;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd Y(X.rows(), outputs());
  Cache cache;
  for (Index r = 0; r < X.rows(); ++r) Y.row(r) = forward(X.row(r).transpose(), cache).transpose();
  return Y;
}

Vec Mlp::backward(const Cache& cache, const Vec& dl_dy, Vec* dl_dx) const {
  const std::size_t hidden = num_layers() - 1;
  if (cache.input.size() != inputs() || cache.pre.size() != hidden || cache.z.size() != outputs() ||
      dl_dy.size() != outputs()) {
    throw std::invalid_argument("Mlp::backward: cache or cotangent does not match the network");
  }
  for (std::size_t l = 0; l < hidden; ++l) {
    if (cache.pre[l].size() != sizes_[l + 1]) throw std::invalid_argument("Mlp::backward: stale cache");
  }
  Vec grad(params_.size());
  Vec delta(outputs());
  for (Index k = 0; k < outputs(); ++k) delta[k] = dl_dy[k] * bounded_output(cache.z[k], lower_[k], upper_[k]).dy;
  for (std::size_t l = hidden + 1; l-- > 0;) {
    const Vec& in = l == 0 ? cache.input : cache.post[l - 1];
    const Index rows = sizes_[l + 1], cols = sizes_[l];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + offset(l), rows, cols).noalias() = delta * in.transpose();
    grad.segment(offset(l) + rows * cols, rows) = delta;
    Vec up = weight(l).transpose() * delta;
    if (l == 0) {
      if (dl_dx) *dl_dx = std::move(up);
      break;
    }
    delta = up.cwiseProduct(cache.pre[l - 1].unaryExpr([](double a) { return sigmoid(a); }));
  }
  return grad;
}

// -- optimizer and loss --

AdamState::AdamState(Index num_params, double learning_rate)
    : m(Vec::Zero(num_params)), v(Vec::Zero(num_params)), lr(learning_rate) {}

void adam_step(Mlp& mlp, const Vec& grad, AdamState& s) {
  if (grad.size() != mlp.num_params() || s.m.size() != grad.size() || s.v.size() != grad.size()) {
    throw std::invalid_argument("adam_step: gradient and state must match the parameter count");
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  Vec p = mlp.params();
  for (Index k = 0; k < p.size(); ++k) {
    const double mhat = s.m[k] / c1, vhat = s.v[k] / c2;
    p[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
  mlp.set_params(p);
}

MseResult mse_loss(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw std::invalid_argument("mse_loss: prediction and target must have equal, nonzero size");
  }
  const Vec diff = pred - target;
  const double n = static_cast<double>(diff.size());
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

// -- checkpoints --

std::string serialize_mlp(const Mlp& mlp) {
  json head{{"format", "dc2ac-mlp"},
            {"version", kVersion},
            {"activation", "softplus"},
            {"sizes", mlp.sizes_},
            {"num_params", mlp.params_.size()},
            {"metadata", mlp.metadata}};
  const std::string header = head.dump(1);
  std::string out(kMagic, sizeof kMagic);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, 0);
  binio::put_u64(out, header.size());
  out += header;
  binio::put_vec(out, mlp.params_);
  binio::put_vec(out, mlp.lower_);
  binio::put_vec(out, mlp.upper_);
  const auto digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

Mlp parse_mlp(const std::string& bytes) {
  if (bytes.size() < kPrefix + kDigest || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a model checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - kDigest;
  const auto digest = sha256(std::string_view(bytes.data(), body));
  if (std::memcmp(digest.data(), bytes.data() + body, kDigest) != 0) {
    throw CheckpointError("checkpoint checksum mismatch (file truncated or corrupted)");
  }
  binio::Reader<CheckpointError> rd(bytes, sizeof kMagic, body);
  const std::uint32_t version = rd.u32();
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  rd.u32();
  const std::uint64_t header_len = rd.u64();
  if (header_len > rd.remaining()) throw CheckpointError("checkpoint header is truncated");
  Mlp mlp;
  try {
    const json head = json::parse(rd.take(static_cast<std::size_t>(header_len)));
    if (head.at("activation").get<std::string>() != "softplus") throw CheckpointError("unknown activation");
    mlp.sizes_ = head.at("sizes").get<std::vector<Index>>();
    mlp.metadata = head.at("metadata").get<std::map<std::string, std::string>>();
    if (mlp.sizes_.size() < 2) throw CheckpointError("checkpoint needs at least one layer");
    Index total = 0;
    for (std::size_t l = 0; l + 1 < mlp.sizes_.size(); ++l) {
      if (mlp.sizes_[l] <= 0 || mlp.sizes_[l + 1] <= 0) throw CheckpointError("layer sizes must be positive");
      mlp.offsets_.push_back(total);
      total += mlp.sizes_[l + 1] * (mlp.sizes_[l] + 1);
    }
    if (head.at("num_params").get<Index>() != total) throw CheckpointError("parameter count disagrees with layer sizes");
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  const Index total = mlp.offsets_.back() + mlp.sizes_.back() * (mlp.sizes_[mlp.sizes_.size() - 2] + 1);
  mlp.params_ = rd.vec(static_cast<std::size_t>(total));
  mlp.lower_ = rd.vec(static_cast<std::size_t>(mlp.sizes_.back()));
  mlp.upper_ = rd.vec(static_cast<std::size_t>(mlp.sizes_.back()));
  if (rd.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint payload");
  if (!mlp.params_.allFinite()) throw CheckpointError("checkpoint holds non-finite parameters");
  return mlp;
}

void save_mlp(const Mlp& mlp, const std::string& path) { write_file(path, serialize_mlp(mlp)); }

Mlp load_mlp(const std::string& path) { return parse_mlp(read_file(path)); }

}  // namespace dc2ac
