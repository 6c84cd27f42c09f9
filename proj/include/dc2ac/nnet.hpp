#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dc2ac {

using Vec = Eigen::VectorXd;

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

double softplus(double x);
double sigmoid(double x);

struct BoundedValue {
  double y;
  double dy;  // dy/dz
};

/// y = softplus(z − l) − softplus(z − u) + l. Either bound may be infinite;
/// with both infinite the output is the identity.
BoundedValue bounded_output(double z, double l, double u);

/// z with bounded_output(z, l, u).y == y, for l < y < u.
double bounded_inverse(double y, double l, double u);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fully connected network: softplus hidden layers, linear output followed by
/// an elementwise bounded_output. All parameters live in one flat vector,
/// layer by layer, each layer as W (column-major, out × in) then b.
class Mlp {
 public:
  struct Cache {
    Vec input;
    std::vector<Vec> pre;   // pre-activation of each hidden layer
    std::vector<Vec> post;  // softplus of each hidden layer
    Vec z;                  // raw output before bounding
    Vec y;
  };

  /// Free-form string pairs carried through checkpoints.
  std::map<std::string, std::string> metadata;

  Mlp() = default;
  /// Uniform fan-in init: every weight and bias of a layer with n inputs is
  /// drawn from U(−1/√n, 1/√n), layer by layer from one seeded stream.
  Mlp(Eigen::Index inputs, const std::vector<Eigen::Index>& hidden, const Vec& lower, const Vec& upper,
      std::uint64_t seed);

  Eigen::Index inputs() const { return sizes_.front(); }
  Eigen::Index outputs() const { return sizes_.back(); }
  const std::vector<Eigen::Index>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  Eigen::Index num_params() const { return params_.size(); }
  const Vec& params() const { return params_; }
  /// Throws std::invalid_argument on size mismatch or non-finite entries.
  void set_params(const Vec& p);

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Vec> bias(std::size_t layer);
  Eigen::Map<const Vec> bias(std::size_t layer) const;

  /// Sets the output bias so a zero last hidden contribution maps to y.
  void set_output_target(const Vec& y);

  Vec forward(const Vec& x) const;
  Vec forward(const Vec& x, Cache& cache) const;
  /// Row-wise batch: row r of the result is forward(X.row(r)).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const;

  /// Flat parameter gradient for the cotangent dl_dy. When dl_dx is given it
  /// receives the input gradient.
  Vec backward(const Cache& cache, const Vec& dl_dy, Vec* dl_dx = nullptr) const;

 private:
  Eigen::Index offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<Eigen::Index> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vec params_;
  Vec lower_, upper_;

  friend std::string serialize_mlp(const Mlp& mlp);
  friend Mlp parse_mlp(const std::string& bytes);
};

struct AdamState {
  Vec m, v;
  std::int64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index num_params, double learning_rate);
};

/// In-place Adam update with bias correction.
void adam_step(Mlp& mlp, const Vec& grad, AdamState& state);

struct MseResult {
  double loss;
  Vec grad;  // 2(pred − target)/N
};

MseResult mse_loss(const Vec& pred, const Vec& target);

/// Checkpoint file, see docs/formats.md. Round trip is bit-exact.
std::string serialize_mlp(const Mlp& mlp);
Mlp parse_mlp(const std::string& bytes);
void save_mlp(const Mlp& mlp, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace dc2ac
