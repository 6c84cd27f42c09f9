#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "dc2ac/dcopf.hpp"

namespace dc2ac {

/// Gradient (or direction) in parameter space.
struct ParamGradient {
  Vec d_gs;
  Vec d_b;
};

class DiffError : public std::runtime_error {
 public:
  DiffError(const std::string& message, double rcond)
      : std::runtime_error(message), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

/// Implicit-function linearization of the DC-OPF KKT system at a solution,
/// with complementarity reduced to equalities on the active set.
///
/// Unknowns are the LP primal x, the row multipliers and one multiplier per
/// active bound. When [A; E] is square and well conditioned the primal
/// sensitivity is M⁻¹ applied to the primal parameter derivative; otherwise
/// the full symmetric system is solved in the Tikhonov least-squares sense,
/// (JᵀJ + τI)⁻¹Jᵀ, and `regularized` is set.
class KktLinearization {
 public:
  struct Active {
    Eigen::Index column;
    bool upper;
  };

  const IndexMap& map() const { return map_; }
  const std::vector<Active>& active() const { return active_; }
  bool regularized() const { return regularized_; }
  double rcond() const { return rcond_; }
  double residual() const { return residual_; }
  Eigen::Index num_params() const { return num_buses_ + num_branches_; }

  /// True if the column sits on a bound in the active set.
  bool is_active(Eigen::Index column) const;

  /// dL/d(gs, b) for a cotangent on (pg, pf, va).
  ParamGradient adjoint_gradient(const DcPrimal& dl_dprimal) const;

  /// d(pg, pf, va) along a parameter direction.
  DcPrimal forward_sensitivity(const ParamGradient& direction) const;

  /// Full LP-primal forward sensitivity, including phi and dva.
  Vec forward_full(const ParamGradient& direction) const;

  friend KktLinearization linearize_kkt(const GridCase&, const DcParams&, const DcSolution&, double);

 private:
  Vec param_vector(const ParamGradient& g) const;
  Vec primal_cotangent(const DcPrimal& v) const;

  IndexMap map_;
  Eigen::Index num_buses_ = 0, num_branches_ = 0, num_gens_ = 0;
  std::vector<Active> active_;
  Eigen::Index n_ = 0, m_ = 0, k_ = 0;
  bool regularized_ = false;
  double rcond_ = 0.0;
  double residual_ = 0.0;
  Eigen::MatrixXd fp_;  // ∂F/∂(gs, b), rows: stationarity (n), equality (m), active (k)
  Eigen::PartialPivLU<Eigen::MatrixXd> square_;
  // regularized path: J = QΛQᵀ, applied as Q·diag(λ/(λ²+τ))·Qᵀ
  Eigen::MatrixXd eig_vectors_;
  Vec filter_;
};

inline constexpr double kDefaultActiveTol = 1e-6;
inline constexpr double kTikhonov = 1e-8;

/// Throws DiffError if the solution is not optimal or the system cannot be factorized.
KktLinearization linearize_kkt(const GridCase& grid, const DcParams& params, const DcSolution& sol,
                               double eps_active = kDefaultActiveTol);

}  // namespace dc2ac
