#include "dc2ac/diffgrad.hpp"

#include <algorithm>
#include <cmath>

namespace dc2ac {

namespace {

using Index = Eigen::Index;
constexpr double kMinRcond = 1e-12;

}  // namespace

KktLinearization linearize_kkt(const GridCase& grid, const DcParams& params, const DcSolution& sol,
                               double eps_active) {
  if (!sol.optimal()) throw DiffError("cannot linearize a non-optimal DC-OPF solution", 0.0);
  const DcProblem prob = build_dcopf(grid, params, sol.pd);
  const LinearProgram& lp = prob.lp;
  const LpSolution& s = sol.lp;

  KktLinearization lin;
  lin.map_ = prob.map;
  lin.num_buses_ = static_cast<Index>(grid.num_buses());
  lin.num_branches_ = static_cast<Index>(grid.num_branches());
  lin.num_gens_ = static_cast<Index>(grid.num_generators());
  const Index n = lp.num_vars();
  const Index m = lp.num_rows();

  std::vector<double> nu;
  for (Index j = 0; j < n; ++j) {
    const bool fixed = lp.lb[j] == lp.ub[j];
    const bool at_lo = std::isfinite(lp.lb[j]) && s.x[j] - lp.lb[j] <= eps_active;
    const bool at_up = std::isfinite(lp.ub[j]) && lp.ub[j] - s.x[j] <= eps_active;
    if (fixed || at_lo || at_up) {
      const bool upper = !fixed && !at_lo;
      lin.active_.push_back({j, upper});
      nu.push_back(s.mu_lo[j] - s.mu_hi[j]);
    }
  }
  const auto k = static_cast<Index>(lin.active_.size());
  lin.n_ = n;
  lin.m_ = m;
  lin.k_ = k;

  // Residual of the reduced system: Aᵀy + Eᵀν - c, Ax - b, Ex - bound.
  const Eigen::MatrixXd A(lp.A);
  Vec stat = A.transpose() * s.lambda_eq - lp.c;
  for (Index a = 0; a < k; ++a) stat[lin.active_[static_cast<std::size_t>(a)].column] += nu[static_cast<std::size_t>(a)];
  double res = stat.lpNorm<Eigen::Infinity>();
  if (m > 0) res = std::max(res, (A * s.x - lp.b).lpNorm<Eigen::Infinity>());
  for (const auto& act : lin.active_) {
    const double bound = act.upper ? lp.ub[act.column] : lp.lb[act.column];
    res = std::max(res, std::abs(s.x[act.column] - bound));
  }
  lin.residual_ = res;

  // ∂F/∂(gs, b)
  const Index P = lin.num_params();
  const IndexMap& map = lin.map_;
  lin.fp_ = Eigen::MatrixXd::Zero(n + m + k, P);
  for (Index i = 0; i < lin.num_buses_; ++i) lin.fp_(n + map.balance + i, i) = -1.0;
  for (Index e = 0; e < lin.num_branches_; ++e) {
    const auto& br = grid.branches[static_cast<std::size_t>(e)];
    const Index vi = map.va + static_cast<Index>(br.from);
    const Index vj = map.va + static_cast<Index>(br.to);
    const Index col = lin.num_buses_ + e;
    const double y_flow = s.lambda_eq[map.flow + e];
    lin.fp_(vi, col) += y_flow;
    lin.fp_(vj, col) -= y_flow;
    lin.fp_(n + map.flow + e, col) = s.x[vi] - s.x[vj];
  }

  Eigen::MatrixXd M(m + k, n);
  M.topRows(m) = A;
  M.bottomRows(k).setZero();
  for (Index a = 0; a < k; ++a) M(m + a, lin.active_[static_cast<std::size_t>(a)].column) = 1.0;

  if (m + k == n) {
    lin.square_.compute(M);
    lin.rcond_ = lin.square_.rcond();
    if (lin.rcond_ >= kMinRcond && std::isfinite(lin.rcond_)) return lin;
  }

  // Degenerate: primal or dual solution not unique at this active set.
  const Index dim = n + m + k;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
  jac.block(0, n, n, m + k) = M.transpose();
  jac.block(n, 0, m + k, n) = M;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  if (eig.info() != Eigen::Success) {
    throw DiffError("KKT eigendecomposition failed", lin.rcond_);
  }
  lin.eig_vectors_ = eig.eigenvectors();
  const Vec& lam = eig.eigenvalues();
  lin.filter_ = lam.array() / (lam.array().square() + kTikhonov);
  lin.regularized_ = true;
  if (m + k != n) lin.rcond_ = 0.0;
  return lin;
}

bool KktLinearization::is_active(Index column) const {
  return std::any_of(active_.begin(), active_.end(), [&](const Active& a) { return a.column == column; });
}

Vec KktLinearization::param_vector(const ParamGradient& g) const {
  if (g.d_gs.size() != num_buses_ || g.d_b.size() != num_branches_) {
    throw std::invalid_argument("parameter direction has wrong dimensions");
  }
  Vec p(num_params());
  p << g.d_gs, g.d_b;
  return p;
}

Vec KktLinearization::primal_cotangent(const DcPrimal& v) const {
  if (v.pg.size() != num_gens_ || v.pf.size() != num_branches_ || v.va.size() != num_buses_) {
    throw std::invalid_argument("primal cotangent has wrong dimensions");
  }
  Vec out = Vec::Zero(n_);
  out.segment(map_.pg, num_gens_) = v.pg;
  out.segment(map_.pf, num_branches_) = v.pf;
  out.segment(map_.va, num_buses_) = v.va;
  return out;
}

Vec KktLinearization::forward_full(const ParamGradient& direction) const {
  const Vec rhs = fp_ * param_vector(direction);
  if (!regularized_) return -square_.solve(rhs.tail(m_ + k_));
  const Vec dz = -(eig_vectors_ * filter_.cwiseProduct(eig_vectors_.transpose() * rhs));
  return dz.head(n_);
}

DcPrimal KktLinearization::forward_sensitivity(const ParamGradient& direction) const {
  const Vec dx = forward_full(direction);
  return {dx.segment(map_.pg, num_gens_), dx.segment(map_.pf, num_branches_), dx.segment(map_.va, num_buses_)};
}

ParamGradient KktLinearization::adjoint_gradient(const DcPrimal& dl_dprimal) const {
  const Vec v = primal_cotangent(dl_dprimal);
  Vec g;
  if (!regularized_) {
    const Vec w = square_.transpose().solve(v);
    g = -fp_.bottomRows(m_ + k_).transpose() * w;
  } else {
    const Vec w = eig_vectors_ * filter_.cwiseProduct(eig_vectors_.topRows(n_).transpose() * v);
    g = -fp_.transpose() * w;
  }
  return {g.head(num_buses_), g.tail(num_branches_)};
}

}  // namespace dc2ac
