#include "dc2ac/lp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dc2ac {

namespace {

using Index = Eigen::Index;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Presolved {
  LinearProgram lp;
  std::vector<Index> col_of;  // reduced column -> original column
  std::vector<Index> row_of;  // reduced row -> original row
  Vec fixed_x;                // original-length, values of fixed columns
  std::vector<bool> fixed;
  bool infeasible = false;
};

Presolved presolve(const LinearProgram& lp, double tol) {
  Presolved p;
  const Index n = lp.num_vars();
  const Index m = lp.num_rows();
  p.fixed.assign(static_cast<std::size_t>(n), false);
  p.fixed_x = Vec::Zero(n);
  std::vector<Index> new_col(static_cast<std::size_t>(n), -1);
  for (Index j = 0; j < n; ++j) {
    if (lp.lb[j] == lp.ub[j]) {
      p.fixed[static_cast<std::size_t>(j)] = true;
      p.fixed_x[j] = lp.lb[j];
    } else {
      new_col[static_cast<std::size_t>(j)] = static_cast<Index>(p.col_of.size());
      p.col_of.push_back(j);
    }
  }

  Vec rhs = lp.b - lp.A * p.fixed_x;
  std::vector<int> live(static_cast<std::size_t>(m), 0);
  for (Index j = 0; j < lp.A.outerSize(); ++j) {
    if (p.fixed[static_cast<std::size_t>(j)]) continue;
    for (SpMat::InnerIterator it(lp.A, j); it; ++it) {
      if (it.value() != 0.0) ++live[static_cast<std::size_t>(it.row())];
    }
  }
  std::vector<Index> new_row(static_cast<std::size_t>(m), -1);
  for (Index i = 0; i < m; ++i) {
    if (live[static_cast<std::size_t>(i)] > 0) {
      new_row[static_cast<std::size_t>(i)] = static_cast<Index>(p.row_of.size());
      p.row_of.push_back(i);
    } else if (std::abs(rhs[i]) > tol) {
      p.infeasible = true;
    }
  }

  const Index nr = static_cast<Index>(p.col_of.size());
  const Index mr = static_cast<Index>(p.row_of.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(lp.A.nonZeros()));
  for (Index j = 0; j < lp.A.outerSize(); ++j) {
    Index cj = new_col[static_cast<std::size_t>(j)];
    if (cj < 0) continue;
    for (SpMat::InnerIterator it(lp.A, j); it; ++it) {
      Index ri = new_row[static_cast<std::size_t>(it.row())];
      if (ri >= 0 && it.value() != 0.0) trips.emplace_back(ri, cj, it.value());
    }
  }
  p.lp.A.resize(mr, nr);
  p.lp.A.setFromTriplets(trips.begin(), trips.end());
  p.lp.A.makeCompressed();
  p.lp.c.resize(nr);
  p.lp.lb.resize(nr);
  p.lp.ub.resize(nr);
  for (Index k = 0; k < nr; ++k) {
    Index j = p.col_of[static_cast<std::size_t>(k)];
    p.lp.c[k] = lp.c[j];
    p.lp.lb[k] = lp.lb[j];
    p.lp.ub[k] = lp.ub[j];
  }
  p.lp.b.resize(mr);
  for (Index k = 0; k < mr; ++k) p.lp.b[k] = rhs[p.row_of[static_cast<std::size_t>(k)]];
  return p;
}

struct Step {
  Vec dx, dy, dzl, dzu, dsl, dsu;
  double dtau = 0.0, dkappa = 0.0;
};

// Homogeneous self-dual embedding of  min cᵀx, Ax = b, l <= x <= u:
//   Ax = bτ,  Aᵀy + zl - zu = cτ,  cᵀx - bᵀy - lᵀzl + uᵀzu + κ = 0,
//   sl = x - lτ >= 0,  su = uτ - x >= 0,  sl∘zl = su∘zu = τκ = μ.
class HsdSolver {
 public:
  // cost_scale: factor the costs were divided by; complementarity is tested unscaled.
  HsdSolver(const LinearProgram& lp, const LpOptions& options, double cost_scale = 1.0)
      : lp_(lp), opt_(options), n_(lp.num_vars()), m_(lp.num_rows()), cost_scale_(cost_scale) {
    has_lo_.resize(static_cast<std::size_t>(n_));
    has_up_.resize(static_cast<std::size_t>(n_));
    l_ = Vec::Zero(n_);
    u_ = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      has_lo_[static_cast<std::size_t>(j)] = std::isfinite(lp.lb[j]);
      has_up_[static_cast<std::size_t>(j)] = std::isfinite(lp.ub[j]);
      if (has_lo(j)) l_[j] = lp.lb[j];
      if (has_up(j)) u_[j] = lp.ub[j];
      if (has_lo(j)) ++num_compl_;
      if (has_up(j)) ++num_compl_;
    }
    ++num_compl_;  // τκ
    assemble_pattern();
  }

  LpSolution run() {
    init_point();
    LpSolution out;
    out.status = LpStatus::IterLimit;
    double best = kInf;
    int stalled = 0;
    State best_state;
    for (int iter = 0; iter <= opt_.max_iterations; ++iter) {
      out.iterations = iter;
      residuals();
      if (converged()) {
        out.status = LpStatus::Optimal;
        break;
      }
      if (auto cert = certificate(); cert) {
        out.status = *cert;
        break;
      }
      const double merit = scaled_error();
      if (merit < best) {
        best = merit;
        best_state = save();
        stalled = 0;
      } else if (++stalled >= 5) {
        break;  // rounding noise dominates the residuals
      }
      if (iter == opt_.max_iterations) break;
      if (!factorize()) break;

      const double mu = complementarity_mean();
      // predictor
      Vec rl = Vec::Zero(n_), ru = Vec::Zero(n_);
      for (Index j = 0; j < n_; ++j) {
        if (has_lo(j)) rl[j] = -sl_[j] * zl_[j];
        if (has_up(j)) ru[j] = -su_[j] * zu_[j];
      }
      Step aff = direction(rl, ru, -tau_ * kappa_, 1.0);
      double alpha_aff = max_step(aff);
      double mu_aff = complementarity_after(aff, alpha_aff);
      double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

      // corrector
      for (Index j = 0; j < n_; ++j) {
        if (has_lo(j)) rl[j] = sigma * mu - sl_[j] * zl_[j] - aff.dsl[j] * aff.dzl[j];
        if (has_up(j)) ru[j] = sigma * mu - su_[j] * zu_[j] - aff.dsu[j] * aff.dzu[j];
      }
      double rk = sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;
      Step step = direction(rl, ru, rk, 1.0 - sigma);
      double alpha = std::min(1.0, 0.99 * max_step(step));
      apply(step, alpha);
    }
    if (out.status == LpStatus::IterLimit && best < kInf) restore(best_state);
    return finish(out);
  }

 private:
  bool has_lo(Index j) const { return has_lo_[static_cast<std::size_t>(j)]; }
  bool has_up(Index j) const { return has_up_[static_cast<std::size_t>(j)]; }

  void assemble_pattern() {
    const Index dim = n_ + m_;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(dim + lp_.A.nonZeros()));
    for (Index k = 0; k < dim; ++k) trips.emplace_back(k, k, 1.0);
    for (Index j = 0; j < lp_.A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(lp_.A, j); it; ++it) {
        trips.emplace_back(n_ + it.row(), j, it.value());
      }
    }
    kkt_.resize(dim, dim);
    kkt_.setFromTriplets(trips.begin(), trips.end());
    kkt_.makeCompressed();
    diag_.resize(static_cast<std::size_t>(dim));
    for (Index k = 0; k < dim; ++k) {
      // column k stores rows >= k; the diagonal is the first entry
      diag_[static_cast<std::size_t>(k)] = kkt_.outerIndexPtr()[k];
    }
    ldlt_.analyzePattern(kkt_);
  }

  void init_point() {
    x_ = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j) && has_up(j)) {
        x_[j] = 0.5 * (l_[j] + u_[j]);
      } else if (has_lo(j)) {
        x_[j] = l_[j] + 1.0;
      } else if (has_up(j)) {
        x_[j] = u_[j] - 1.0;
      }
    }
    y_ = Vec::Zero(m_);
    zl_ = Vec::Zero(n_);
    zu_ = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) zl_[j] = 1.0;
      if (has_up(j)) zu_[j] = 1.0;
    }
    tau_ = 1.0;
    kappa_ = 1.0;
    sl_ = Vec::Zero(n_);
    su_ = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) sl_[j] = x_[j] - l_[j];
      if (has_up(j)) su_[j] = u_[j] - x_[j];
    }
  }

  void residuals() {
    // Slacks are iterates of their own; recomputing x - lτ would cancel
    // catastrophically once a slack is far below |l|.
    rlb_ = Vec::Zero(n_);
    rub_ = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) rlb_[j] = x_[j] - l_[j] * tau_ - sl_[j];
      if (has_up(j)) rub_[j] = u_[j] * tau_ - x_[j] - su_[j];
    }
    rp_ = lp_.b * tau_ - lp_.A * x_;
    rd_ = lp_.c * tau_ - lp_.A.transpose() * y_ - zl_ + zu_;
    rg_ = lp_.c.dot(x_) - lp_.b.dot(y_) - l_.dot(zl_) + u_.dot(zu_) + kappa_;
  }

  double complementarity_mean() const {
    return (sl_.dot(zl_) + su_.dot(zu_) + tau_ * kappa_) / static_cast<double>(num_compl_);
  }

  struct State {
    Vec x, y, zl, zu, sl, su;
    double tau = 1.0, kappa = 1.0;
  };

  State save() const { return {x_, y_, zl_, zu_, sl_, su_, tau_, kappa_}; }

  void restore(const State& st) {
    x_ = st.x;
    y_ = st.y;
    zl_ = st.zl;
    zu_ = st.zu;
    sl_ = st.sl;
    su_ = st.su;
    tau_ = st.tau;
    kappa_ = st.kappa;
  }

  // Largest ratio of a termination measure to its tolerance.
  double scaled_error() const {
    const double pres = primal_residual() / tau_;
    const double dres = (rd_.size() ? rd_.lpNorm<Eigen::Infinity>() : 0.0) / tau_;
    const double pobj = lp_.c.dot(x_) / tau_;
    const double dobj = (lp_.b.dot(y_) + l_.dot(zl_) - u_.dot(zu_)) / tau_;
    return std::max({pres, dres, std::abs(pobj - dobj) / (1.0 + std::abs(pobj))}) / opt_.tol;
  }

  double primal_residual() const {
    double r = rp_.size() ? rp_.lpNorm<Eigen::Infinity>() : 0.0;
    if (n_ > 0) r = std::max({r, rlb_.lpNorm<Eigen::Infinity>(), rub_.lpNorm<Eigen::Infinity>()});
    return r;
  }

  bool converged() const {
    const double pres = primal_residual() / tau_;
    const double dres = (rd_.size() ? rd_.lpNorm<Eigen::Infinity>() : 0.0) / tau_;
    const double pobj = lp_.c.dot(x_) / tau_;
    const double dobj = (lp_.b.dot(y_) + l_.dot(zl_) - u_.dot(zu_)) / tau_;
    return pres <= opt_.tol && dres <= opt_.tol &&
           std::abs(pobj - dobj) <= opt_.tol * (1.0 + std::abs(pobj)) && cost_scale_ * bound_complementarity() <= opt_.tol;
  }

  // Per-pair complementarity measured on the bound distances, not the slacks.
  double bound_complementarity() const {
    double worst = 0.0;
    const double t2 = tau_ * tau_;
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) worst = std::max(worst, std::abs((x_[j] - tau_ * l_[j]) * zl_[j]) / t2);
      if (has_up(j)) worst = std::max(worst, std::abs((tau_ * u_[j] - x_[j]) * zu_[j]) / t2);
    }
    return worst;
  }

  std::optional<LpStatus> certificate() const {
    if (tau_ > 1e-3 * kappa_) return std::nullopt;
    const double tol = opt_.tol;
    const double dual_ray = lp_.b.dot(y_) + l_.dot(zl_) - u_.dot(zu_);
    if (dual_ray > 0.0) {
      Vec farkas = lp_.A.transpose() * y_ + zl_ - zu_;
      double res = farkas.size() ? farkas.lpNorm<Eigen::Infinity>() : 0.0;
      if (res <= tol * dual_ray) return LpStatus::Infeasible;
    }
    const double primal_ray = -lp_.c.dot(x_);
    if (primal_ray > 0.0) {
      Vec ax = lp_.A * x_;
      double res = ax.size() ? ax.lpNorm<Eigen::Infinity>() : 0.0;
      for (Index j = 0; j < n_; ++j) {
        if (has_lo(j)) res = std::max(res, -x_[j]);
        if (has_up(j)) res = std::max(res, x_[j]);
      }
      if (res <= tol * primal_ray) return LpStatus::Unbounded;
    }
    return std::nullopt;
  }

  bool factorize() {
    d_ = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) d_[j] += zl_[j] / sl_[j];
      if (has_up(j)) d_[j] += zu_[j] / su_[j];
    }
    // Pivots can cancel to zero once D spans many magnitudes; raise the static
    // regularization until the factorization goes through. Refinement runs
    // against the unregularized operator.
    double* values = kkt_.valuePtr();
    for (double reg = opt_.regularization; reg <= 1e-4; reg *= 100.0) {
      for (Index j = 0; j < n_; ++j) values[diag_[static_cast<std::size_t>(j)]] = -(d_[j] + reg);
      for (Index i = 0; i < m_; ++i) values[diag_[static_cast<std::size_t>(n_ + i)]] = reg;
      ldlt_.factorize(kkt_);
      if (ldlt_.info() == Eigen::Success && pivots_ok(reg)) return true;
    }
    return false;
  }

  // In exact arithmetic every pivot of a quasi-definite matrix keeps the sign
  // of its block with magnitude >= reg; anything else is rounding breakdown.
  bool pivots_ok(double reg) const {
    const Vec& piv = ldlt_.vectorD();
    const auto& perm = ldlt_.permutationP().indices();
    for (Index orig = 0; orig < piv.size(); ++orig) {
      const double p = piv[perm[orig]];
      if (!std::isfinite(p)) return false;
      if (orig < n_ ? p > -0.5 * reg : p < 0.5 * reg) return false;
    }
    return true;
  }

  // Solves the unregularized augmented system [-D Aᵀ; A 0] with refinement.
  Vec solve_augmented(const Vec& rhs) const {
    Vec sol = ldlt_.solve(rhs);
    for (int k = 0; k < 6; ++k) {
      Vec r = rhs - apply_augmented(sol);
      if (r.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      sol += ldlt_.solve(r);
    }
    return sol;
  }

  Vec apply_augmented(const Vec& v) const {
    Vec out(n_ + m_);
    auto vx = v.head(n_);
    auto vy = v.tail(m_);
    out.head(n_) = -d_.cwiseProduct(vx) + lp_.A.transpose() * vy;
    out.tail(m_) = lp_.A * vx;
    return out;
  }

  // Newton direction in the shifted unknown dξ = dx - (x/τ)dτ. With the gap
  // row rewritten through the dual row, every coefficient stays O(z/τ) and the
  // dτ denominator is a negative sum of squares.
  Step direction(const Vec& rl_in, const Vec& ru_in, double rk, double eta) const {
    const Vec rl = rl_in - eta * zl_.cwiseProduct(rlb_);
    const Vec ru = ru_in - eta * zu_.cwiseProduct(rub_);
    Vec shl = Vec::Zero(n_), shu = Vec::Zero(n_);  // (x - lτ)/τ, (uτ - x)/τ
    Vec gl = Vec::Zero(n_), gu = Vec::Zero(n_);
    Vec r1(n_ + m_);
    const Vec xt = x_ / tau_;
    double rhs3 = -eta * rg_ + eta * rd_.dot(xt) - rk / tau_;
    for (Index j = 0; j < n_; ++j) {
      double top = eta * rd_[j];
      if (has_lo(j)) {
        shl[j] = (sl_[j] + rlb_[j]) / tau_;
        gl[j] = zl_[j] * shl[j] / sl_[j];
        top -= rl[j] / sl_[j];
        rhs3 -= shl[j] / sl_[j] * rl[j];
      }
      if (has_up(j)) {
        shu[j] = (su_[j] + rub_[j]) / tau_;
        gu[j] = zu_[j] * shu[j] / su_[j];
        top += ru[j] / su_[j];
        rhs3 -= shu[j] / su_[j] * ru[j];
      }
      r1[j] = top;
    }
    r1.tail(m_) = eta * rp_;
    const Vec rho = rp_ / tau_;

    if (!tau_dir_valid_) {
      Vec r2(n_ + m_);
      r2.head(n_) = lp_.c + gl - gu;
      r2.tail(m_) = rho;
      tau_dir_ = solve_augmented(r2);
      tau_dir_valid_ = true;
    }
    const Vec s1 = solve_augmented(r1);
    const Vec& s2 = tau_dir_;

    const Vec g = lp_.c - gl + gu;
    const double num = rhs3 - g.dot(s1.head(n_)) + rho.dot(s1.tail(m_));
    double den = -kappa_ / tau_;
    for (Index j = 0; j < n_; ++j) {
      const double p = s2[j];
      if (has_lo(j)) den -= zl_[j] / sl_[j] * (p + shl[j]) * (p + shl[j]);
      if (has_up(j)) den -= zu_[j] / su_[j] * (p - shu[j]) * (p - shu[j]);
    }

    Step st;
    st.dtau = num / den;
    const Vec dxi = s1.head(n_) + st.dtau * s2.head(n_);
    st.dx = dxi + st.dtau * xt;
    st.dy = s1.tail(m_) + st.dtau * s2.tail(m_);
    st.dsl = Vec::Zero(n_);
    st.dsu = Vec::Zero(n_);
    st.dzl = Vec::Zero(n_);
    st.dzu = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) {
        st.dsl[j] = dxi[j] + shl[j] * st.dtau + eta * rlb_[j];
        st.dzl[j] = (rl_in[j] - zl_[j] * st.dsl[j]) / sl_[j];
      }
      if (has_up(j)) {
        st.dsu[j] = -dxi[j] + shu[j] * st.dtau + eta * rub_[j];
        st.dzu[j] = (ru_in[j] - zu_[j] * st.dsu[j]) / su_[j];
      }
    }
    st.dkappa = (rk - kappa_ * st.dtau) / tau_;
    return st;
  }
  double max_step(const Step& st) const {
    double alpha = 1.0;
    auto limit = [&](double v, double dv) {
      if (dv < 0.0) alpha = std::min(alpha, -v / dv);
    };
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) {
        limit(sl_[j], st.dsl[j]);
        limit(zl_[j], st.dzl[j]);
      }
      if (has_up(j)) {
        limit(su_[j], st.dsu[j]);
        limit(zu_[j], st.dzu[j]);
      }
    }
    limit(tau_, st.dtau);
    limit(kappa_, st.dkappa);
    return alpha;
  }

  double complementarity_after(const Step& st, double alpha) const {
    double total = (tau_ + alpha * st.dtau) * (kappa_ + alpha * st.dkappa);
    for (Index j = 0; j < n_; ++j) {
      if (has_lo(j)) total += (sl_[j] + alpha * st.dsl[j]) * (zl_[j] + alpha * st.dzl[j]);
      if (has_up(j)) total += (su_[j] + alpha * st.dsu[j]) * (zu_[j] + alpha * st.dzu[j]);
    }
    return total / static_cast<double>(num_compl_);
  }

  void apply(const Step& st, double alpha) {
    x_ += alpha * st.dx;
    y_ += alpha * st.dy;
    zl_ += alpha * st.dzl;
    zu_ += alpha * st.dzu;
    sl_ += alpha * st.dsl;
    su_ += alpha * st.dsu;
    tau_ += alpha * st.dtau;
    kappa_ += alpha * st.dkappa;
    tau_dir_valid_ = false;
  }

  LpSolution finish(LpSolution out) const {
    const double scale = out.status == LpStatus::Optimal || out.status == LpStatus::IterLimit
                             ? 1.0 / tau_
                             : 1.0;
    out.x = x_ * scale;
    out.lambda_eq = y_ * scale;
    out.mu_lo = zl_ * scale;
    out.mu_hi = zu_ * scale;
    return out;
  }

  const LinearProgram& lp_;
  LpOptions opt_;
  Index n_, m_;
  double cost_scale_;
  std::vector<bool> has_lo_, has_up_;
  Vec l_, u_;
  Index num_compl_ = 0;

  SpMat kkt_;
  std::vector<Index> diag_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
  Vec d_;
  mutable Vec tau_dir_;
  mutable bool tau_dir_valid_ = false;

  Vec x_, y_, zl_, zu_;
  double tau_ = 1.0, kappa_ = 1.0;
  Vec sl_, su_, rp_, rd_, rlb_, rub_;
  double rg_ = 0.0;
};

}  // namespace

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

void validate_lp(const LinearProgram& lp) {
  const Index n = lp.num_vars();
  if (lp.lb.size() != n || lp.ub.size() != n) throw std::invalid_argument("LP bound vectors have wrong size");
  if (lp.A.cols() != n || lp.A.rows() != lp.num_rows()) {
    throw std::invalid_argument("LP constraint matrix has wrong shape");
  }
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lp.lb[j]) || std::isnan(lp.ub[j]) || lp.lb[j] > lp.ub[j]) {
      throw std::invalid_argument("LP bounds violate lb <= ub at column " + std::to_string(j));
    }
    if (lp.lb[j] == kInf || lp.ub[j] == -kInf) {
      throw std::invalid_argument("LP column " + std::to_string(j) + " has an infinite fixed bound");
    }
    if (!std::isfinite(lp.c[j])) throw std::invalid_argument("LP cost is not finite");
  }
  if (!lp.b.allFinite()) throw std::invalid_argument("LP right-hand side is not finite");
}

LpSolution solve_lp(const LinearProgram& lp, double tol) {
  LpOptions options;
  options.tol = tol;
  return solve_lp(lp, options);
}

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
  validate_lp(lp);
  if (!(options.tol > 0.0)) throw std::invalid_argument("LP tolerance must be positive");
  const Index n = lp.num_vars();
  const Index m = lp.num_rows();

  Presolved pre = presolve(lp, options.tol);
  LpSolution out;
  out.x = pre.fixed_x;
  out.lambda_eq = Vec::Zero(m);
  out.mu_lo = Vec::Zero(n);
  out.mu_hi = Vec::Zero(n);
  if (pre.infeasible) {
    out.status = LpStatus::Infeasible;
    return out;
  }

  LpSolution reduced;
  if (pre.lp.num_vars() > 0) {
    // Cost scaling: the dual residual is measured relative to max(1, ‖c‖∞).
    const double cscale = std::max(1.0, pre.lp.c.size() ? pre.lp.c.lpNorm<Eigen::Infinity>() : 0.0);
    pre.lp.c /= cscale;
    HsdSolver solver(pre.lp, options, cscale);
    reduced = solver.run();
    reduced.lambda_eq *= cscale;
    reduced.mu_lo *= cscale;
    reduced.mu_hi *= cscale;
  } else {
    reduced.status = LpStatus::Optimal;
    reduced.x = Vec::Zero(0);
    reduced.lambda_eq = Vec::Zero(pre.lp.num_rows());
    reduced.mu_lo = reduced.mu_hi = Vec::Zero(0);
  }
  out.status = reduced.status;
  out.iterations = reduced.iterations;
  for (std::size_t k = 0; k < pre.col_of.size(); ++k) {
    Index j = pre.col_of[k];
    auto kk = static_cast<Index>(k);
    out.x[j] = reduced.x[kk];
    out.mu_lo[j] = std::isfinite(lp.lb[j]) ? reduced.mu_lo[kk] : 0.0;
    out.mu_hi[j] = std::isfinite(lp.ub[j]) ? reduced.mu_hi[kk] : 0.0;
  }
  for (std::size_t k = 0; k < pre.row_of.size(); ++k) {
    out.lambda_eq[pre.row_of[k]] = reduced.lambda_eq[static_cast<Index>(k)];
  }
  // Fixed columns take the reduced cost as the multiplier of whichever side it loads.
  if (out.status == LpStatus::Optimal) {
    Vec reduced_cost = lp.c - lp.A.transpose() * out.lambda_eq;
    for (Index j = 0; j < n; ++j) {
      if (!pre.fixed[static_cast<std::size_t>(j)]) continue;
      if (reduced_cost[j] >= 0.0) {
        out.mu_lo[j] = reduced_cost[j];
      } else {
        out.mu_hi[j] = -reduced_cost[j];
      }
    }
  }
  out.objective = lp.c.dot(out.x);
  return out;
}

double ResidualReport::worst() const {
  return std::max({primal, stationarity, dual_feasibility, complementarity});
}

double lp_dual_objective(const LinearProgram& lp, const LpSolution& sol) {
  double value = lp.b.dot(sol.lambda_eq);
  for (Index j = 0; j < lp.num_vars(); ++j) {
    if (std::isfinite(lp.lb[j])) value += lp.lb[j] * sol.mu_lo[j];
    if (std::isfinite(lp.ub[j])) value -= lp.ub[j] * sol.mu_hi[j];
  }
  return value;
}

ResidualReport check_kkt(const LinearProgram& lp, const LpSolution& sol, double tol) {
  const Index n = lp.num_vars();
  if (sol.x.size() != n || sol.mu_lo.size() != n || sol.mu_hi.size() != n ||
      sol.lambda_eq.size() != lp.num_rows()) {
    throw std::invalid_argument("check_kkt: solution dimensions do not match the LP");
  }
  ResidualReport rep;
  rep.tol = tol;
  Vec pr = lp.A * sol.x - lp.b;
  rep.primal = pr.size() ? pr.lpNorm<Eigen::Infinity>() : 0.0;
  Vec st = lp.c - lp.A.transpose() * sol.lambda_eq - sol.mu_lo + sol.mu_hi;
  rep.stationarity = st.size() ? st.lpNorm<Eigen::Infinity>() : 0.0;
  for (Index j = 0; j < n; ++j) {
    const bool lo = std::isfinite(lp.lb[j]);
    const bool up = std::isfinite(lp.ub[j]);
    if (lo) rep.primal = std::max(rep.primal, lp.lb[j] - sol.x[j]);
    if (up) rep.primal = std::max(rep.primal, sol.x[j] - lp.ub[j]);
    rep.dual_feasibility = std::max({rep.dual_feasibility, -sol.mu_lo[j], -sol.mu_hi[j]});
    // a multiplier on an absent bound can never be complementary
    rep.complementarity = std::max(rep.complementarity,
                                   lo ? std::abs((sol.x[j] - lp.lb[j]) * sol.mu_lo[j])
                                      : std::abs(sol.mu_lo[j]));
    rep.complementarity = std::max(rep.complementarity,
                                   up ? std::abs((lp.ub[j] - sol.x[j]) * sol.mu_hi[j])
                                      : std::abs(sol.mu_hi[j]));
  }
  rep.pass = rep.worst() <= tol;
  return rep;
}

}  // namespace dc2ac
