#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dc2ac/acopf.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;

constexpr double kFractionToBoundary = 0.99995;
constexpr double kBarrierTol = 10.0;
constexpr double kScaleMax = 100.0;
constexpr double kAngleUnbounded = 2.0 * M_PI;

// h = sign · (x[var] − bound) ≤ 0
struct VarBound {
  Index var;
  double bound;
  double sign;
};

// h = sign · (va[from] − va[to] − bound) ≤ 0
struct AngleLimit {
  Index from, to;
  double bound;
  double sign;
};

struct Eval {
  Vec g;
  Mat Jg;
  Vec h;
  Mat Jh;
  std::vector<BranchFlow> flows;
};

// Variables: va (N), vm (N), pg (G), qg (G).
// Equalities: P balance (N), Q balance (N), va_ref = 0, fixed variables.
// Inequalities: variable bounds, angle limits, |S|² ≤ S̄² at both branch ends.
class AcModel {
 public:
  AcModel(const GridCase& grid, const Vec& pd, const Vec& qd)
      : grid_(grid),
        N_(static_cast<Index>(grid.num_buses())),
        G_(static_cast<Index>(grid.num_generators())),
        E_(static_cast<Index>(grid.num_branches())),
        pd_bus_(bus_demand(grid, pd)),
        qd_bus_(bus_demand(grid, qd)) {
    n_ = 2 * N_ + 2 * G_;
    lb_ = Vec::Constant(n_, -std::numeric_limits<double>::infinity());
    ub_ = Vec::Constant(n_, std::numeric_limits<double>::infinity());
    for (Index i = 0; i < N_; ++i) {
      lb_[N_ + i] = grid.buses[static_cast<std::size_t>(i)].vm_min;
      ub_[N_ + i] = grid.buses[static_cast<std::size_t>(i)].vm_max;
    }
    cost_ = Vec::Zero(n_);
    for (Index k = 0; k < G_; ++k) {
      const Generator& gen = grid.generators[static_cast<std::size_t>(k)];
      lb_[pg(k)] = gen.pg_min;
      ub_[pg(k)] = gen.pg_max;
      lb_[qg(k)] = gen.qg_min;
      ub_[qg(k)] = gen.qg_max;
      cost_[pg(k)] = gen.cost;
    }
    cost_scale_ = std::max(1.0, cost_.lpNorm<Eigen::Infinity>());

    for (Index v = 0; v < n_; ++v) {
      if (std::isfinite(lb_[v]) && ub_[v] - lb_[v] <= 1e-10) {
        fixed_.push_back(v);
        continue;
      }
      if (std::isfinite(lb_[v])) bounds_.push_back({v, lb_[v], -1.0});
      if (std::isfinite(ub_[v])) bounds_.push_back({v, ub_[v], 1.0});
    }
    for (const Branch& br : grid.branches) {
      const auto i = static_cast<Index>(br.from), j = static_cast<Index>(br.to);
      if (br.dva_max < kAngleUnbounded) angles_.push_back({i, j, br.dva_max, 1.0});
      if (br.dva_min > -kAngleUnbounded) angles_.push_back({i, j, br.dva_min, -1.0});
    }
    m_ = 2 * N_ + 1 + static_cast<Index>(fixed_.size());
    thermal_ = static_cast<Index>(bounds_.size() + angles_.size());
    ni_ = thermal_ + 2 * E_;
  }

  Index n() const { return n_; }
  Index m() const { return m_; }
  Index ni() const { return ni_; }
  Index pg(Index k) const { return 2 * N_ + k; }
  Index qg(Index k) const { return 2 * N_ + G_ + k; }
  Vec grad_f() const { return cost_ / cost_scale_; }

  Vec initial_point() const {
    Vec x = Vec::Zero(n_);
    for (Index v = N_; v < n_; ++v) x[v] = 0.5 * (lb_[v] + ub_[v]);
    return x;
  }

  Eval evaluate(const Vec& x) const {
    Eval ev;
    const Vec va = x.head(N_);
    const Vec vm = x.segment(N_, N_);
    ev.g = Vec::Zero(m_);
    ev.Jg = Mat::Zero(m_, n_);
    ev.h = Vec::Zero(ni_);
    ev.Jh = Mat::Zero(ni_, n_);

    for (Index i = 0; i < N_; ++i) {
      const Bus& b = grid_.buses[static_cast<std::size_t>(i)];
      ev.g[i] = b.gs * vm[i] * vm[i] + pd_bus_[i];
      ev.g[N_ + i] = -b.bs * vm[i] * vm[i] + qd_bus_[i];
      ev.Jg(i, N_ + i) = 2.0 * b.gs * vm[i];
      ev.Jg(N_ + i, N_ + i) = -2.0 * b.bs * vm[i];
    }
    for (Index k = 0; k < G_; ++k) {
      const auto bus = static_cast<Index>(grid_.generators[static_cast<std::size_t>(k)].bus);
      ev.g[bus] -= x[pg(k)];
      ev.g[N_ + bus] -= x[qg(k)];
      ev.Jg(bus, pg(k)) = -1.0;
      ev.Jg(N_ + bus, qg(k)) = -1.0;
    }
    ev.flows.reserve(static_cast<std::size_t>(E_));
    for (Index e = 0; e < E_; ++e) {
      ev.flows.push_back(branch_flow(grid_, static_cast<std::size_t>(e), vm, va));
      const BranchFlow& bf = ev.flows.back();
      const Branch& br = grid_.branches[static_cast<std::size_t>(e)];
      const auto i = static_cast<Index>(br.from), j = static_cast<Index>(br.to);
      ev.g[i] += bf.pf.value;
      ev.g[j] += bf.pt.value;
      ev.g[N_ + i] += bf.qf.value;
      ev.g[N_ + j] += bf.qt.value;
      const double s2 = br.s_max * br.s_max;
      const Index rf = thermal_ + 2 * e, rt = rf + 1;
      ev.h[rf] = bf.pf.value * bf.pf.value + bf.qf.value * bf.qf.value - s2;
      ev.h[rt] = bf.pt.value * bf.pt.value + bf.qt.value * bf.qt.value - s2;
      for (int a = 0; a < 4; ++a) {
        const Index col = bf.index[static_cast<std::size_t>(a)];
        ev.Jg(i, col) += bf.pf.grad[a];
        ev.Jg(j, col) += bf.pt.grad[a];
        ev.Jg(N_ + i, col) += bf.qf.grad[a];
        ev.Jg(N_ + j, col) += bf.qt.grad[a];
        ev.Jh(rf, col) += 2.0 * (bf.pf.value * bf.pf.grad[a] + bf.qf.value * bf.qf.grad[a]);
        ev.Jh(rt, col) += 2.0 * (bf.pt.value * bf.pt.grad[a] + bf.qt.value * bf.qt.grad[a]);
      }
    }
    const auto ref = static_cast<Index>(grid_.ref_bus);
    ev.g[2 * N_] = x[ref];
    ev.Jg(2 * N_, ref) = 1.0;
    for (std::size_t f = 0; f < fixed_.size(); ++f) {
      const Index row = 2 * N_ + 1 + static_cast<Index>(f);
      ev.g[row] = x[fixed_[f]] - lb_[fixed_[f]];
      ev.Jg(row, fixed_[f]) = 1.0;
    }

    Index r = 0;
    for (const VarBound& vb : bounds_) {
      ev.h[r] = vb.sign * (x[vb.var] - vb.bound);
      ev.Jh(r, vb.var) = vb.sign;
      ++r;
    }
    for (const AngleLimit& al : angles_) {
      ev.h[r] = al.sign * (x[al.from] - x[al.to] - al.bound);
      ev.Jh(r, al.from) = al.sign;
      ev.Jh(r, al.to) = -al.sign;
      ++r;
    }
    return ev;
  }

  // ∇²(λᵀg + νᵀh); the objective is linear.
  Mat hessian(const Eval& ev, const Vec& lam, const Vec& nu) const {
    Mat H = Mat::Zero(n_, n_);
    for (Index i = 0; i < N_; ++i) {
      const Bus& b = grid_.buses[static_cast<std::size_t>(i)];
      H(N_ + i, N_ + i) += 2.0 * (lam[i] * b.gs - lam[N_ + i] * b.bs);
    }
    for (Index e = 0; e < E_; ++e) {
      const BranchFlow& bf = ev.flows[static_cast<std::size_t>(e)];
      const Branch& br = grid_.branches[static_cast<std::size_t>(e)];
      const auto i = static_cast<Index>(br.from), j = static_cast<Index>(br.to);
      Eigen::Matrix4d Hl = lam[i] * bf.pf.hess + lam[j] * bf.pt.hess + lam[N_ + i] * bf.qf.hess + lam[N_ + j] * bf.qt.hess;
      const double nf = nu[thermal_ + 2 * e], nt = nu[thermal_ + 2 * e + 1];
      Hl += 2.0 * nf *
            (bf.pf.grad * bf.pf.grad.transpose() + bf.pf.value * bf.pf.hess + bf.qf.grad * bf.qf.grad.transpose() +
             bf.qf.value * bf.qf.hess);
      Hl += 2.0 * nt *
            (bf.pt.grad * bf.pt.grad.transpose() + bf.pt.value * bf.pt.hess + bf.qt.grad * bf.qt.grad.transpose() +
             bf.qt.value * bf.qt.hess);
      for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 4; ++c) H(bf.index[static_cast<std::size_t>(a)], bf.index[static_cast<std::size_t>(c)]) += Hl(a, c);
    }
    return H;
  }

  AcSolution solution(const Vec& x, double residual, int iterations) const {
    AcSolution sol;
    sol.va = x.head(N_);
    sol.vm = x.segment(N_, N_);
    sol.pg = x.segment(2 * N_, G_);
    sol.qg = x.segment(2 * N_ + G_, G_);
    const AcFlows fl = ac_flow_equations(grid_, sol.vm, sol.va);
    sol.pf = fl.pf;
    sol.qf = fl.qf;
    sol.pt = fl.pt;
    sol.qt = fl.qt;
    sol.objective = cost_.dot(x);
    sol.kkt_residual = residual;
    sol.iterations = iterations;
    return sol;
  }

 private:
  const GridCase& grid_;
  Index N_, G_, E_;
  Vec pd_bus_, qd_bus_;
  Index n_ = 0, m_ = 0, ni_ = 0, thermal_ = 0;
  Vec lb_, ub_, cost_;
  double cost_scale_ = 1.0;
  std::vector<Index> fixed_;
  std::vector<VarBound> bounds_;
  std::vector<AngleLimit> angles_;
};

// Solves the KKT system, shifting the Hessian block until the matrix has
// n positive and m negative eigenvalues.
Vec solve_with_inertia(const Mat& K, Index n, Index m, const Vec& rhs, double& last_shift, int iterations) {
  double dw = 0.0, dc = 0.0;
  for (int attempt = 0; attempt < 80; ++attempt) {
    Mat Kr = K;
    Kr.diagonal().head(n).array() += dw;
    Kr.diagonal().tail(m).array() -= dc;
    Eigen::SelfAdjointEigenSolver<Mat> es(Kr);
    if (es.info() != Eigen::Success) throw AcError("KKT eigendecomposition failed", 0.0, iterations);
    const Vec& lam = es.eigenvalues();
    const double zero = 1e-13 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    Index pos = 0, neg = 0;
    for (Index k = 0; k < lam.size(); ++k) {
      if (lam[k] > zero) ++pos;
      else if (lam[k] < -zero) ++neg;
    }
    if (pos == n && neg == m) {
      if (dw > 0.0) last_shift = dw;
      return es.eigenvectors() * lam.cwiseInverse().cwiseProduct(es.eigenvectors().transpose() * rhs);
    }
    if (neg < m && pos == n) {
      // rank-deficient constraint Jacobian; the shift must clear the zero threshold
      dc = dc == 0.0 ? std::max(1e-8, 10.0 * zero) : 10.0 * dc;
      if (dc > 1.0) break;
      continue;
    }
    if (dw == 0.0) {
      dw = last_shift == 0.0 ? 1e-4 : std::max(1e-20, last_shift / 3.0);
    } else {
      dw *= last_shift == 0.0 ? 100.0 : 8.0;
    }
    if (dw > 1e40) break;
  }
  throw AcError("KKT inertia correction failed", 0.0, iterations);
}

double step_to_boundary(const Vec& v, const Vec& dv) {
  double alpha = 1.0;
  for (Index k = 0; k < v.size(); ++k) {
    if (dv[k] < 0.0) alpha = std::min(alpha, -kFractionToBoundary * v[k] / dv[k]);
  }
  return alpha;
}

}  // namespace

AcSolution solve_acopf(const GridCase& grid, const Vec& pd, const Vec& qd, const AcOptions& options) {
  const AcModel model(grid, pd, qd);
  const Index n = model.n(), m = model.m(), ni = model.ni();
  const Vec grad_f = model.grad_f();

  Vec x = model.initial_point();
  Eval ev = model.evaluate(x);
  Vec z = (-ev.h).cwiseMax(1.0);
  double mu = options.mu_init;
  Vec nu = mu * z.cwiseInverse();
  Vec lam = Vec::Zero(m);
  const double mu_min = options.tol / 10.0;
  double last_shift = 0.0;

  for (int it = 0;; ++it) {
    const Vec Lx = grad_f + ev.Jg.transpose() * lam + ev.Jh.transpose() * nu;
    const double sd = std::max(kScaleMax, (lam.lpNorm<1>() + nu.lpNorm<1>()) / static_cast<double>(m + ni)) / kScaleMax;
    const double sc = ni > 0 ? std::max(kScaleMax, nu.lpNorm<1>() / static_cast<double>(ni)) / kScaleMax : 1.0;
    const Vec comp = z.cwiseProduct(nu);
    auto error = [&](double target) {
      double e = std::max(Lx.lpNorm<Eigen::Infinity>() / sd, ev.g.lpNorm<Eigen::Infinity>());
      if (ni > 0) {
        e = std::max(e, (ev.h + z).lpNorm<Eigen::Infinity>());
        e = std::max(e, ev.h.maxCoeff());
        e = std::max(e, (comp.array() - target).abs().maxCoeff() / sc);
      }
      return e;
    };
    const double e0 = error(0.0);
    if (!std::isfinite(e0)) throw AcError("AC-OPF iterates became non-finite", e0, it);
    if (e0 <= options.tol) return model.solution(x, e0, it);
    if (it >= options.max_iterations) throw AcError("AC-OPF iteration limit reached", e0, it);
    while (mu > mu_min && error(mu) <= kBarrierTol * mu) mu = std::max(mu_min, mu / 10.0);

    const Vec zinv = z.cwiseInverse();
    Mat K = Mat::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = model.hessian(ev, lam, nu) +
                            ev.Jh.transpose() * nu.cwiseProduct(zinv).asDiagonal() * ev.Jh;
    K.topRightCorner(n, m) = ev.Jg.transpose();
    K.bottomLeftCorner(m, n) = ev.Jg;
    Vec rhs(n + m);
    rhs.head(n) = -(Lx + ev.Jh.transpose() * zinv.cwiseProduct(Vec::Constant(ni, mu) + nu.cwiseProduct(ev.h)));
    rhs.tail(m) = -ev.g;
    const Vec d = solve_with_inertia(K, n, m, rhs, last_shift, it);
    const Vec dx = d.head(n);
    const Vec dlam = d.tail(m);
    const Vec dz = -ev.h - z - ev.Jh * dx;
    const Vec dnu = zinv.cwiseProduct(Vec::Constant(ni, mu) - nu.cwiseProduct(dz)) - nu;

    const double ap = step_to_boundary(z, dz);
    const double ad = step_to_boundary(nu, dnu);
    x += ap * dx;
    z += ap * dz;
    lam += ad * dlam;
    nu += ad * dnu;
    ev = model.evaluate(x);
  }
}

AcSolution solve_acopf(const GridCase& grid, const AcOptions& options) {
  const auto L = static_cast<Index>(grid.num_loads());
  Vec pd(L), qd(L);
  for (Index l = 0; l < L; ++l) {
    pd[l] = grid.loads[static_cast<std::size_t>(l)].pd_ref;
    qd[l] = grid.loads[static_cast<std::size_t>(l)].qd_ref;
  }
  return solve_acopf(grid, pd, qd, options);
}

double AcFeasibilityReport::worst() const {
  return std::max({balance, flows, voltage, generation, thermal, angle, reference});
}

AcFeasibilityReport check_ac_feasibility(const GridCase& grid, const Vec& pd, const Vec& qd, const AcSolution& sol,
                                         double tol) {
  const auto N = static_cast<Index>(grid.num_buses());
  const auto G = static_cast<Index>(grid.num_generators());
  const auto E = static_cast<Index>(grid.num_branches());
  if (sol.vm.size() != N || sol.va.size() != N || sol.pg.size() != G || sol.qg.size() != G || sol.pf.size() != E ||
      sol.qf.size() != E || sol.pt.size() != E || sol.qt.size() != E) {
    throw std::invalid_argument("AC solution has wrong dimensions");
  }
  AcFeasibilityReport rep;
  rep.tol = tol;
  const AcFlows fl = ac_flow_equations(grid, sol.vm, sol.va);
  Vec p_bal = fl.p_inj + bus_demand(grid, pd);
  Vec q_bal = fl.q_inj + bus_demand(grid, qd);
  for (Index k = 0; k < G; ++k) {
    const Generator& gen = grid.generators[static_cast<std::size_t>(k)];
    p_bal[static_cast<Index>(gen.bus)] -= sol.pg[k];
    q_bal[static_cast<Index>(gen.bus)] -= sol.qg[k];
    rep.generation = std::max({rep.generation, gen.pg_min - sol.pg[k], sol.pg[k] - gen.pg_max, gen.qg_min - sol.qg[k],
                               sol.qg[k] - gen.qg_max});
  }
  rep.balance = std::max(p_bal.lpNorm<Eigen::Infinity>(), q_bal.lpNorm<Eigen::Infinity>());
  if (E > 0) {
    rep.flows = std::max({(fl.pf - sol.pf).lpNorm<Eigen::Infinity>(), (fl.qf - sol.qf).lpNorm<Eigen::Infinity>(),
                          (fl.pt - sol.pt).lpNorm<Eigen::Infinity>(), (fl.qt - sol.qt).lpNorm<Eigen::Infinity>()});
  }
  for (Index i = 0; i < N; ++i) {
    const Bus& b = grid.buses[static_cast<std::size_t>(i)];
    rep.voltage = std::max({rep.voltage, b.vm_min - sol.vm[i], sol.vm[i] - b.vm_max});
  }
  for (Index e = 0; e < E; ++e) {
    const Branch& br = grid.branches[static_cast<std::size_t>(e)];
    rep.thermal = std::max({rep.thermal, std::hypot(sol.pf[e], sol.qf[e]) - br.s_max,
                            std::hypot(sol.pt[e], sol.qt[e]) - br.s_max});
    const double d = sol.va[static_cast<Index>(br.from)] - sol.va[static_cast<Index>(br.to)];
    rep.angle = std::max({rep.angle, br.dva_min - d, d - br.dva_max});
  }
  rep.reference = std::abs(sol.va[static_cast<Index>(grid.ref_bus)]);
  rep.pass = rep.worst() <= tol;
  return rep;
}

}  // namespace dc2ac
