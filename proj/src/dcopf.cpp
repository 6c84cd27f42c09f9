#include "dc2ac/dcopf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dc2ac {

namespace {

using Index = Eigen::Index;
constexpr double kInf = std::numeric_limits<double>::infinity();

IndexMap make_map(const GridCase& grid) {
  const auto N = static_cast<Index>(grid.num_buses());
  const auto E = static_cast<Index>(grid.num_branches());
  const auto G = static_cast<Index>(grid.num_generators());
  IndexMap m;
  m.pg = 0;
  m.pf = m.pg + G;
  m.va = m.pf + E;
  m.phi = m.va + N;
  m.dva = m.phi + N;
  m.num_vars = m.dva + E;
  m.balance = 0;
  m.flow = m.balance + N;
  m.angle = m.flow + E;
  m.ref = m.angle + E;
  m.num_rows = m.ref + 1;
  return m;
}

void check_dims(const GridCase& grid, const DcParams& params, const Vec& pd) {
  if (params.gs.size() != static_cast<Index>(grid.num_buses())) {
    throw std::invalid_argument("DcParams.gs has " + std::to_string(params.gs.size()) + " entries, case has " +
                                std::to_string(grid.num_buses()) + " buses");
  }
  if (params.b.size() != static_cast<Index>(grid.num_branches())) {
    throw std::invalid_argument("DcParams.b has " + std::to_string(params.b.size()) + " entries, case has " +
                                std::to_string(grid.num_branches()) + " branches");
  }
  if (pd.size() != static_cast<Index>(grid.num_loads())) {
    throw std::invalid_argument("demand vector has " + std::to_string(pd.size()) + " entries, case has " +
                                std::to_string(grid.num_loads()) + " loads");
  }
  if (!params.gs.allFinite() || !params.b.allFinite() || !pd.allFinite()) {
    throw std::invalid_argument("DC parameters and demand must be finite");
  }
  for (Index e = 0; e < params.b.size(); ++e) {
    if (params.b[e] == 0.0) throw std::invalid_argument("branch " + std::to_string(e + 1) + ": zero susceptance");
  }
}

}  // namespace

DcParams DcParams::nominal(const GridCase& grid) {
  DcParams p;
  p.gs.resize(static_cast<Index>(grid.num_buses()));
  p.b.resize(static_cast<Index>(grid.num_branches()));
  for (std::size_t i = 0; i < grid.num_buses(); ++i) p.gs[static_cast<Index>(i)] = grid.buses[i].gs;
  for (std::size_t e = 0; e < grid.num_branches(); ++e) p.b[static_cast<Index>(e)] = dc_susceptance(grid.branches[e]);
  return p;
}

Vec reference_demand(const GridCase& grid) {
  Vec pd(static_cast<Index>(grid.num_loads()));
  for (std::size_t l = 0; l < grid.num_loads(); ++l) pd[static_cast<Index>(l)] = grid.loads[l].pd_ref;
  return pd;
}

DcProblem build_dcopf(const GridCase& grid, const DcParams& params) {
  return build_dcopf(grid, params, reference_demand(grid));
}

DcProblem build_dcopf(const GridCase& grid, const DcParams& params, const Vec& pd) {
  check_dims(grid, params, pd);
  DcProblem prob;
  const IndexMap m = make_map(grid);
  prob.map = m;
  LinearProgram& lp = prob.lp;
  lp.c = Vec::Zero(m.num_vars);
  lp.lb = Vec::Constant(m.num_vars, -kInf);
  lp.ub = Vec::Constant(m.num_vars, kInf);
  lp.b = Vec::Zero(m.num_rows);

  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t g = 0; g < grid.num_generators(); ++g) {
    const auto& gen = grid.generators[g];
    const Index col = m.pg + static_cast<Index>(g);
    lp.c[col] = gen.cost;
    lp.lb[col] = gen.pg_min;
    lp.ub[col] = gen.pg_max;
    trips.emplace_back(m.balance + static_cast<Index>(gen.bus), col, 1.0);
  }
  for (std::size_t e = 0; e < grid.num_branches(); ++e) {
    const auto& br = grid.branches[e];
    const auto ei = static_cast<Index>(e);
    const Index pf = m.pf + ei;
    const Index vi = m.va + static_cast<Index>(br.from);
    const Index vj = m.va + static_cast<Index>(br.to);
    lp.lb[pf] = -br.s_max;
    lp.ub[pf] = br.s_max;
    trips.emplace_back(m.balance + static_cast<Index>(br.from), pf, -1.0);
    trips.emplace_back(m.balance + static_cast<Index>(br.to), pf, 1.0);
    // pf + b (va_i - va_j) = 0
    trips.emplace_back(m.flow + ei, pf, 1.0);
    trips.emplace_back(m.flow + ei, vi, params.b[ei]);
    trips.emplace_back(m.flow + ei, vj, -params.b[ei]);
    // va_i - va_j - dva = 0, dva in [dva_min, dva_max]
    trips.emplace_back(m.angle + ei, vi, 1.0);
    trips.emplace_back(m.angle + ei, vj, -1.0);
    trips.emplace_back(m.angle + ei, m.dva + ei, -1.0);
    lp.lb[m.dva + ei] = br.dva_min;
    lp.ub[m.dva + ei] = br.dva_max;
  }
  for (std::size_t i = 0; i < grid.num_buses(); ++i) {
    const auto ii = static_cast<Index>(i);
    const Index phi = m.phi + ii;
    lp.c[phi] = grid.shed_cost;
    lp.lb[phi] = 0.0;
    trips.emplace_back(m.balance + ii, phi, 1.0);
    lp.b[m.balance + ii] += params.gs[ii];
  }
  for (std::size_t l = 0; l < grid.num_loads(); ++l) {
    lp.b[m.balance + static_cast<Index>(grid.loads[l].bus)] += pd[static_cast<Index>(l)];
  }
  trips.emplace_back(m.ref, m.va + static_cast<Index>(grid.ref_bus), 1.0);

  lp.A.resize(m.num_rows, m.num_vars);
  lp.A.setFromTriplets(trips.begin(), trips.end());
  lp.A.makeCompressed();
  return prob;
}

DcSolution solve_dcopf(const GridCase& grid, const DcParams& params, double tol) {
  return solve_dcopf(grid, params, reference_demand(grid), tol);
}

DcSolution solve_dcopf(const GridCase& grid, const DcParams& params, const Vec& pd, double tol) {
  const DcProblem prob = build_dcopf(grid, params, pd);
  const IndexMap& m = prob.map;
  const auto N = static_cast<Index>(grid.num_buses());
  const auto E = static_cast<Index>(grid.num_branches());
  const auto G = static_cast<Index>(grid.num_generators());

  DcSolution sol;
  sol.lp = solve_lp(prob.lp, tol);
  sol.status = sol.lp.status;
  const LpSolution& s = sol.lp;
  sol.pg = s.x.segment(m.pg, G);
  sol.pf = s.x.segment(m.pf, E);
  sol.va = s.x.segment(m.va, N);
  sol.phi = s.x.segment(m.phi, N);
  sol.lambda_p = s.lambda_eq.segment(m.balance, N);
  sol.lambda_pf = -s.lambda_eq.segment(m.flow, E);
  sol.lambda_ref = s.lambda_eq[m.ref];
  sol.mu_pg_lo = s.mu_lo.segment(m.pg, G);
  sol.mu_pg_hi = s.mu_hi.segment(m.pg, G);
  sol.mu_pf_lo = s.mu_lo.segment(m.pf, E);
  sol.mu_pf_hi = s.mu_hi.segment(m.pf, E);
  sol.mu_theta_lo = s.mu_lo.segment(m.dva, E);
  sol.mu_theta_hi = s.mu_hi.segment(m.dva, E);
  sol.objective = s.objective;
  sol.pd = pd;
  return sol;
}

double dual_objective(const GridCase& grid, const DcParams& params, const Vec& pd, const DcSolution& sol) {
  check_dims(grid, params, pd);
  double value = 0.0;
  Vec rhs = params.gs;
  for (std::size_t l = 0; l < grid.num_loads(); ++l) rhs[static_cast<Index>(grid.loads[l].bus)] += pd[static_cast<Index>(l)];
  value += sol.lambda_p.dot(rhs);
  for (std::size_t g = 0; g < grid.num_generators(); ++g) {
    const auto gi = static_cast<Index>(g);
    value += sol.mu_pg_lo[gi] * grid.generators[g].pg_min - sol.mu_pg_hi[gi] * grid.generators[g].pg_max;
  }
  for (std::size_t e = 0; e < grid.num_branches(); ++e) {
    const auto ei = static_cast<Index>(e);
    const auto& br = grid.branches[e];
    value -= (sol.mu_pf_lo[ei] + sol.mu_pf_hi[ei]) * br.s_max;
    value += sol.mu_theta_lo[ei] * br.dva_min - sol.mu_theta_hi[ei] * br.dva_max;
  }
  return value;
}

}  // namespace dc2ac
