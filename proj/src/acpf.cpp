#include <cmath>
#include <limits>
#include <vector>

#include "dc2ac/acopf.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;

}  // namespace

Dispatch default_dispatch(const GridCase& grid) {
  Dispatch d;
  d.pg.resize(static_cast<Index>(grid.num_generators()));
  d.vm = Vec::Ones(static_cast<Index>(grid.num_buses()));
  for (std::size_t k = 0; k < grid.num_generators(); ++k) {
    const Generator& g = grid.generators[k];
    d.pg[static_cast<Index>(k)] = g.pg_min;
    d.vm[static_cast<Index>(g.bus)] = g.vm_set;
  }
  return d;
}

AcSolution solve_ac_powerflow(const GridCase& grid, const Dispatch& dispatch, const Vec& pd, const Vec& qd,
                              const PowerFlowOptions& options) {
  const auto N = static_cast<Index>(grid.num_buses());
  const auto G = static_cast<Index>(grid.num_generators());
  if (dispatch.pg.size() != G || dispatch.vm.size() != N) {
    throw std::invalid_argument("dispatch has wrong dimensions");
  }
  const Vec pd_bus = bus_demand(grid, pd);
  const Vec qd_bus = bus_demand(grid, qd);
  const auto ref = static_cast<Index>(grid.ref_bus);

  Vec p_spec = -pd_bus;
  for (Index k = 0; k < G; ++k) p_spec[static_cast<Index>(grid.generators[static_cast<std::size_t>(k)].bus)] += dispatch.pg[k];
  const Vec q_spec = -qd_bus;

  // unknowns: va at every non-reference bus, vm at PQ buses
  std::vector<Index> angle_buses, pq_buses;
  for (Index i = 0; i < N; ++i) {
    if (i != ref) angle_buses.push_back(i);
    if (grid.buses[static_cast<std::size_t>(i)].kind == BusKind::PQ && i != ref) pq_buses.push_back(i);
  }
  const auto na = static_cast<Index>(angle_buses.size());
  const auto nq = static_cast<Index>(pq_buses.size());

  Vec vm = dispatch.vm;
  Vec va = Vec::Zero(N);
  for (Index i : pq_buses) vm[i] = 1.0;

  auto mismatch = [&](const AcFlows& fl) {
    Vec F(na + nq);
    for (Index a = 0; a < na; ++a) F[a] = fl.p_inj[angle_buses[static_cast<std::size_t>(a)]] - p_spec[angle_buses[static_cast<std::size_t>(a)]];
    for (Index a = 0; a < nq; ++a) F[na + a] = fl.q_inj[pq_buses[static_cast<std::size_t>(a)]] - q_spec[pq_buses[static_cast<std::size_t>(a)]];
    return F;
  };

  AcFlows fl = ac_flow_equations(grid, vm, va);
  Vec F = mismatch(fl);
  double norm = F.size() ? F.lpNorm<Eigen::Infinity>() : 0.0;
  int it = 0;
  while (norm > options.tol) {
    if (it >= options.max_iterations || !std::isfinite(norm)) {
      throw AcError("power flow did not converge", norm, it);
    }
    const Eigen::MatrixXd Jfull = injection_jacobian(grid, vm, va);
    Eigen::MatrixXd J(na + nq, na + nq);
    std::vector<Index> rows, cols;
    for (Index i : angle_buses) rows.push_back(i), cols.push_back(i);
    for (Index i : pq_buses) rows.push_back(N + i), cols.push_back(N + i);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) J(static_cast<Index>(r), static_cast<Index>(c)) = Jfull(rows[r], cols[c]);
    const Vec dx = J.partialPivLu().solve(-F);
    for (Index a = 0; a < na; ++a) va[angle_buses[static_cast<std::size_t>(a)]] += dx[a];
    for (Index a = 0; a < nq; ++a) vm[pq_buses[static_cast<std::size_t>(a)]] += dx[na + a];
    ++it;
    fl = ac_flow_equations(grid, vm, va);
    F = mismatch(fl);
    norm = F.lpNorm<Eigen::Infinity>();
    if (vm.minCoeff() <= 0.0) norm = std::numeric_limits<double>::infinity();
  }

  AcSolution sol;
  sol.vm = vm;
  sol.va = va;
  sol.pf = fl.pf;
  sol.qf = fl.qf;
  sol.pt = fl.pt;
  sol.qt = fl.qt;
  sol.pg = dispatch.pg;
  sol.qg = Vec::Zero(G);

  // slack and reactive output: residual need at each generator bus
  Vec p_need = fl.p_inj + pd_bus;
  Vec q_need = fl.q_inj + qd_bus;
  std::vector<int> count(static_cast<std::size_t>(N), 0);
  for (const Generator& g : grid.generators) ++count[g.bus];
  bool slack_done = false;
  for (Index k = 0; k < G; ++k) {
    const auto bus = static_cast<Index>(grid.generators[static_cast<std::size_t>(k)].bus);
    sol.qg[k] = q_need[bus] / count[static_cast<std::size_t>(bus)];
    if (bus == ref && !slack_done) {
      double others = 0.0;
      for (Index m = 0; m < G; ++m)
        if (m != k && static_cast<Index>(grid.generators[static_cast<std::size_t>(m)].bus) == ref) others += dispatch.pg[m];
      sol.pg[k] = p_need[ref] - others;
      slack_done = true;
    }
  }
  sol.objective = 0.0;
  for (Index k = 0; k < G; ++k) sol.objective += grid.generators[static_cast<std::size_t>(k)].cost * sol.pg[k];
  sol.kkt_residual = norm;
  sol.iterations = it;
  return sol;
}

}  // namespace dc2ac
