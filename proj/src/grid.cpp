#include "dc2ac/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace dc2ac {

namespace {

std::string semantic(const std::string& what, std::size_t index, const std::string& why) {
  return what + " " + std::to_string(index + 1) + ": " + why;
}

}  // namespace

CaseError::CaseError(Kind kind, std::string message, std::size_t line, std::size_t column)
    : std::runtime_error(line > 0 ? message + " (line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ")"
                                  : message),
      kind_(kind),
      line_(line),
      column_(column) {}

std::vector<double> GridCase::reference_pd() const {
  std::vector<double> pd(loads.size());
  std::transform(loads.begin(), loads.end(), pd.begin(), [](const Load& l) { return l.pd_ref; });
  return pd;
}

std::vector<double> GridCase::reference_qd() const {
  std::vector<double> qd(loads.size());
  std::transform(loads.begin(), loads.end(), qd.begin(), [](const Load& l) { return l.qd_ref; });
  return qd;
}

double GridCase::total_reference_pd() const {
  return std::accumulate(loads.begin(), loads.end(), 0.0,
                         [](double acc, const Load& l) { return acc + l.pd_ref; });
}

PiAdmittance derive_pi_admittance(const Branch& branch) {
  using cd = std::complex<double>;
  if (branch.r == 0.0 && branch.x == 0.0) {
    throw CaseError(CaseError::Kind::Semantic, "degenerate branch impedance (r = x = 0)");
  }
  if (!(branch.tap > 0.0)) {
    throw CaseError(CaseError::Kind::Semantic, "branch tap ratio must be positive");
  }
  const cd ys = 1.0 / cd(branch.r, branch.x);
  const cd half_charge(0.0, 0.5 * branch.b_charge);
  const double tap2 = branch.tap * branch.tap;
  const cd yff = (ys + half_charge) / tap2;
  const cd yft = -ys / (branch.tap * std::exp(cd(0.0, -branch.shift)));
  const cd ytf = -ys / (branch.tap * std::exp(cd(0.0, branch.shift)));
  const cd ytt = ys + half_charge;
  return {yff.real(), yff.imag(), yft.real(), yft.imag(),
          ytf.real(), ytf.imag(), ytt.real(), ytt.imag()};
}

double dc_susceptance(const Branch& branch) {
  // Im(1/(r + jx)) = -x / (r² + x²)
  return -branch.x / (branch.r * branch.r + branch.x * branch.x) / branch.tap;
}

void validate_case(const GridCase& grid) {
  using K = CaseError::Kind;
  const std::size_t nb = grid.buses.size();
  if (nb == 0) throw CaseError(K::Semantic, "case has no buses");
  if (!(grid.base_mva > 0.0)) throw CaseError(K::Semantic, "base_mva must be positive");
  if (grid.ref_bus >= nb) throw CaseError(K::Semantic, "reference bus index out of range");
  if (!(grid.shed_cost >= 0.0) || !std::isfinite(grid.shed_cost)) {
    throw CaseError(K::Semantic, "shed cost must be finite and non-negative");
  }

  std::size_t refs = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    const Bus& b = grid.buses[i];
    if (b.kind == BusKind::Ref) ++refs;
    if (!(b.vm_min > 0.0)) throw CaseError(K::Semantic, semantic("bus", i, "vm_min must be positive"));
    if (!(b.vm_min <= b.vm_max)) throw CaseError(K::Semantic, semantic("bus", i, "vm_min > vm_max"));
    if (!std::isfinite(b.gs) || !std::isfinite(b.bs)) {
      throw CaseError(K::Semantic, semantic("bus", i, "non-finite shunt"));
    }
  }
  if (refs != 1 || grid.buses[grid.ref_bus].kind != BusKind::Ref) {
    throw CaseError(K::Semantic, "case must have exactly one reference bus");
  }

  for (std::size_t e = 0; e < grid.branches.size(); ++e) {
    const Branch& br = grid.branches[e];
    if (br.from >= nb || br.to >= nb) throw CaseError(K::Semantic, semantic("branch", e, "dangling bus reference"));
    if (br.from == br.to) throw CaseError(K::Semantic, semantic("branch", e, "self loop"));
    if (br.x == 0.0) throw CaseError(K::Semantic, semantic("branch", e, "zero reactance"));
    if (!(br.tap > 0.0)) throw CaseError(K::Semantic, semantic("branch", e, "tap ratio must be positive"));
    if (!(br.s_max > 0.0)) throw CaseError(K::Semantic, semantic("branch", e, "thermal limit must be positive"));
    if (!(br.dva_min <= 0.0 && 0.0 <= br.dva_max)) {
      throw CaseError(K::Semantic, semantic("branch", e, "angle bounds must bracket zero"));
    }
  }

  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const Generator& gen = grid.generators[g];
    if (gen.bus >= nb) throw CaseError(K::Semantic, semantic("gen", g, "dangling bus reference"));
    if (!(gen.pg_min <= gen.pg_max)) throw CaseError(K::Semantic, semantic("gen", g, "pg_min > pg_max"));
    if (!(gen.qg_min <= gen.qg_max)) throw CaseError(K::Semantic, semantic("gen", g, "qg_min > qg_max"));
    if (!std::isfinite(gen.cost)) throw CaseError(K::Semantic, semantic("gen", g, "non-finite cost"));
  }

  for (std::size_t l = 0; l < grid.loads.size(); ++l) {
    const Load& load = grid.loads[l];
    if (load.bus >= nb) throw CaseError(K::Semantic, semantic("load", l, "dangling bus reference"));
    if (!std::isfinite(load.pd_ref) || !std::isfinite(load.qd_ref)) {
      throw CaseError(K::Semantic, semantic("load", l, "non-finite demand"));
    }
  }
}

void finalize_case(GridCase& grid) {
  if (grid.shed_cost <= 0.0) {
    double max_cost = 0.0;
    for (const auto& g : grid.generators) max_cost = std::max(max_cost, std::abs(g.cost));
    grid.shed_cost = kShedCostFactor * (max_cost > 0.0 ? max_cost : 1.0);
  }
  validate_case(grid);
  for (auto& br : grid.branches) br.pi = derive_pi_admittance(br);
  for (auto& b : grid.buses)
    if (b.kind != BusKind::Ref) b.kind = BusKind::PQ;
  for (const auto& g : grid.generators)
    if (grid.buses[g.bus].kind != BusKind::Ref) grid.buses[g.bus].kind = BusKind::PV;
}

}  // namespace dc2ac
