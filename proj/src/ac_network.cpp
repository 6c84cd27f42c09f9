#include <cmath>

#include "dc2ac/acopf.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;

// Flow out of one branch end in local variables (v, w, a), own voltage v,
// far voltage w and angle a = θ_own − θ_far:
//   p =  g_own v² + v w (g_x cos a + b_x sin a)
//   q = −b_own v² + v w (g_x sin a − b_x cos a)
struct SideTerms {
  double p, q;
  Eigen::Vector3d gp, gq;
  Eigen::Matrix3d hp, hq;
};

SideTerms side(double g_own, double b_own, double g_x, double b_x, double v, double w, double a) {
  const double c = std::cos(a), s = std::sin(a);
  const double A = g_x * c + b_x * s;
  const double B = g_x * s - b_x * c;
  SideTerms t;
  t.p = g_own * v * v + v * w * A;
  t.q = -b_own * v * v + v * w * B;
  t.gp << 2 * g_own * v + w * A, v * A, -v * w * B;
  t.gq << -2 * b_own * v + w * B, v * B, v * w * A;
  t.hp << 2 * g_own, A, -w * B,
          A, 0.0, -v * B,
          -w * B, -v * B, -v * w * A;
  t.hq << -2 * b_own, B, w * A,
          B, 0.0, v * A,
          w * A, v * A, -v * w * B;
  return t;
}

FlowTerm lift(double value, const Eigen::Vector3d& g, const Eigen::Matrix3d& h, const Eigen::Matrix<double, 3, 4>& P) {
  FlowTerm f;
  f.value = value;
  f.grad = P.transpose() * g;
  f.hess = P.transpose() * h * P;
  return f;
}

}  // namespace

BranchFlow branch_flow(const GridCase& grid, std::size_t e, const Vec& vm, const Vec& va) {
  const Branch& br = grid.branches[e];
  const auto i = static_cast<Index>(br.from);
  const auto j = static_cast<Index>(br.to);
  const auto N = static_cast<Index>(grid.num_buses());
  const PiAdmittance& y = br.pi;

  // local order: va_i, va_j, vm_i, vm_j
  Eigen::Matrix<double, 3, 4> from_map = Eigen::Matrix<double, 3, 4>::Zero();
  from_map(0, 2) = 1.0;
  from_map(1, 3) = 1.0;
  from_map(2, 0) = 1.0;
  from_map(2, 1) = -1.0;
  Eigen::Matrix<double, 3, 4> to_map = Eigen::Matrix<double, 3, 4>::Zero();
  to_map(0, 3) = 1.0;
  to_map(1, 2) = 1.0;
  to_map(2, 0) = -1.0;
  to_map(2, 1) = 1.0;

  const double dth = va[i] - va[j];
  const SideTerms f = side(y.gff, y.bff, y.gft, y.bft, vm[i], vm[j], dth);
  const SideTerms t = side(y.gtt, y.btt, y.gtf, y.btf, vm[j], vm[i], -dth);

  BranchFlow out;
  out.pf = lift(f.p, f.gp, f.hp, from_map);
  out.qf = lift(f.q, f.gq, f.hq, from_map);
  out.pt = lift(t.p, t.gp, t.hp, to_map);
  out.qt = lift(t.q, t.gq, t.hq, to_map);
  out.index = {i, j, N + i, N + j};
  return out;
}

AcFlows ac_flow_equations(const GridCase& grid, const Vec& vm, const Vec& va) {
  const auto N = static_cast<Index>(grid.num_buses());
  const auto E = static_cast<Index>(grid.num_branches());
  if (vm.size() != N || va.size() != N) throw std::invalid_argument("voltage vectors have wrong dimensions");
  AcFlows out;
  out.pf.resize(E);
  out.qf.resize(E);
  out.pt.resize(E);
  out.qt.resize(E);
  out.p_inj = Vec::Zero(N);
  out.q_inj = Vec::Zero(N);
  for (Index i = 0; i < N; ++i) {
    const Bus& b = grid.buses[static_cast<std::size_t>(i)];
    out.p_inj[i] = b.gs * vm[i] * vm[i];
    out.q_inj[i] = -b.bs * vm[i] * vm[i];
  }
  for (Index e = 0; e < E; ++e) {
    const Branch& br = grid.branches[static_cast<std::size_t>(e)];
    const auto i = static_cast<Index>(br.from);
    const auto j = static_cast<Index>(br.to);
    const PiAdmittance& y = br.pi;
    const double vi = vm[i], vj = vm[j];
    const double c = std::cos(va[i] - va[j]), s = std::sin(va[i] - va[j]);
    out.pf[e] = y.gff * vi * vi + vi * vj * (y.gft * c + y.bft * s);
    out.qf[e] = -y.bff * vi * vi + vi * vj * (y.gft * s - y.bft * c);
    out.pt[e] = y.gtt * vj * vj + vi * vj * (y.gtf * c - y.btf * s);
    out.qt[e] = -y.btt * vj * vj + vi * vj * (-y.gtf * s - y.btf * c);
    out.p_inj[i] += out.pf[e];
    out.q_inj[i] += out.qf[e];
    out.p_inj[j] += out.pt[e];
    out.q_inj[j] += out.qt[e];
  }
  return out;
}

Eigen::MatrixXd injection_jacobian(const GridCase& grid, const Vec& vm, const Vec& va) {
  const auto N = static_cast<Index>(grid.num_buses());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  for (Index i = 0; i < N; ++i) {
    const Bus& b = grid.buses[static_cast<std::size_t>(i)];
    J(i, N + i) += 2.0 * b.gs * vm[i];
    J(N + i, N + i) -= 2.0 * b.bs * vm[i];
  }
  for (std::size_t e = 0; e < grid.num_branches(); ++e) {
    const BranchFlow bf = branch_flow(grid, e, vm, va);
    const auto i = static_cast<Index>(grid.branches[e].from);
    const auto j = static_cast<Index>(grid.branches[e].to);
    for (int k = 0; k < 4; ++k) {
      const Index col = bf.index[static_cast<std::size_t>(k)];
      J(i, col) += bf.pf.grad[k];
      J(j, col) += bf.pt.grad[k];
      J(N + i, col) += bf.qf.grad[k];
      J(N + j, col) += bf.qt.grad[k];
    }
  }
  return J;
}

Vec bus_demand(const GridCase& grid, const Vec& per_load) {
  if (per_load.size() != static_cast<Index>(grid.num_loads())) {
    throw std::invalid_argument("demand vector has wrong dimensions");
  }
  Vec out = Vec::Zero(static_cast<Index>(grid.num_buses()));
  for (std::size_t l = 0; l < grid.num_loads(); ++l) {
    out[static_cast<Index>(grid.loads[l].bus)] += per_load[static_cast<Index>(l)];
  }
  return out;
}

}  // namespace dc2ac
