#include <algorithm>
#include <numeric>
#include <random>

#include "dc2ac/dcopf.hpp"
#include "doctest.h"
#include "test_cases.hpp"

using namespace dc2ac;
using dc2ac::testing::two_bus;

namespace {

double coeff(const SpMat& A, Eigen::Index r, Eigen::Index c) { return A.coeff(r, c); }

// Merit-order dispatch: with no binding network limit the DC-OPF is a
// knapsack over generator costs.
double merit_order_cost(const GridCase& g, double demand) {
  std::vector<std::size_t> order(g.num_generators());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return g.generators[a].cost < g.generators[b].cost; });
  double cost = 0.0, left = demand;
  for (auto k : order) {
    double take = std::clamp(left, g.generators[k].pg_min, g.generators[k].pg_max);
    cost += take * g.generators[k].cost;
    left -= take;
  }
  return cost + std::max(left, 0.0) * g.shed_cost;
}

}  // namespace

TEST_CASE("two-bus construction census") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto prob = build_dcopf(g, DcParams::nominal(g));
  // pg, pf, va(2) plus one phi per bus plus one angle-difference column per branch
  CHECK(prob.lp.num_vars() == 4 + 2 + 1);
  // 2 balance + 1 flow + 1 angle-difference + 1 reference
  CHECK(prob.lp.num_rows() == 5);
  const auto& m = prob.map;
  CHECK(prob.lp.b[m.balance + 1] == doctest::Approx(1.0));
  CHECK(prob.lp.lb[m.dva] == doctest::Approx(-kDefaultAngleLimit));
  CHECK(prob.lp.ub[m.dva] == doctest::Approx(kDefaultAngleLimit));
  CHECK(coeff(prob.lp.A, m.ref, m.va) == 1.0);
}

TEST_CASE("shunt conductance enters the balance right-hand side") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto p = DcParams::nominal(g);
  auto base = build_dcopf(g, p);
  p.gs[0] = 0.05;
  auto shifted = build_dcopf(g, p);
  CHECK(shifted.lp.b[shifted.map.balance] - base.lp.b[base.map.balance] == doctest::Approx(0.05));
  CHECK(shifted.lp.b[shifted.map.balance + 1] == base.lp.b[base.map.balance + 1]);
}

TEST_CASE("doubling susceptance doubles the flow-row angle coefficients") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto p = DcParams::nominal(g);
  CHECK(p.b[0] == doctest::Approx(-10.0));
  auto base = build_dcopf(g, p);
  p.b *= 2.0;
  auto twice = build_dcopf(g, p);
  const auto& m = base.map;
  CHECK(coeff(twice.lp.A, m.flow, m.va) == doctest::Approx(2.0 * coeff(base.lp.A, m.flow, m.va)));
  CHECK(coeff(twice.lp.A, m.flow, m.va + 1) == doctest::Approx(2.0 * coeff(base.lp.A, m.flow, m.va + 1)));
  CHECK(coeff(twice.lp.A, m.flow, m.pf) == coeff(base.lp.A, m.flow, m.pf));
}

TEST_CASE("dimension mismatch is rejected") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto p = DcParams::nominal(g);
  p.gs.resize(3);
  CHECK_THROWS_AS(build_dcopf(g, p), std::invalid_argument);
  p = DcParams::nominal(g);
  p.b[0] = 0.0;
  CHECK_THROWS_AS(build_dcopf(g, p), std::invalid_argument);
  CHECK_THROWS_AS(build_dcopf(g, DcParams::nominal(g), Vec::Ones(2)), std::invalid_argument);
}

TEST_CASE("two-bus hand solution") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto p = DcParams::nominal(g);
  auto sol = solve_dcopf(g, p, 1e-9);
  REQUIRE(sol.optimal());
  CHECK(sol.pg[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.pf[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(sol.va[0]) < 1e-9);
  CHECK(sol.va[1] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(std::abs(sol.phi[0]) < 1e-7);
  CHECK(std::abs(sol.phi[1]) < 1e-7);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));

  double dual = dual_objective(g, p, sol.pd, sol);
  CHECK(dual == doctest::Approx(1.0).epsilon(1e-7));
  // interior generator: the price at its bus is its cost
  CHECK(sol.lambda_p[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.lambda_p[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("zero load gives a flat solution") {
  auto g = two_bus(0.0, 0.1, 0.0);
  auto sol = solve_dcopf(g, DcParams::nominal(g), 1e-9);
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.pg[0]) < 1e-7);
  CHECK(std::abs(sol.pf[0]) < 1e-7);
  CHECK(std::abs(sol.va[1]) < 1e-7);
}

TEST_CASE("insufficient capacity sheds load at the load bus") {
  // phi is only unique when the generator bus cannot absorb it; a binding line
  // limit of exactly the generator output pins phi at bus 0 to zero
  auto g = two_bus(0.0, 0.1, 1.0, 0.6, 0.6);
  auto sol = solve_dcopf(g, DcParams::nominal(g), 1e-9);
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.phi[0]) < 1e-7);
  CHECK(sol.phi[1] == doctest::Approx(0.4).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(0.6 + 0.4 * g.shed_cost).epsilon(1e-7));
}

TEST_CASE("insufficient capacity sheds load") {
  auto g = two_bus(0.0, 0.1, 1.0, 0.6);
  auto sol = solve_dcopf(g, DcParams::nominal(g), 1e-9);
  REQUIRE(sol.optimal());
  CHECK(sol.pg[0] == doctest::Approx(0.6).epsilon(1e-7));
  // phi at either end of the lossless line is an equally priced injection, so
  // only the total is unique
  CHECK(sol.phi.sum() == doctest::Approx(0.4).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(0.6 * 1.0 + 0.4 * g.shed_cost).epsilon(1e-7));
  CHECK(sol.lambda_p[1] == doctest::Approx(g.shed_cost).epsilon(1e-6));
  CHECK(sol.mu_pg_hi[0] > 1.0);
}

TEST_CASE("thermal limit binds") {
  auto g = two_bus(0.0, 0.1, 1.0, 2.0, 0.7);
  auto sol = solve_dcopf(g, DcParams::nominal(g), 1e-9);
  REQUIRE(sol.optimal());
  CHECK(sol.pf[0] == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(sol.phi[1] == doctest::Approx(0.3).epsilon(1e-7));
  CHECK(sol.mu_pf_hi[0] == doctest::Approx(g.shed_cost - 1.0).epsilon(1e-6));
  CHECK(dual_objective(g, DcParams::nominal(g), sol.pd, sol) == doctest::Approx(sol.objective).epsilon(1e-7));
}

TEST_CASE("random DC-OPF invariants") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 5 + static_cast<std::size_t>(trial % 20));
    auto p = DcParams::nominal(g);
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    for (Eigen::Index e = 0; e < p.b.size(); ++e) p.b[e] *= scale(rng);
    auto sol = solve_dcopf(g, p, 1e-8);
    REQUIRE(sol.optimal());
    auto prob = build_dcopf(g, p, sol.pd);
    CHECK(check_kkt(prob.lp, sol.lp, 1e-6).pass);

    Vec balance = sol.phi - p.gs;
    for (std::size_t k = 0; k < g.num_generators(); ++k) balance[static_cast<Eigen::Index>(g.generators[k].bus)] += sol.pg[static_cast<Eigen::Index>(k)];
    for (std::size_t l = 0; l < g.num_loads(); ++l) balance[static_cast<Eigen::Index>(g.loads[l].bus)] -= sol.pd[static_cast<Eigen::Index>(l)];
    for (std::size_t e = 0; e < g.num_branches(); ++e) {
      const auto& br = g.branches[e];
      const auto ei = static_cast<Eigen::Index>(e);
      balance[static_cast<Eigen::Index>(br.from)] -= sol.pf[ei];
      balance[static_cast<Eigen::Index>(br.to)] += sol.pf[ei];
      double flow = sol.pf[ei] + p.b[ei] * (sol.va[static_cast<Eigen::Index>(br.from)] - sol.va[static_cast<Eigen::Index>(br.to)]);
      CHECK(std::abs(flow) <= 1e-6);
      double dva = sol.va[static_cast<Eigen::Index>(br.from)] - sol.va[static_cast<Eigen::Index>(br.to)];
      CHECK(dva >= br.dva_min - 1e-6);
      CHECK(dva <= br.dva_max + 1e-6);
    }
    CHECK(balance.lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(std::abs(sol.va[static_cast<Eigen::Index>(g.ref_bus)]) <= 1e-9);
    CHECK(sol.phi.minCoeff() >= -1e-8);
    CHECK(std::abs(dual_objective(g, p, sol.pd, sol) - sol.objective) <= 1e-6 * (1.0 + std::abs(sol.objective)));
  }
}

TEST_CASE("uncongested DC-OPF matches merit-order dispatch") {
  std::mt19937_64 rng(31);
  dc2ac::testing::RandomCaseOptions opt;
  opt.rating_margin = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 4 + static_cast<std::size_t>(trial), opt);
    for (auto& br : g.branches) {
      br.dva_min = -3.0;
      br.dva_max = 3.0;
    }
    auto p = DcParams::nominal(g);
    auto sol = solve_dcopf(g, p, 1e-9);
    REQUIRE(sol.optimal());
    double demand = sol.pd.sum() + p.gs.sum();
    CHECK(sol.objective == doctest::Approx(merit_order_cost(g, demand)).epsilon(1e-7));
  }
}

TEST_CASE("objective is monotone in total demand when uncongested") {
  std::mt19937_64 rng(8);
  dc2ac::testing::RandomCaseOptions opt;
  opt.rating_margin = 1.0;
  auto g = dc2ac::testing::random_case(rng, 12, opt);
  auto p = DcParams::nominal(g);
  Vec base = reference_demand(g);
  double last = -1.0;
  for (double s = 0.2; s <= 2.0; s += 0.1) {
    auto sol = solve_dcopf(g, p, Vec(base * s), 1e-8);
    REQUIRE(sol.optimal());
    CHECK(sol.objective >= last - 1e-7);
    last = sol.objective;
  }
}
